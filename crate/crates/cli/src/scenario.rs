//! Full-pipeline scenario runs.

use std::fs;
use std::path::Path;

use aeromag_core::calibration::{AttitudeSource, CalibrationResult, ModelKind};
use aeromag_core::flight::OnboardSignals;
use aeromag_core::pipeline::{evaluate, measure_flights, simulate_flights, Flights};
use aeromag_core::seed::derive_seed;
use aeromag_core::sensors::{Measurements, SensorGrade, SensorSetup};
use aeromag_core::spectral::{allan_deviation, default_segment_length, log_tau_grid, welch_asd};
use aeromag_core::tl::{scenario_stats, ScenarioKind, ScenarioStats, TlCoefficients};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ScenarioConfig, SCHEMA_VERSION};
use crate::error::{at_stage, io_at, CliResult};
use crate::output::{write_estimate, write_json, write_table};

#[derive(Debug, Clone, Serialize)]
pub struct FlightStats {
    pub calibration: ScenarioStats,
    pub validation: ScenarioStats,
}

#[derive(Debug, Clone, Serialize)]
pub struct SetupSummary {
    pub setup: SensorSetup,
    /// Loss-of-lock samples on the calibration and validation flights.
    pub invalid_samples: (usize, usize),
    pub fits: Vec<CalibrationResult>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub seed: u64,
    pub scenario: ScenarioKind,
    pub coefficients: TlCoefficients,
    pub platform_field: FlightStats,
    /// Largest INS attitude error per flight, degrees.
    pub ins_drift_max_deg: (f64, f64),
    pub entries: Vec<SetupSummary>,
}

impl RunSummary {
    pub fn fit(&self, setup: SensorSetup, model: ModelKind, source: AttitudeSource) -> Option<&CalibrationResult> {
        self.entries
            .iter()
            .find(|e| e.setup == setup)?
            .fits
            .iter()
            .find(|f| f.model == model && f.source == source)
    }
}

/// Attitude error of the INS rotation per sample, degrees.
fn ins_error_deg(s: &OnboardSignals) -> Vec<[f64; 3]> {
    s.r_eb
        .iter()
        .zip(&s.r_hat_eb)
        .map(|(r, rh)| {
            let (a, b) = (r.to_euler(), rh.to_euler());
            let wrap =
                |d: f64| (d + std::f64::consts::PI).rem_euclid(2.0 * std::f64::consts::PI) - std::f64::consts::PI;
            [wrap(b.roll - a.roll), wrap(b.pitch - a.pitch), wrap(b.yaw - a.yaw)].map(f64::to_degrees)
        })
        .collect()
}

fn write_ins_error(path: &Path, s: &OnboardSignals) -> CliResult<f64> {
    let err = ins_error_deg(s);
    let max = err.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    write_table(
        path,
        &["t", "roll_error_deg", "pitch_error_deg", "yaw_error_deg"],
        s.t.iter().zip(&err).map(|(t, e)| vec![*t, e[0], e[1], e[2]]),
    )?;
    Ok(max)
}

/// Scalar error series of each instrument in `setup` on one flight.
fn instrument_errors(setup: SensorSetup, meas: &Measurements, s: &OnboardSignals) -> Vec<(SensorGrade, Vec<f64>)> {
    let Some((vector, scalar)) = setup.grades() else {
        return Vec::new();
    };
    let vec_err: Vec<f64> = meas.vector.iter().zip(&s.bt).map(|(v, b)| v.norm() - b).collect();
    if vector == scalar {
        return vec![(vector, vec_err)];
    }
    let sc_err = meas
        .scalar
        .iter()
        .zip(&s.bt)
        .zip(&meas.valid)
        .filter(|(_, ok)| **ok)
        .map(|((m, b), _)| m - b)
        .collect();
    vec![(vector, vec_err), (scalar, sc_err)]
}

fn write_spectra(dir: &Path, grade: SensorGrade, err: &[f64], f_s: f64) -> CliResult<()> {
    let stage = |what: &str| at_stage(format!("{what} of {grade}"));
    let asd = welch_asd(err, f_s, default_segment_length(err.len(), 8), 0.5).map_err(stage("ASD"))?;
    write_estimate(
        &dir.join(format!("asd_{grade}.csv")),
        "frequency_hz",
        "asd_nt_per_rthz",
        &asd,
    )?;
    let adev = allan_deviation(err, f_s, &log_tau_grid(err.len(), f_s, 10)).map_err(stage("ADEV"))?;
    write_estimate(&dir.join(format!("adev_{grade}.csv")), "tau_s", "adev_nt", &adev)
}

fn run_setup(cfg: &ScenarioConfig, flights: &Flights, setup: SensorSetup, out: &Path) -> CliResult<SetupSummary> {
    let dir = out.join(setup.name());
    fs::create_dir_all(&dir).map_err(io_at(&dir))?;
    let models = cfg.sensor_models()?;
    let meas = measure_flights(flights, setup, &models, derive_seed(cfg.seed, 100))
        .map_err(at_stage(format!("sensor simulation for {setup}")))?;
    let invalid = |m: &Measurements| m.valid.iter().filter(|v| !**v).count();
    let mut fits = Vec::new();
    for &model in &cfg.models {
        for &source in &cfg.sources {
            let (result, comp) = evaluate(flights, &meas, model, source, &cfg.fit)
                .map_err(at_stage(format!("{model} fit with {source} source on {setup}")))?;
            write_table(
                &dir.join(format!("residuals_{model}_{source}.csv")),
                &["t", "estimate_nt", "residual_nt"],
                (0..comp.t.len()).map(|k| vec![comp.t[k], comp.estimate[k], comp.residual[k]]),
            )?;
            fits.push(result);
        }
    }
    if cfg.spectra {
        let s = &flights.validation.signals;
        for (grade, err) in instrument_errors(setup, &meas.1, s) {
            write_spectra(&dir, grade, &err, s.f_s)?;
        }
    }
    let summary = SetupSummary {
        setup,
        invalid_samples: (invalid(&meas.0), invalid(&meas.1)),
        fits,
    };
    write_json(&dir.join("run.json"), &summary)?;
    Ok(summary)
}

/// Simulates both flights, then runs every sensor setup in parallel. Each
/// setup writes into its own subdirectory of `out`.
pub fn run_scenario(cfg: &ScenarioConfig, out: &Path) -> CliResult<RunSummary> {
    fs::create_dir_all(out).map_err(io_at(out))?;
    let flights = simulate_flights(&cfg.simulation_setup(), cfg.seed).map_err(at_stage("flight simulation"))?;
    let cal_drift = write_ins_error(&out.join("ins_error_calibration.csv"), &flights.calibration.signals)?;
    let val_drift = write_ins_error(&out.join("ins_error_validation.csv"), &flights.validation.signals)?;
    let entries = cfg
        .setups
        .par_iter()
        .map(|&setup| run_setup(cfg, &flights, setup, out))
        .collect::<CliResult<Vec<_>>>()?;
    let stats = |s: &OnboardSignals| scenario_stats(&flights.coefficients, &s.background_samples());
    let summary = RunSummary {
        schema_version: SCHEMA_VERSION,
        seed: cfg.seed,
        scenario: cfg.scenario,
        coefficients: flights.coefficients,
        platform_field: FlightStats {
            calibration: stats(&flights.calibration.signals),
            validation: stats(&flights.validation.signals),
        },
        ins_drift_max_deg: (cal_drift, val_drift),
        entries,
    };
    write_json(&out.join("run.json"), &summary)?;
    Ok(summary)
}
