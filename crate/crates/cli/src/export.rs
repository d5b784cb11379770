//! Trajectory and onboard-signal export.

use std::path::Path;

use aeromag_core::flight::{gen_calibration_trajectory, gen_validation_trajectory, Trajectory};
use aeromag_core::pipeline::simulate_flights;
use aeromag_core::seed::derive_seed;
use clap::ValueEnum;

use crate::config::ScenarioConfig;
use crate::error::{at_stage, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FlightKind {
    Calibration,
    Validation,
}

/// Writes the trajectory of one flight; with `signals`, also the clean
/// onboard signals of the full simulation next to it.
///
/// The trajectory seed matches the one used by `run-scenario` for the same
/// configuration seed.
pub fn export_trajectory(
    cfg: &ScenarioConfig,
    kind: FlightKind,
    path: &Path,
    signals: Option<&Path>,
) -> CliResult<Trajectory> {
    let setup = cfg.simulation_setup();
    let traj = match kind {
        FlightKind::Calibration => gen_calibration_trajectory(&setup.calibration, derive_seed(cfg.seed, 1)),
        FlightKind::Validation => gen_validation_trajectory(&setup.validation, derive_seed(cfg.seed, 2)),
    }
    .map_err(at_stage("trajectory generation"))?;
    traj.write_csv(path).map_err(at_stage("trajectory export"))?;
    if let Some(sig_path) = signals {
        let flights = simulate_flights(&setup, cfg.seed).map_err(at_stage("flight simulation"))?;
        let s = match kind {
            FlightKind::Calibration => &flights.calibration.signals,
            FlightKind::Validation => &flights.validation.signals,
        };
        s.write_csv(sig_path).map_err(at_stage("signal export"))?;
    }
    Ok(traj)
}
