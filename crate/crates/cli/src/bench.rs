//! Static-field noise benchmark of a single sensor grade.

use aeromag_core::flight::BE_MAGNITUDE;
use aeromag_core::noise::{bandwidth_gain, target_asd, BandwidthParams};
use aeromag_core::sensors::{SensorGrade, SensorModel};
use aeromag_core::spectral::{allan_deviation, log_tau_grid, welch_asd, SpectralEstimate};
use nalgebra::Vector3;

use crate::error::{at_stage, CliError, CliResult};

/// Welch segments per record in the benchmark.
pub const BENCH_SEGMENTS: usize = 32;

#[derive(Debug, Clone)]
pub struct NoiseBench {
    pub grade: SensorGrade,
    pub f_s: f64,
    /// Output error of the primary channel, nT (scalar for the OPM, body x otherwise).
    pub error: Vec<f64>,
    pub asd: SpectralEstimate,
    pub adev: SpectralEstimate,
}

impl NoiseBench {
    /// Expected ASD: the synthesis profile through the bandwidth filter.
    pub fn expected_asd(&self, model: &SensorModel, f: f64) -> f64 {
        let bw = BandwidthParams {
            f_bw: model.params.f_bw,
            f_s: self.f_s,
        };
        target_asd(f, &model.params.noise) * bandwidth_gain(f, &bw)
    }
}

/// Simulates `grade` in a static 50000 nT field at 20 °C and estimates the
/// ASD and Allan deviation of its output error. The field lies along the
/// sensor's sensitive axis so the geometric noise penalty is 1.
pub fn run_noise_bench(model: &SensorModel, duration: f64, f_s: f64, seed: u64) -> CliResult<NoiseBench> {
    if !(duration > 0.0 && f_s > 0.0) {
        return Err(CliError::Config(format!(
            "duration {duration} s and rate {f_s} Hz must be positive"
        )));
    }
    let n = (duration * f_s).round() as usize;
    if n < 2 * BENCH_SEGMENTS {
        return Err(CliError::Config(format!(
            "{duration} s at {f_s} Hz is too short for a spectrum"
        )));
    }
    let grade = model.params.grade;
    let axis = model.params.penalty_axis().unwrap_or_else(Vector3::z);
    let b = axis * BE_MAGNITUDE;
    let out = model
        .measure(&vec![b; n], &vec![aeromag_core::sensors::T_REF; n], f_s, seed)
        .map_err(at_stage(format!("simulate {grade}")))?;
    let error: Vec<f64> = if out.vector.is_empty() {
        out.scalar.iter().map(|v| v - BE_MAGNITUDE).collect()
    } else {
        out.vector.iter().map(|v| v.x - b.x).collect()
    };
    let asd = welch_asd(&error, f_s, 2 * n / (BENCH_SEGMENTS + 1), 0.5).map_err(at_stage("welch ASD"))?;
    let adev = allan_deviation(&error, f_s, &log_tau_grid(n, f_s, 10)).map_err(at_stage("Allan deviation"))?;
    Ok(NoiseBench {
        grade,
        f_s,
        error,
        asd,
        adev,
    })
}
