//! Magnetometer error models: OPM (scalar), fluxgate (vector) and NV diamond
//! (vector, field and lab grade).
//!
//! Every model runs the same pipeline per series: deterministic physics,
//! then synthesised stochastic noise scaled by a geometric penalty, then the
//! two-tap bandwidth filter.

use std::f64::consts::{FRAC_PI_2, PI};
use std::str::FromStr;

use nalgebra::{Matrix3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flight::OnboardSignals;
use crate::frames::angle_between;
use crate::noise::{bandwidth_filter, synth_noise, BandwidthParams, NoiseParams};
use crate::seed::derive_seed;

/// Reference temperature of the thermal models, °C.
pub const T_REF: f64 = 20.0;
/// Electron gyromagnetic ratio, Hz/T (CODATA: 28.024 951 GHz/T).
pub const GAMMA_E: f64 = 28.024e9;
/// NV zero-field-splitting temperature coefficient, Hz/K.
pub const DD_DT: f64 = -74.2e3;

const DEG: f64 = PI / 180.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SensorGrade {
    Opm,
    Fluxgate,
    NvField,
    NvLab,
}

impl SensorGrade {
    pub const ALL: [SensorGrade; 4] = [Self::Opm, Self::Fluxgate, Self::NvField, Self::NvLab];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Opm => "opm",
            Self::Fluxgate => "fluxgate",
            Self::NvField => "nv-field",
            Self::NvLab => "nv-lab",
        }
    }
}

impl FromStr for SensorGrade {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|g| g.name() == s).ok_or_else(|| {
            Error::Config(format!(
                "unknown sensor grade '{s}' (expected opm, fluxgate, nv-field, nv-lab)"
            ))
        })
    }
}

impl std::fmt::Display for SensorGrade {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpmParams {
    /// Heading error amplitudes for the cos ψ, cos 2ψ and cos 4ψ harmonics, nT.
    pub heading_coeffs: [f64; 3],
    /// Optical axis in the body frame.
    pub optical_axis: [f64; 3],
    /// Centre of the loss-of-lock zone in ψ, rad.
    pub dead_zone_center: f64,
    /// Half-width of the loss-of-lock zone, rad.
    pub dead_zone_half_width: f64,
    /// Loss-of-lock noise σ as a multiple of the white-noise σ at the sampling rate.
    pub lock_loss_factor: f64,
}

impl Default for OpmParams {
    fn default() -> Self {
        Self {
            heading_coeffs: [0.2, 2.5, 0.5],
            optical_axis: [0.0, 0.0, 1.0],
            dead_zone_center: FRAC_PI_2,
            dead_zone_half_width: 5.0 * DEG,
            lock_loss_factor: 100.0,
        }
    }
}

impl OpmParams {
    pub fn axis(&self) -> Vector3<f64> {
        Vector3::from(self.optical_axis).normalize()
    }

    pub fn heading_error(&self, psi: f64) -> f64 {
        let [c1, c2, c3] = self.heading_coeffs;
        c1 * psi.cos() + c2 * (2.0 * psi).cos() + c3 * (4.0 * psi).cos()
    }

    /// True when ψ (or its mirror π − ψ) lies inside the loss-of-lock zone.
    pub fn in_dead_zone(&self, psi: f64) -> bool {
        let c = self.dead_zone_center;
        (psi - c).abs() <= self.dead_zone_half_width || ((PI - psi) - c).abs() <= self.dead_zone_half_width
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluxgateParams {
    /// Upper-triangular coil matrix (row-major), including per-axis scale.
    pub m: [[f64; 3]; 3],
    /// Thermal gain coefficients, 1/K.
    pub k_s: [f64; 3],
    /// Thermal offset coefficients, nT/K.
    pub k_o: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NvParams {
    /// Upper-triangular non-orthogonality matrix (row-major).
    pub m: [[f64; 3]; 3],
    /// Per-axis scale factors.
    pub s: [f64; 3],
    /// Thermal compensation efficiency in [0, 1].
    pub lambda_t: f64,
    /// Zero-field-splitting temperature coefficient, Hz/K.
    pub dd_dt: f64,
    /// Gyromagnetic ratio, Hz/T.
    pub gamma_e: f64,
    /// Crystal axis in the body frame.
    pub axis: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum SensorPhysics {
    Opm(OpmParams),
    Fluxgate(FluxgateParams),
    Nv(NvParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorParams {
    pub grade: SensorGrade,
    pub noise: NoiseParams,
    /// Bandwidth, Hz.
    pub f_bw: f64,
    /// Regulariser of the geometric noise penalty; `None` disables the penalty.
    pub epsilon_geo: Option<f64>,
    pub physics: SensorPhysics,
}

/// Upper-triangular matrix with unit-ish diagonal `1 + scale_i` and
/// off-diagonal `sin(angle)` couplings.
fn coil_matrix(angle: f64, scales: [f64; 3]) -> [[f64; 3]; 3] {
    let k = angle.sin();
    [
        [1.0 + scales[0], k, k],
        [0.0, 1.0 + scales[1], k],
        [0.0, 0.0, 1.0 + scales[2]],
    ]
}

fn to_matrix(m: &[[f64; 3]; 3]) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| m[i][j])
}

impl SensorParams {
    /// Preset parameters for a grade. Noise and bandwidth values follow the
    /// published sensor table; geometric and thermal constants are typical
    /// datasheet magnitudes.
    pub fn preset(grade: SensorGrade) -> Self {
        let nv = |angle_deg: f64, ppm: f64, lambda_t: f64| NvParams {
            m: coil_matrix(angle_deg * DEG, [0.0; 3]),
            s: [1.0 + ppm * 1e-6, 1.0 - ppm * 1e-6, 1.0 + ppm * 1e-6],
            lambda_t,
            dd_dt: DD_DT,
            gamma_e: GAMMA_E,
            axis: [1.0, 1.0, 1.0],
        };
        match grade {
            SensorGrade::Opm => Self {
                grade,
                noise: NoiseParams::new(0.003, 0.5, 1.0),
                f_bw: 400.0,
                epsilon_geo: Some(0.1),
                physics: SensorPhysics::Opm(OpmParams::default()),
            },
            SensorGrade::Fluxgate => Self {
                grade,
                noise: NoiseParams::new(0.022, 1.0, 1.0),
                f_bw: 60.0,
                epsilon_geo: None,
                physics: SensorPhysics::Fluxgate(FluxgateParams {
                    m: coil_matrix(0.05 * DEG, [50e-6, -50e-6, 50e-6]),
                    k_s: [30e-6; 3],
                    k_o: [0.1; 3],
                }),
            },
            SensorGrade::NvField => Self {
                grade,
                noise: NoiseParams::new(0.5, 10.0, 2.0),
                f_bw: 200.0,
                epsilon_geo: Some(0.15),
                physics: SensorPhysics::Nv(nv(0.1, 100.0, 0.0)),
            },
            SensorGrade::NvLab => Self {
                grade,
                noise: NoiseParams::new(0.0009, 15.0, 1.5),
                f_bw: 1000.0,
                epsilon_geo: Some(0.15),
                physics: SensorPhysics::Nv(nv(0.02, 20.0, 0.995)),
            },
        }
    }

    /// Preset with fields replaced by a (partial) JSON object, merged recursively.
    pub fn preset_with_overrides(grade: SensorGrade, overrides: &serde_json::Value) -> Result<Self> {
        let mut base = serde_json::to_value(Self::preset(grade))?;
        merge_json(&mut base, overrides);
        let params: Self =
            serde_json::from_value(base).map_err(|e| Error::Config(format!("sensor override for {grade}: {e}")))?;
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        self.noise.validate().map_err(|e| Error::Config(e.to_string()))?;
        if !(self.f_bw > 0.0) {
            return Err(Error::Config(format!("{}: bandwidth must be positive", self.grade)));
        }
        if let Some(eps) = self.epsilon_geo {
            if !(eps > 0.0 && eps < 1.0) {
                return Err(Error::Config(format!("{}: epsilon_geo must lie in (0, 1)", self.grade)));
            }
        }
        Ok(())
    }

    /// Sensitive axis used by the geometric noise penalty, if any.
    pub fn penalty_axis(&self) -> Option<Vector3<f64>> {
        match &self.physics {
            SensorPhysics::Opm(p) => Some(p.axis()),
            SensorPhysics::Nv(p) => Some(Vector3::from(p.axis).normalize()),
            SensorPhysics::Fluxgate(_) => None,
        }
    }

    pub fn is_scalar(&self) -> bool {
        matches!(self.physics, SensorPhysics::Opm(_))
    }
}

fn merge_json(base: &mut serde_json::Value, patch: &serde_json::Value) {
    match (base, patch) {
        (serde_json::Value::Object(b), serde_json::Value::Object(p)) => {
            for (k, v) in p {
                merge_json(b.entry(k.clone()).or_insert(serde_json::Value::Null), v);
            }
        }
        (b, p) => *b = p.clone(),
    }
}

/// Which error sources are active in a simulated sensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ErrorToggles {
    pub physics: bool,
    pub noise: bool,
    pub bandwidth: bool,
}

impl Default for ErrorToggles {
    fn default() -> Self {
        Self::all()
    }
}

impl ErrorToggles {
    pub fn all() -> Self {
        Self {
            physics: true,
            noise: true,
            bandwidth: true,
        }
    }

    pub fn none() -> Self {
        Self {
            physics: false,
            noise: false,
            bandwidth: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalState {
    /// Internal sensor temperature, °C.
    pub t: f64,
}

impl ThermalState {
    pub fn new(t: f64) -> Self {
        Self { t }
    }

    pub fn delta(&self) -> f64 {
        self.t - T_REF
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpmState {
    pub locked: bool,
    pub axis: Vector3<f64>,
}

impl OpmState {
    pub fn new(axis: Vector3<f64>) -> Self {
        Self {
            locked: true,
            axis: axis.normalize(),
        }
    }
}

/// `1 / max(|cos ψ|, ε)`
pub fn geometric_penalty(psi: f64, epsilon: f64) -> f64 {
    1.0 / psi.cos().abs().max(epsilon)
}

/// Heading error of the OPM with the default harmonic amplitudes.
pub fn opm_heading_error(psi: f64) -> f64 {
    OpmParams::default().heading_error(psi)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpmOutput {
    pub value: f64,
    pub state: OpmState,
    /// False while the sensor has lost lock.
    pub valid: bool,
}

/// One OPM sample before the bandwidth filter.
///
/// `eta` is the raw noise sample, penalised here by the angle to the optical
/// axis. `lock_noise` is the (already scaled) sample used while out of lock.
pub fn opm_measure(
    bt_b: &Vector3<f64>,
    state: OpmState,
    params: &OpmParams,
    epsilon_geo: f64,
    eta: f64,
    lock_noise: f64,
) -> Result<OpmOutput> {
    let magnitude = bt_b.norm();
    let psi = angle_between(bt_b, &state.axis)?;
    if params.in_dead_zone(psi) {
        return Ok(OpmOutput {
            value: magnitude + lock_noise,
            state: OpmState { locked: false, ..state },
            valid: false,
        });
    }
    Ok(OpmOutput {
        value: magnitude + params.heading_error(psi) + eta * geometric_penalty(psi, epsilon_geo),
        state: OpmState { locked: true, ..state },
        valid: true,
    })
}

/// `(M B) ∘ (1 + k_s ΔT) + k_o ΔT`
pub fn fluxgate_measure(bt_b: &Vector3<f64>, thermal: &ThermalState, params: &FluxgateParams) -> Vector3<f64> {
    let dt = thermal.delta();
    let gain = Vector3::from(params.k_s) * dt + Vector3::repeat(1.0);
    (to_matrix(&params.m) * bt_b).component_mul(&gain) + Vector3::from(params.k_o) * dt
}

/// Thermal zero-field-splitting shift projected on the crystal axis, nT.
pub fn nv_thermal_shift(thermal: &ThermalState, params: &NvParams) -> Vector3<f64> {
    let tesla = (1.0 - params.lambda_t) / params.gamma_e * (params.dd_dt * thermal.delta());
    Vector3::from(params.axis).normalize() * (tesla * 1e9)
}

/// `(M B) ∘ s + ((1 − λ_t)/γ_e)(dD/dT · ΔT) n̂_nv`
pub fn nv_measure(bt_b: &Vector3<f64>, thermal: &ThermalState, params: &NvParams) -> Vector3<f64> {
    (to_matrix(&params.m) * bt_b).component_mul(&Vector3::from(params.s)) + nv_thermal_shift(thermal, params)
}

pub fn nv_scalar(bv: &Vector3<f64>) -> f64 {
    bv.norm()
}

/// Output of a simulated sensor over a series.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorSeries {
    /// Vector output, nT (empty for scalar-only sensors).
    pub vector: Vec<Vector3<f64>>,
    /// Scalar output, nT (magnitude of the vector output for vector sensors).
    pub scalar: Vec<f64>,
    /// False on samples where the sensor had lost lock.
    pub valid: Vec<bool>,
}

/// A simulated sensor: parameters plus the switches for its error sources.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorModel {
    pub params: SensorParams,
    pub toggles: ErrorToggles,
}

impl SensorModel {
    pub fn new(params: SensorParams) -> Self {
        Self {
            params,
            toggles: ErrorToggles::all(),
        }
    }

    pub fn preset(grade: SensorGrade) -> Self {
        Self::new(SensorParams::preset(grade))
    }

    pub fn with_toggles(mut self, toggles: ErrorToggles) -> Self {
        self.toggles = toggles;
        self
    }

    /// Runs the sensor over a field series sampled at `f_s` with the given
    /// internal temperatures.
    pub fn measure(&self, field: &[Vector3<f64>], temperature: &[f64], f_s: f64, seed: u64) -> Result<SensorSeries> {
        if field.len() != temperature.len() {
            return Err(Error::Argument("field and temperature series differ in length".into()));
        }
        if field.is_empty() {
            return Err(Error::Argument("empty field series".into()));
        }
        let n = field.len();
        let p = &self.params;
        let axes = if p.is_scalar() { 1 } else { 3 };
        let noise: Vec<Vec<f64>> = if self.toggles.noise {
            (0..axes)
                .map(|axis| {
                    synth_noise(
                        &p.noise,
                        n.max(2),
                        f_s,
                        derive_seed(seed, 0x6e6f_6973_6500 + axis as u64),
                    )
                })
                .collect::<Result<_>>()?
        } else {
            vec![vec![0.0; n.max(2)]; axes]
        };
        let penalty_axis = p.penalty_axis();
        let bw = BandwidthParams { f_bw: p.f_bw, f_s };
        let filter = |x: Vec<f64>| -> Result<Vec<f64>> {
            if self.toggles.bandwidth {
                bandwidth_filter(&x, &bw)
            } else {
                Ok(x)
            }
        };

        match &p.physics {
            SensorPhysics::Opm(opm) => {
                let eps = p.epsilon_geo.unwrap_or(1.0);
                let lock_sigma = opm.lock_loss_factor * p.noise.sigma_w * (f_s / 2.0).sqrt();
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x6c6f_636b));
                let mut state = OpmState::new(opm.axis());
                let mut raw = Vec::with_capacity(n);
                let mut valid = Vec::with_capacity(n);
                for (k, b) in field.iter().enumerate() {
                    let lock_draw: f64 = StandardNormal.sample(&mut rng);
                    if !self.toggles.physics {
                        let gain = match p.epsilon_geo {
                            Some(e) if b.norm() > 0.0 => geometric_penalty(angle_between(b, &opm.axis())?, e),
                            _ => 1.0,
                        };
                        raw.push(b.norm() + noise[0][k] * gain);
                        valid.push(true);
                        continue;
                    }
                    let out = opm_measure(b, state, opm, eps, noise[0][k], lock_draw * lock_sigma)?;
                    state = out.state;
                    raw.push(out.value);
                    valid.push(out.valid);
                }
                Ok(SensorSeries {
                    vector: Vec::new(),
                    scalar: filter(raw)?,
                    valid,
                })
            }
            SensorPhysics::Fluxgate(_) | SensorPhysics::Nv(_) => {
                let mut channels = [Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n)];
                for (k, (b, &t)) in field.iter().zip(temperature).enumerate() {
                    let thermal = ThermalState::new(t);
                    let ph = match (&p.physics, self.toggles.physics) {
                        (_, false) => *b,
                        (SensorPhysics::Fluxgate(fg), true) => fluxgate_measure(b, &thermal, fg),
                        (SensorPhysics::Nv(nv), true) => nv_measure(b, &thermal, nv),
                        (SensorPhysics::Opm(_), true) => unreachable!(),
                    };
                    let gain = match (penalty_axis, p.epsilon_geo) {
                        (Some(axis), Some(eps)) if b.norm() > 0.0 => geometric_penalty(angle_between(b, &axis)?, eps),
                        _ => 1.0,
                    };
                    for (i, ch) in channels.iter_mut().enumerate() {
                        ch.push(ph[i] + noise[i][k] * gain);
                    }
                }
                let [x, y, z] = channels;
                let (x, y, z) = (filter(x)?, filter(y)?, filter(z)?);
                let vector: Vec<Vector3<f64>> = (0..n).map(|k| Vector3::new(x[k], y[k], z[k])).collect();
                let scalar = vector.iter().map(nv_scalar).collect();
                Ok(SensorSeries {
                    vector,
                    scalar,
                    valid: vec![true; n],
                })
            }
        }
    }
}

/// Magnetometer configuration on the platform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SensorSetup {
    /// Error-free scalar and vector measurements.
    Ideal,
    /// Fluxgate for the vector, OPM for the scalar.
    #[serde(rename = "fluxgate+opm")]
    FluxgateOpm,
    NvField,
    NvLab,
}

impl SensorSetup {
    pub const ALL: [SensorSetup; 4] = [Self::Ideal, Self::FluxgateOpm, Self::NvField, Self::NvLab];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Ideal => "ideal",
            Self::FluxgateOpm => "fluxgate+opm",
            Self::NvField => "nv-field",
            Self::NvLab => "nv-lab",
        }
    }

    /// Grades of the (vector, scalar) instruments.
    pub fn grades(&self) -> Option<(SensorGrade, SensorGrade)> {
        match self {
            Self::Ideal => None,
            Self::FluxgateOpm => Some((SensorGrade::Fluxgate, SensorGrade::Opm)),
            Self::NvField => Some((SensorGrade::NvField, SensorGrade::NvField)),
            Self::NvLab => Some((SensorGrade::NvLab, SensorGrade::NvLab)),
        }
    }
}

impl FromStr for SensorSetup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "perfect" => Ok(Self::Ideal),
            _ => Self::ALL
                .into_iter()
                .find(|g| g.name() == s)
                .ok_or_else(|| Error::Config(format!("unknown sensor setup '{s}'"))),
        }
    }
}

impl std::fmt::Display for SensorSetup {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Measured magnetic data available to the calibration.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurements {
    pub setup: SensorSetup,
    /// Vector magnetometer output, body frame, nT.
    pub vector: Vec<Vector3<f64>>,
    /// Scalar magnetometer output, nT.
    pub scalar: Vec<f64>,
    pub valid: Vec<bool>,
}

impl Measurements {
    /// Error-free measurements of the clean onboard field.
    pub fn ideal(signals: &OnboardSignals) -> Self {
        Self {
            setup: SensorSetup::Ideal,
            vector: signals.bt_b.clone(),
            scalar: signals.bt.clone(),
            valid: vec![true; signals.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.scalar.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scalar.is_empty()
    }
}

/// Simulates every instrument of `setup` over the clean onboard signals.
pub fn measure_series(
    setup: SensorSetup,
    models: &SensorModels,
    signals: &OnboardSignals,
    seed: u64,
) -> Result<Measurements> {
    let Some((vector_grade, scalar_grade)) = setup.grades() else {
        return Ok(Measurements::ideal(signals));
    };
    let f_s = signals.f_s;
    let vec_model = models.get(vector_grade);
    let vec_out = vec_model.measure(&signals.bt_b, &signals.t_sensor, f_s, derive_seed(seed, 0x7665_6374))?;
    if scalar_grade == vector_grade {
        return Ok(Measurements {
            setup,
            vector: vec_out.vector,
            scalar: vec_out.scalar,
            valid: vec_out.valid,
        });
    }
    let sc_out =
        models
            .get(scalar_grade)
            .measure(&signals.bt_b, &signals.t_sensor, f_s, derive_seed(seed, 0x7363_616c))?;
    let valid = vec_out.valid.iter().zip(&sc_out.valid).map(|(a, b)| *a && *b).collect();
    Ok(Measurements {
        setup,
        vector: vec_out.vector,
        scalar: sc_out.scalar,
        valid,
    })
}

/// One model per grade, presets unless overridden.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorModels {
    models: Vec<SensorModel>,
}

impl Default for SensorModels {
    fn default() -> Self {
        Self {
            models: SensorGrade::ALL.iter().map(|&g| SensorModel::preset(g)).collect(),
        }
    }
}

impl SensorModels {
    pub fn get(&self, grade: SensorGrade) -> &SensorModel {
        self.models
            .iter()
            .find(|m| m.params.grade == grade)
            .expect("every grade has a model")
    }

    pub fn set(&mut self, model: SensorModel) {
        let grade = model.params.grade;
        self.models.retain(|m| m.params.grade != grade);
        self.models.push(model);
    }

    pub fn with_toggles(mut self, toggles: ErrorToggles) -> Self {
        for m in &mut self.models {
            m.toggles = toggles;
        }
        self
    }
}
