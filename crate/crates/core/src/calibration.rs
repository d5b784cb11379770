//! Regression of Tolles-Lawson coefficients from simulated flights and
//! compensation of measurements with the fitted model.

use std::f64::consts::PI;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flight::{OnboardSignals, BE_MAGNITUDE};
use crate::frames::rotate_to_body;
use crate::sensors::Measurements;
use crate::tl::{
    scalar_regressor_row, vector_regressor_block, FieldSample, TlCoefficients, SCALAR_TERMS, VECTOR_TERMS,
};

/// Condition numbers above this are flagged in the result.
pub const CONDITION_FLAG: f64 = 1e8;
/// Condition numbers above this are treated as rank deficiency.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Where the body-frame background direction comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttitudeSource {
    /// Ground-truth background field.
    Perfect,
    /// Direction of the measured vector field, model magnitude.
    VectorMagnetometer,
    /// INS rotation applied to the model background field.
    Ins,
}

impl AttitudeSource {
    pub const ALL: [AttitudeSource; 3] = [Self::Perfect, Self::VectorMagnetometer, Self::Ins];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Perfect => "perfect",
            Self::VectorMagnetometer => "vector-magnetometer",
            Self::Ins => "ins",
        }
    }
}

impl FromStr for AttitudeSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown attitude source '{s}'")))
    }
}

impl std::fmt::Display for AttitudeSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    #[serde(rename = "scalar-1d")]
    Scalar1d,
    #[serde(rename = "vector-3d")]
    Vector3d,
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Scalar1d => "scalar-1d",
            Self::Vector3d => "vector-3d",
        }
    }

    pub fn terms(&self) -> usize {
        match self {
            Self::Scalar1d => SCALAR_TERMS,
            Self::Vector3d => VECTOR_TERMS,
        }
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scalar-1d" | "1d" => Ok(Self::Scalar1d),
            "vector-3d" | "3d" => Ok(Self::Vector3d),
            _ => Err(Error::Config(format!("unknown model '{s}'"))),
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Signal conditioning ahead of the regression.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Preprocessing {
    #[default]
    None,
    /// Band-limited regression (not supported).
    Bandpass { low: f64, high: f64 },
}

/// Field used to build the INS proxy for the scalar model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InsNormalization {
    /// `R̂ᵀ·B_e,model`
    #[default]
    ModelField,
    /// Measured scalar magnitude along the INS direction.
    MeasuredMagnitude,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitOptions {
    /// Low-pass cutoff of the proxy derivative, Hz (infinite disables).
    #[serde(with = "cutoff_serde")]
    pub derivative_cutoff: f64,
    /// Model background magnitude, nT.
    pub model_magnitude: f64,
    pub preprocessing: Preprocessing,
    pub ins_normalization: InsNormalization,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            derivative_cutoff: 1.0,
            model_magnitude: BE_MAGNITUDE,
            preprocessing: Preprocessing::None,
            ins_normalization: InsNormalization::ModelField,
        }
    }
}

/// JSON has no infinity; `null` stands for "no filter".
mod cutoff_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_some(v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ResidualStats {
    pub mean: f64,
    pub std: f64,
    pub max: f64,
}

impl ResidualStats {
    pub fn from_residuals(r: &[f64]) -> Self {
        if r.is_empty() {
            return Self::default();
        }
        let n = r.len() as f64;
        let mean = r.iter().sum::<f64>() / n;
        let var = r.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self {
            mean,
            std: var.sqrt(),
            max: r.iter().cloned().fold(0.0, f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub model: ModelKind,
    pub source: AttitudeSource,
    pub options: FitOptions,
    /// Scalar: 18 terms (p, reduced N, E column-major). Vector: p, N and E row-major.
    pub coefficients: Vec<f64>,
    /// Condition number of the column-equilibrated regressor.
    pub condition_number: f64,
    /// Condition number above [`CONDITION_FLAG`].
    pub ill_conditioned: bool,
    /// The eddy-current trace was unobservable and fixed to zero (scalar model).
    #[serde(default)]
    pub eddy_trace_fixed: bool,
    pub samples_used: usize,
    pub samples_dropped: usize,
    pub calibration: ResidualStats,
    pub validation: Option<ResidualStats>,
}

impl CalibrationResult {
    /// Result holding known coefficients, for compensating with ground truth.
    pub fn from_truth(model: ModelKind, source: AttitudeSource, c: &TlCoefficients, options: FitOptions) -> Self {
        let coefficients = match model {
            ModelKind::Scalar1d => c.to_scalar_vector().0.to_vec(),
            ModelKind::Vector3d => c.to_vector_vector().0.to_vec(),
        };
        Self {
            model,
            source,
            options,
            coefficients,
            condition_number: f64::NAN,
            ill_conditioned: false,
            eddy_trace_fixed: false,
            samples_used: 0,
            samples_dropped: 0,
            calibration: ResidualStats::default(),
            validation: None,
        }
    }

    /// Full coefficient set (vector model only).
    pub fn tl_coefficients(&self) -> Option<TlCoefficients> {
        let arr: [f64; VECTOR_TERMS] = self.coefficients.as_slice().try_into().ok()?;
        (self.model == ModelKind::Vector3d).then(|| crate::tl::VectorCoefficientVector(arr).to_coefficients())
    }
}

/// Second-order Butterworth low-pass as a direct-form biquad.
struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
}

impl Biquad {
    fn butterworth_lowpass(cutoff: f64, f_s: f64) -> Self {
        let k = (PI * cutoff / f_s).tan();
        let q = std::f64::consts::FRAC_1_SQRT_2;
        let norm = 1.0 / (1.0 + k / q + k * k);
        let b0 = k * k * norm;
        Self {
            b: [b0, 2.0 * b0, b0],
            a: [2.0 * (k * k - 1.0) * norm, (1.0 - k / q + k * k) * norm],
        }
    }

    fn run(&self, x: &[f64]) -> Vec<f64> {
        let (mut x1, mut x2, mut y1, mut y2) = (x[0], x[0], x[0], x[0]);
        x.iter()
            .map(|&v| {
                let y = self.b[0] * v + self.b[1] * x1 + self.b[2] * x2 - self.a[0] * y1 - self.a[1] * y2;
                (x2, x1, y2, y1) = (x1, v, y1, y);
                y
            })
            .collect()
    }
}

/// Zero-phase low-pass (forward-backward second-order Butterworth with odd
/// reflection padding).
pub fn zero_phase_lowpass(series: &[f64], f_s: f64, cutoff: f64) -> Result<Vec<f64>> {
    if cutoff.is_infinite() {
        return Ok(series.to_vec());
    }
    if !(cutoff > 0.0 && cutoff < 0.5 * f_s) {
        return Err(Error::Argument(format!(
            "cutoff {cutoff} Hz outside (0, {}) Hz",
            0.5 * f_s
        )));
    }
    let n = series.len();
    let pad = ((3.0 * f_s / cutoff).ceil() as usize).min(n - 1);
    let (first, last) = (series[0], series[n - 1]);
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|k| 2.0 * first - series[k]));
    ext.extend_from_slice(series);
    ext.extend((1..=pad).map(|k| 2.0 * last - series[n - 1 - k]));

    let filter = Biquad::butterworth_lowpass(cutoff, f_s);
    let mut y = filter.run(&ext);
    y.reverse();
    let mut y = filter.run(&y);
    y.reverse();
    Ok(y[pad..pad + n].to_vec())
}

/// Forward difference of the low-passed series, last value repeated.
pub fn filtered_derivative(series: &[f64], f_s: f64, cutoff: f64) -> Result<Vec<f64>> {
    if series.len() < 2 {
        return Err(Error::Argument("derivative needs at least two samples".into()));
    }
    let y = zero_phase_lowpass(series, f_s, cutoff)?;
    let mut d: Vec<f64> = y.windows(2).map(|w| (w[1] - w[0]) * f_s).collect();
    d.push(d[d.len() - 1]);
    Ok(d)
}

fn filtered_derivative_vec(series: &[Vector3<f64>], f_s: f64, cutoff: f64) -> Result<Vec<Vector3<f64>>> {
    let axis = |i: usize| -> Result<Vec<f64>> {
        let x: Vec<f64> = series.iter().map(|v| v[i]).collect();
        filtered_derivative(&x, f_s, cutoff)
    };
    let (x, y, z) = (axis(0)?, axis(1)?, axis(2)?);
    Ok((0..series.len()).map(|k| Vector3::new(x[k], y[k], z[k])).collect())
}

/// Background field proxy in the body frame and its derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct Proxy {
    pub b: Vec<Vector3<f64>>,
    pub dbdt: Vec<Vector3<f64>>,
    pub valid: Vec<bool>,
}

/// Body-frame background proxy for `src`.
///
/// The perfect source also carries the analytic derivative; the other sources
/// differentiate the proxy numerically.
pub fn build_be_proxy(
    signals: &OnboardSignals,
    meas: &Measurements,
    src: AttitudeSource,
    opts: &FitOptions,
) -> Result<Proxy> {
    let n = signals.len();
    if meas.len() != n {
        return Err(Error::Argument("measurements and signals differ in length".into()));
    }
    let mut valid = meas.valid.clone();
    let b: Vec<Vector3<f64>> = match src {
        AttitudeSource::Perfect => {
            return Ok(Proxy {
                b: signals.be_b.clone(),
                dbdt: signals.dbe_b.clone(),
                valid,
            });
        }
        AttitudeSource::VectorMagnetometer => {
            if meas.vector.len() != n {
                return Err(Error::Config(format!(
                    "sensor setup '{}' has no vector magnetometer",
                    meas.setup
                )));
            }
            meas.vector
                .iter()
                .zip(valid.iter_mut())
                .map(|(v, ok)| {
                    let norm = v.norm();
                    if norm > 0.0 && norm.is_finite() {
                        v * (opts.model_magnitude / norm)
                    } else {
                        *ok = false;
                        Vector3::zeros()
                    }
                })
                .collect()
        }
        AttitudeSource::Ins => {
            let model_e = signals.be_e.normalize() * opts.model_magnitude;
            signals
                .r_hat_eb
                .iter()
                .zip(&meas.scalar)
                .map(|(r, &bt)| {
                    let v = rotate_to_body(r, &model_e);
                    match opts.ins_normalization {
                        InsNormalization::ModelField => v,
                        InsNormalization::MeasuredMagnitude => v * (bt / opts.model_magnitude),
                    }
                })
                .collect()
        }
    };
    let dbdt = filtered_derivative_vec(&b, signals.f_s, opts.derivative_cutoff)?;
    Ok(Proxy { b, dbdt, valid })
}

fn check_preprocessing(opts: &FitOptions) -> Result<()> {
    match opts.preprocessing {
        Preprocessing::None => Ok(()),
        Preprocessing::Bandpass { .. } => Err(Error::OutOfScope(
            "band-pass preprocessing is not supported; regression runs on unfiltered data".into(),
        )),
    }
}

/// Least squares with column equilibration and Householder QR. Returns the
/// solution and the condition number of the equilibrated matrix.
pub fn solve_least_squares(a: &DMatrix<f64>, y: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    let (m, n) = a.shape();
    if m < n {
        return Err(Error::Estimation {
            message: format!("{m} equations for {n} unknowns"),
            condition_number: f64::INFINITY,
        });
    }
    let scale: Vec<f64> = (0..n)
        .map(|j| {
            let s = a.column(j).norm();
            if s > 0.0 {
                1.0 / s
            } else {
                1.0
            }
        })
        .collect();
    let mut scaled = a.clone();
    for (j, s) in scale.iter().enumerate() {
        scaled.column_mut(j).scale_mut(*s);
    }
    let qr = scaled.qr();
    let r = qr.r();
    let sv = r.singular_values();
    let smax = sv.max();
    let smin = sv.min();
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(cond <= CONDITION_LIMIT) {
        return Err(Error::Estimation {
            message: "regressor is rank deficient; add attitude excitation".into(),
            condition_number: cond,
        });
    }
    let qty = qr.q().tr_mul(y);
    let z = r.solve_upper_triangular(&qty).ok_or_else(|| Error::Estimation {
        message: "triangular solve failed".into(),
        condition_number: cond,
    })?;
    let x = DVector::from_iterator(n, z.iter().zip(&scale).map(|(v, s)| v * s));
    Ok((x, cond))
}

fn proxy_sample(proxy: &Proxy, k: usize, t: f64) -> FieldSample {
    FieldSample::new(proxy.b[k], proxy.dbdt[k], t)
}

/// Samples kept for regression and compensation.
fn usable(proxy: &Proxy, meas: &Measurements) -> Vec<usize> {
    (0..meas.len())
        .filter(|&k| proxy.valid[k] && meas.scalar[k].is_finite())
        .collect()
}

/// Ordinary least squares of the 18-term scalar model on
/// `y = B_t,meas − B_e,model`.
pub fn fit_scalar(
    signals: &OnboardSignals,
    meas: &Measurements,
    src: AttitudeSource,
    opts: &FitOptions,
) -> Result<CalibrationResult> {
    check_preprocessing(opts)?;
    let proxy = build_be_proxy(signals, meas, src, opts)?;
    let keep = usable(&proxy, meas);
    if keep.len() < SCALAR_TERMS {
        return Err(Error::Estimation {
            message: format!("only {} usable samples for {SCALAR_TERMS} coefficients", keep.len()),
            condition_number: f64::INFINITY,
        });
    }
    let mut a = DMatrix::zeros(keep.len(), SCALAR_TERMS);
    let mut y = DVector::zeros(keep.len());
    for (row, &k) in keep.iter().enumerate() {
        let r = scalar_regressor_row(&proxy_sample(&proxy, k, signals.t[k]))?;
        for (j, v) in r.iter().enumerate() {
            a[(row, j)] = *v;
        }
        y[row] = meas.scalar[k] - opts.model_magnitude;
    }
    let (x, cond, trace_fixed) = solve_scalar_system(a, &y)?;
    let mut result = finish(
        ModelKind::Scalar1d,
        src,
        opts,
        x,
        cond,
        keep.len(),
        meas.len(),
        signals,
        meas,
    )?;
    result.eddy_trace_fixed = trace_fixed;
    Ok(result)
}

/// Columns of the eddy-current diagonal in the scalar regressor.
const EDDY_DIAGONAL: [usize; 3] = [9, 13, 17];

/// Solves the scalar system, fixing `E₁₁ + E₂₂ + E₃₃ = 0` when the trace
/// column vanishes.
///
/// `Σᵢ Ḃᵢ B̂ᵢ = d‖B‖/dt`, so a proxy of constant magnitude with an exact
/// derivative makes the eddy trace unobservable. The constraint picks one
/// member of the solution family; the compensated output is unaffected.
fn solve_scalar_system(mut a: DMatrix<f64>, y: &DVector<f64>) -> Result<(DVector<f64>, f64, bool)> {
    let [d0, d1, d2] = EDDY_DIAGONAL;
    let trace = a.column(d0) + a.column(d1) + a.column(d2);
    let eddy_scale = a.columns(9, 9).norm();
    if eddy_scale == 0.0 || trace.norm() > 1e-9 * eddy_scale {
        let (x, cond) = solve_least_squares(&a, y)?;
        return Ok((x, cond, false));
    }
    let last = a.column(d2).clone_owned();
    for d in [d0, d1] {
        let col = a.column(d) - &last;
        a.set_column(d, &col);
    }
    let reduced = a.remove_column(d2);
    let (x, cond) = solve_least_squares(&reduced, y)?;
    let mut full = x.insert_row(d2, 0.0);
    full[d2] = -full[d0] - full[d1];
    Ok((full, cond, true))
}

/// Least squares of the 21-term vector model on `y = B_t,meas − B̃_e`.
pub fn fit_vector(
    signals: &OnboardSignals,
    meas: &Measurements,
    src: AttitudeSource,
    opts: &FitOptions,
) -> Result<CalibrationResult> {
    check_preprocessing(opts)?;
    if meas.vector.len() != meas.len() {
        return Err(Error::Config(format!(
            "vector model needs a vector magnetometer; setup '{}' has none",
            meas.setup
        )));
    }
    let proxy = build_be_proxy(signals, meas, src, opts)?;
    let keep = usable(&proxy, meas);
    if 3 * keep.len() < VECTOR_TERMS {
        return Err(Error::Estimation {
            message: format!("only {} usable samples for {VECTOR_TERMS} coefficients", keep.len()),
            condition_number: f64::INFINITY,
        });
    }
    let mut a = DMatrix::zeros(3 * keep.len(), VECTOR_TERMS);
    let mut y = DVector::zeros(3 * keep.len());
    for (row, &k) in keep.iter().enumerate() {
        let block = vector_regressor_block(&proxy_sample(&proxy, k, signals.t[k]));
        a.view_mut((3 * row, 0), (3, VECTOR_TERMS)).copy_from(&block);
        let target = meas.vector[k] - proxy.b[k];
        y.rows_mut(3 * row, 3).copy_from(&target);
    }
    let (x, cond) = solve_least_squares(&a, &y)?;
    finish(
        ModelKind::Vector3d,
        src,
        opts,
        x,
        cond,
        keep.len(),
        meas.len(),
        signals,
        meas,
    )
}

#[allow(clippy::too_many_arguments)]
fn finish(
    model: ModelKind,
    source: AttitudeSource,
    opts: &FitOptions,
    x: DVector<f64>,
    cond: f64,
    used: usize,
    total: usize,
    signals: &OnboardSignals,
    meas: &Measurements,
) -> Result<CalibrationResult> {
    let mut result = CalibrationResult {
        model,
        source,
        options: *opts,
        coefficients: x.iter().cloned().collect(),
        condition_number: cond,
        ill_conditioned: cond > CONDITION_FLAG,
        eddy_trace_fixed: false,
        samples_used: used,
        samples_dropped: total - used,
        calibration: ResidualStats::default(),
        validation: None,
    };
    result.calibration = compensate(signals, meas, &result)?.stats;
    Ok(result)
}

/// Compensated background estimate and residual against ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Compensation {
    pub t: Vec<f64>,
    /// Scalar background estimate (magnitude of the vector estimate for the 3D model), nT.
    pub estimate: Vec<f64>,
    /// Vector background estimate (3D model only), nT.
    pub estimate_vector: Option<Vec<Vector3<f64>>>,
    /// `δB_e` per sample, nT.
    pub residual: Vec<f64>,
    pub stats: ResidualStats,
    pub dropped: usize,
}

/// Removes the fitted platform field from the measurements.
pub fn compensate(signals: &OnboardSignals, meas: &Measurements, result: &CalibrationResult) -> Result<Compensation> {
    if result.coefficients.len() != result.model.terms() {
        return Err(Error::Argument(format!(
            "{} model needs {} coefficients, got {}",
            result.model,
            result.model.terms(),
            result.coefficients.len()
        )));
    }
    check_preprocessing(&result.options)?;
    let proxy = build_be_proxy(signals, meas, result.source, &result.options)?;
    let keep = usable(&proxy, meas);
    let x = &result.coefficients;
    let mut out = Compensation {
        t: Vec::with_capacity(keep.len()),
        estimate: Vec::with_capacity(keep.len()),
        estimate_vector: None,
        residual: Vec::with_capacity(keep.len()),
        stats: ResidualStats::default(),
        dropped: meas.len() - keep.len(),
    };
    match result.model {
        ModelKind::Scalar1d => {
            for &k in &keep {
                let row = scalar_regressor_row(&proxy_sample(&proxy, k, signals.t[k]))?;
                let ba: f64 = row.iter().zip(x).map(|(a, c)| a * c).sum();
                let est = meas.scalar[k] - ba;
                out.t.push(signals.t[k]);
                out.estimate.push(est);
                out.residual.push((est - signals.be_b[k].norm()).abs());
            }
        }
        ModelKind::Vector3d => {
            if meas.vector.len() != meas.len() {
                return Err(Error::Config(format!(
                    "setup '{}' has no vector magnetometer",
                    meas.setup
                )));
            }
            let coeffs = DVector::from_column_slice(x);
            let mut vectors = Vec::with_capacity(keep.len());
            for &k in &keep {
                let block = vector_regressor_block(&proxy_sample(&proxy, k, signals.t[k]));
                let ba = block * &coeffs;
                let est = meas.vector[k] - Vector3::new(ba[0], ba[1], ba[2]);
                out.t.push(signals.t[k]);
                out.estimate.push(est.norm());
                out.residual.push((est - signals.be_b[k]).norm());
                vectors.push(est);
            }
            out.estimate_vector = Some(vectors);
        }
    }
    out.stats = ResidualStats::from_residuals(&out.residual);
    Ok(out)
}

/// Fits on the calibration flight and reports residuals on both flights.
pub fn calibrate_and_validate(
    model: ModelKind,
    src: AttitudeSource,
    opts: &FitOptions,
    calibration: (&OnboardSignals, &Measurements),
    validation: (&OnboardSignals, &Measurements),
) -> Result<(CalibrationResult, Compensation)> {
    let mut result = match model {
        ModelKind::Scalar1d => fit_scalar(calibration.0, calibration.1, src, opts)?,
        ModelKind::Vector3d => fit_vector(calibration.0, calibration.1, src, opts)?,
    };
    let comp = compensate(validation.0, validation.1, &result)?;
    result.validation = Some(comp.stats);
    Ok((result, comp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn derivative_of_constant_and_ramp() {
        let c = vec![4.2; 200];
        assert!(filtered_derivative(&c, 20.0, 1.0)
            .unwrap()
            .iter()
            .all(|v| v.abs() < 1e-9));
        let ramp: Vec<f64> = (0..400).map(|k| 3.0 * k as f64 / 20.0 - 7.0).collect();
        let d = filtered_derivative(&ramp, 20.0, 1.0).unwrap();
        for v in &d[40..360] {
            assert_relative_eq!(*v, 3.0, max_relative = 0.01);
        }
        let raw = filtered_derivative(&ramp, 20.0, f64::INFINITY).unwrap();
        assert!(raw.iter().all(|v| (v - 3.0).abs() < 1e-9));
        assert!(filtered_derivative(&[1.0], 20.0, 1.0).is_err());
        assert!(filtered_derivative(&[1.0, 2.0, 3.0], 20.0, 15.0).is_err());
    }

    #[test]
    fn derivative_attenuates_above_cutoff() {
        let f_s = 100.0;
        let sine = |f: f64| -> Vec<f64> { (0..4000).map(|k| (2.0 * PI * f * k as f64 / f_s).sin()).collect() };
        let peak = |x: &[f64]| x[1000..3000].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let lp = zero_phase_lowpass(&sine(5.0), f_s, 1.0).unwrap();
        assert!(20.0 * peak(&lp).log10() <= -20.0);
        let d = filtered_derivative(&sine(5.0), f_s, 1.0).unwrap();
        let d_raw = filtered_derivative(&sine(5.0), f_s, f64::INFINITY).unwrap();
        assert!(20.0 * (peak(&d) / peak(&d_raw)).log10() <= -20.0);
        let pass = zero_phase_lowpass(&sine(0.1), f_s, 1.0).unwrap();
        assert_relative_eq!(peak(&pass), 1.0, max_relative = 0.01);
    }

    #[test]
    fn least_squares_recovers_and_flags_rank() {
        let a = DMatrix::from_fn(50, 3, |i, j| {
            ((i + 1) as f64).powi(j as i32) * if j == 2 { 1e3 } else { 1.0 }
        });
        let x = DVector::from_vec(vec![1.0, -2.0, 0.5e-3]);
        let y = &a * &x;
        let (est, cond) = solve_least_squares(&a, &y).unwrap();
        assert_relative_eq!(est, x, max_relative = 1e-9);
        assert!(cond.is_finite() && cond > 1.0);

        let mut deficient = a.clone();
        let col = deficient.column(0).clone_owned() * 2.0;
        deficient.set_column(1, &col);
        match solve_least_squares(&deficient, &y) {
            Err(Error::Estimation { condition_number, .. }) => assert!(condition_number > CONDITION_LIMIT),
            other => panic!("{other:?}"),
        }
        assert!(solve_least_squares(&DMatrix::zeros(2, 3), &DVector::zeros(2)).is_err());
    }

    #[test]
    fn residual_stats() {
        let s = ResidualStats::from_residuals(&[1.0, 3.0]);
        assert_eq!((s.mean, s.std, s.max), (2.0, 1.0, 3.0));
        assert_eq!(ResidualStats::from_residuals(&[]), ResidualStats::default());
    }

    #[test]
    fn options_roundtrip_with_infinite_cutoff() {
        let o = FitOptions {
            derivative_cutoff: f64::INFINITY,
            ..Default::default()
        };
        let s = serde_json::to_string(&o).unwrap();
        assert!(s.contains("\"derivative_cutoff\":null"));
        assert_eq!(serde_json::from_str::<FitOptions>(&s).unwrap(), o);
        assert_eq!("ins".parse::<AttitudeSource>().unwrap(), AttitudeSource::Ins);
        assert_eq!("3d".parse::<ModelKind>().unwrap(), ModelKind::Vector3d);
        assert!("gps".parse::<AttitudeSource>().is_err());
    }
}
