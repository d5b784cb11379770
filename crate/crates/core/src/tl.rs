//! Tolles-Lawson platform field model.
//!
//! The platform field is `B_a = p + N·B_e + E·Ḃ_e` in the body frame. Two
//! regressions are supported:
//!
//! * the scalar (1D) model, which fits the projection of `B_a` onto the
//!   background direction using 18 coefficients. Only the symmetric
//!   combinations of the induced matrix are observable in that projection, so
//!   `N` collapses to six upper-triangular terms (see [`reduce_induced`]);
//! * the vector (3D) model, which fits all 21 entries of `p`, `N` and `E`.

use nalgebra::{Matrix3, SMatrix, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCALAR_TERMS: usize = 18;
pub const VECTOR_TERMS: usize = 21;

/// Permanent, induced and eddy-current coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "FlatCoefficients", into = "FlatCoefficients")]
pub struct TlCoefficients {
    /// Permanent field, nT.
    pub p: Vector3<f64>,
    /// Induced matrix, dimensionless.
    pub n: Matrix3<f64>,
    /// Eddy-current matrix, seconds.
    pub e: Matrix3<f64>,
}

/// On-disk layout: `{"p": [3], "N": [9 row-major], "E": [9 row-major]}`.
#[derive(Serialize, Deserialize)]
struct FlatCoefficients {
    p: [f64; 3],
    #[serde(rename = "N")]
    n: [f64; 9],
    #[serde(rename = "E")]
    e: [f64; 9],
}

fn row_major(m: &Matrix3<f64>) -> [f64; 9] {
    let mut out = [0.0; 9];
    for i in 0..3 {
        for j in 0..3 {
            out[3 * i + j] = m[(i, j)];
        }
    }
    out
}

impl From<FlatCoefficients> for TlCoefficients {
    fn from(f: FlatCoefficients) -> Self {
        Self {
            p: Vector3::from(f.p),
            n: Matrix3::from_row_slice(&f.n),
            e: Matrix3::from_row_slice(&f.e),
        }
    }
}

impl From<TlCoefficients> for FlatCoefficients {
    fn from(c: TlCoefficients) -> Self {
        Self {
            p: c.p.into(),
            n: row_major(&c.n),
            e: row_major(&c.e),
        }
    }
}

impl TlCoefficients {
    pub fn zero() -> Self {
        Self {
            p: Vector3::zeros(),
            n: Matrix3::zeros(),
            e: Matrix3::zeros(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.p
            .iter()
            .chain(self.n.iter())
            .chain(self.e.iter())
            .all(|v| v.is_finite())
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            p: self.p * k,
            n: self.n * k,
            e: self.e * k,
        }
    }

    pub fn to_scalar_vector(&self) -> ScalarCoefficientVector {
        let mut x = [0.0; SCALAR_TERMS];
        x[..3].copy_from_slice(self.p.as_slice());
        x[3..9].copy_from_slice(&reduce_induced(&self.n));
        // Eddy columns are ordered Ḃ_j·B̂_i with j outer, which is E column-major.
        x[9..].copy_from_slice(self.e.as_slice());
        ScalarCoefficientVector(x)
    }

    pub fn to_vector_vector(&self) -> VectorCoefficientVector {
        let mut x = [0.0; VECTOR_TERMS];
        x[..3].copy_from_slice(self.p.as_slice());
        x[3..12].copy_from_slice(&row_major(&self.n));
        x[12..].copy_from_slice(&row_major(&self.e));
        VectorCoefficientVector(x)
    }
}

/// Coefficients of the scalar model: `[p₁..p₃, b₁..b₆, e₁..e₉]`.
///
/// `b` holds the reduced induced terms and `e` the eddy matrix in column-major
/// order, matching the column layout of [`scalar_regressor_row`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarCoefficientVector(pub [f64; SCALAR_TERMS]);

/// Coefficients of the vector model: `[p₁..p₃, N row-major, E row-major]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VectorCoefficientVector(pub [f64; VECTOR_TERMS]);

impl VectorCoefficientVector {
    pub fn to_coefficients(&self) -> TlCoefficients {
        let x = &self.0;
        TlCoefficients {
            p: Vector3::new(x[0], x[1], x[2]),
            n: Matrix3::from_row_slice(&x[3..12]),
            e: Matrix3::from_row_slice(&x[12..21]),
        }
    }
}

/// Field and its time derivative at one instant, body frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    /// nT
    pub b: Vector3<f64>,
    /// nT/s
    pub dbdt: Vector3<f64>,
    /// s
    pub t: f64,
}

impl FieldSample {
    pub fn new(b: Vector3<f64>, dbdt: Vector3<f64>, t: f64) -> Self {
        Self { b, dbdt, t }
    }
}

pub fn platform_field(c: &TlCoefficients, be_b: &Vector3<f64>, dbe_b: &Vector3<f64>) -> Vector3<f64> {
    c.p + c.n * be_b + c.e * dbe_b
}

pub fn total_field(be_b: &Vector3<f64>, ba_b: &Vector3<f64>) -> Vector3<f64> {
    be_b + ba_b
}

/// Upper-triangular reduction of the induced matrix for the scalar model:
/// `(β₁, β₂+β₄, β₃+β₇, β₅, β₆+β₈, β₉)` with β row-major.
pub fn reduce_induced(n: &Matrix3<f64>) -> [f64; 6] {
    [
        n[(0, 0)],
        n[(0, 1)] + n[(1, 0)],
        n[(0, 2)] + n[(2, 0)],
        n[(1, 1)],
        n[(1, 2)] + n[(2, 1)],
        n[(2, 2)],
    ]
}

/// One row of the scalar regression matrix.
pub fn scalar_regressor_row(s: &FieldSample) -> Result<[f64; SCALAR_TERMS]> {
    let norm = s.b.norm();
    if !(norm > 0.0) {
        return Err(Error::Domain("scalar regressor needs a non-zero field".into()));
    }
    let u = s.b / norm;
    let b = &s.b;
    let d = &s.dbdt;
    Ok([
        u.x,
        u.y,
        u.z,
        b.x * u.x,
        b.x * u.y,
        b.x * u.z,
        b.y * u.y,
        b.y * u.z,
        b.z * u.z,
        d.x * u.x,
        d.x * u.y,
        d.x * u.z,
        d.y * u.x,
        d.y * u.y,
        d.y * u.z,
        d.z * u.x,
        d.z * u.y,
        d.z * u.z,
    ])
}

/// Three stacked rows of the vector regression matrix for one sample.
pub fn vector_regressor_block(proxy: &FieldSample) -> SMatrix<f64, 3, VECTOR_TERMS> {
    let mut a = SMatrix::<f64, 3, VECTOR_TERMS>::zeros();
    for i in 0..3 {
        a[(i, i)] = 1.0;
        for j in 0..3 {
            a[(i, 3 + 3 * i + j)] = proxy.b[j];
            a[(i, 12 + 3 * i + j)] = proxy.dbdt[j];
        }
    }
    a
}

/// The two platform-field scenarios used in the study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    /// Small-UAV-like field: mean ≈ 63 nT, mean cos θ ≈ 0.27.
    Random,
    /// Large, mostly perpendicular field: mean ≈ 700 nT, mean cos θ ≈ 0.03.
    PerpendicularStress,
}

impl ScenarioKind {
    pub fn targets(&self) -> ScenarioTargets {
        match self {
            ScenarioKind::Random => ScenarioTargets {
                mean_norm: 63.0,
                mean_cos: 0.27,
                norm_range: (20.0, 150.0),
            },
            ScenarioKind::PerpendicularStress => ScenarioTargets {
                mean_norm: 700.0,
                mean_cos: 0.03,
                norm_range: (400.0, 1100.0),
            },
        }
    }
}

impl std::str::FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Self::Random),
            "perpendicular-stress" | "stress" => Ok(Self::PerpendicularStress),
            other => Err(Error::Config(format!("unknown scenario kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioTargets {
    pub mean_norm: f64,
    pub mean_cos: f64,
    /// Accepted `[min, max]` of ‖B_a‖ over the flight.
    pub norm_range: (f64, f64),
}

/// Platform-field statistics of a coefficient set over a flight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioStats {
    pub mean_norm: f64,
    pub min_norm: f64,
    pub max_norm: f64,
    /// Mean of cos ∠(B_e, B_a).
    pub mean_cos: f64,
}

pub fn scenario_stats(c: &TlCoefficients, field: &[FieldSample]) -> ScenarioStats {
    let mut sum = 0.0;
    let mut sum_cos = 0.0;
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    let mut n_cos = 0usize;
    for s in field {
        let ba = platform_field(c, &s.b, &s.dbdt);
        let norm = ba.norm();
        sum += norm;
        lo = lo.min(norm);
        hi = hi.max(norm);
        if norm > 0.0 && s.b.norm() > 0.0 {
            sum_cos += ba.dot(&s.b) / (norm * s.b.norm());
            n_cos += 1;
        }
    }
    let n = field.len().max(1) as f64;
    ScenarioStats {
        mean_norm: sum / n,
        min_norm: if field.is_empty() { 0.0 } else { lo },
        max_norm: hi,
        mean_cos: if n_cos > 0 { sum_cos / n_cos as f64 } else { 0.0 },
    }
}

const MAX_ATTEMPTS: u64 = 64;

/// Draws ground-truth coefficients whose platform field over `field` (the
/// background field seen along the calibration flight) hits the statistics
/// of `kind`.
///
/// Entries are drawn from signed uniform distributions with per-block
/// weights. The permanent vector is then shifted along the mean background
/// direction until the mean alignment matches, and the whole set is scaled to
/// the target mean magnitude. Draws whose magnitude range falls outside the
/// accepted band are rejected and redrawn on the next RNG stream.
pub fn generate_scenario_coefficients(kind: ScenarioKind, seed: u64, field: &[FieldSample]) -> Result<TlCoefficients> {
    if field.is_empty() {
        return Err(Error::Argument("scenario generation needs field samples".into()));
    }
    let targets = kind.targets();
    let b_rms = rms(field.iter().map(|s| s.b.norm()));
    let db_rms = rms(field.iter().map(|s| s.dbdt.norm())).max(1e-9);
    let mean_dir = field
        .iter()
        .fold(Vector3::zeros(), |acc, s| acc + s.b.normalize())
        .normalize();

    let mut last = None;
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(attempt);
        let base = draw_base(kind, &mut rng, b_rms, db_rms);

        let with_shift = |k: f64| TlCoefficients {
            p: base.p + mean_dir * k,
            ..base
        };
        let cos_at = |k: f64| scenario_stats(&with_shift(k), field).mean_cos - targets.mean_cos;

        let span = 100.0 * (base.p.norm() + base.n.norm() * b_rms + base.e.norm() * db_rms);
        let (mut lo, mut hi) = (-span, span);
        if cos_at(lo) > 0.0 || cos_at(hi) < 0.0 {
            last = Some("alignment target not bracketed".to_string());
            continue;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if cos_at(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let shifted = with_shift(0.5 * (lo + hi));
        let stats = scenario_stats(&shifted, field);
        let coeffs = shifted.scaled(targets.mean_norm / stats.mean_norm);
        let stats = scenario_stats(&coeffs, field);
        let (min_ok, max_ok) = targets.norm_range;
        if stats.min_norm >= min_ok && stats.max_norm <= max_ok {
            return Ok(coeffs);
        }
        last = Some(format!(
            "magnitude range [{:.1}, {:.1}] nT outside [{min_ok}, {max_ok}]",
            stats.min_norm, stats.max_norm
        ));
    }
    Err(Error::Generation(format!(
        "{kind:?} targets unreachable after {MAX_ATTEMPTS} draws: {}",
        last.unwrap_or_default()
    )))
}

fn rms(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v * v, n + 1));
    (sum / n.max(1) as f64).sqrt()
}

fn draw_base(kind: ScenarioKind, rng: &mut ChaCha8Rng, b_rms: f64, db_rms: f64) -> TlCoefficients {
    let mut uniform = |w: f64| rng.random_range(-1.0..1.0) * w;
    match kind {
        ScenarioKind::Random => {
            let p = Vector3::from_fn(|_, _| uniform(1.0));
            let n = Matrix3::from_fn(|_, _| uniform(0.6 / b_rms));
            let e = Matrix3::from_fn(|_, _| uniform(0.1 / db_rms));
            TlCoefficients { p, n, e }
        }
        ScenarioKind::PerpendicularStress => {
            let sign = if uniform(1.0) >= 0.0 { 1.0 } else { -1.0 };
            let p = Vector3::new(uniform(0.1), sign * (1.0 + uniform(0.2)), uniform(0.1));
            let n = Matrix3::from_fn(|i, _| {
                if i == 1 {
                    uniform(0.5 / b_rms)
                } else {
                    uniform(0.05 / b_rms)
                }
            });
            let e = Matrix3::from_fn(|_, _| uniform(0.05 / db_rms));
            TlCoefficients { p, n, e }
        }
    }
}
