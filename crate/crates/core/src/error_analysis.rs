//! Closed-form calibration error bounds for the scalar and vector models,
//! with an exact vector-geometry oracle for each approximation.
//!
//! All angles are radians. The oracle places the background field, platform
//! field and proxy direction in one plane (the worst case for attitude error)
//! with the proxy rotated away from the platform field.

use nalgebra::Vector3;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorScenario {
    /// Platform field magnitude, nT.
    pub ba: f64,
    /// Background field magnitude, nT.
    pub be: f64,
    /// Angle between background and platform field, rad.
    pub theta: f64,
    /// Attitude error of the background proxy, rad.
    pub alpha: f64,
    /// Magnitude error of the background proxy, nT.
    pub delta_b: f64,
}

impl ErrorScenario {
    pub fn new(ba: f64, be: f64, theta: f64, alpha: f64, delta_b: f64) -> Result<Self> {
        let s = Self {
            ba,
            be,
            theta,
            alpha,
            delta_b,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.be > 0.0) {
            return Err(Error::Argument(format!(
                "background magnitude must be positive, got {}",
                self.be
            )));
        }
        if !(self.ba >= 0.0) {
            return Err(Error::Argument(format!(
                "platform magnitude must be non-negative, got {}",
                self.ba
            )));
        }
        if !(0.0..=std::f64::consts::PI).contains(&self.theta) {
            return Err(Error::Argument(format!("theta {} outside [0, π]", self.theta)));
        }
        if !(0.0..std::f64::consts::FRAC_PI_2).contains(&self.alpha) {
            return Err(Error::Argument(format!("alpha {} outside [0, π/2)", self.alpha)));
        }
        if !self.delta_b.is_finite() {
            return Err(Error::Argument("delta_b must be finite".into()));
        }
        Ok(())
    }
}

/// `sin θ` with exact zeros at the endpoints.
fn sin_clean(theta: f64) -> f64 {
    if theta == 0.0 || theta == std::f64::consts::PI {
        0.0
    } else {
        theta.sin()
    }
}

/// Second-order Taylor remainder of the scalar projection, `B_a²/(2B_e)·sin²θ`.
pub fn taylor_projection_error(s: &ErrorScenario) -> f64 {
    s.ba * s.ba / (2.0 * s.be) * sin_clean(s.theta).powi(2)
}

/// Scalar model error from using `B̂_t` as background direction, `B_a²/B_e·sin²θ`.
pub fn proxy_direction_error_scalar(s: &ErrorScenario) -> f64 {
    s.ba * s.ba / s.be * sin_clean(s.theta).powi(2)
}

/// Vector model error from forcing `B_a ∥ B_t`, leading order `B_a·sinθ`.
pub fn proxy_direction_error_vector(s: &ErrorScenario) -> f64 {
    s.ba * sin_clean(s.theta)
}

/// Vector proxy-direction error including the first correction,
/// `B_a·sinθ·(1 − (B_a/B_e)·cosθ)`.
pub fn proxy_direction_error_vector_corrected(s: &ErrorScenario) -> f64 {
    s.ba * sin_clean(s.theta) * (1.0 - s.ba / s.be * s.theta.cos())
}

/// Signed scalar model attitude error, `−B_a(α·sinθ − α²/2·cosθ)`.
pub fn scalar_attitude_error(s: &ErrorScenario) -> f64 {
    -s.ba * (s.alpha * sin_clean(s.theta) - 0.5 * s.alpha * s.alpha * s.theta.cos())
}

/// Vector model error magnitude, `√(δB² + (B_e·α)²)`.
pub fn vector_error_magnitude(s: &ErrorScenario) -> f64 {
    s.delta_b.hypot(s.be * s.alpha)
}

/// Exact counterparts of each closed-form error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExactErrors {
    /// `‖B_e + B_a‖ − (B_e + B_a·cosθ)`
    pub taylor_projection: f64,
    /// `B_a·B̂_t − B_a·B̂_e`
    pub proxy_scalar: f64,
    /// Component of `B_a` perpendicular to `B_t`.
    pub proxy_vector: f64,
    /// `B_a·B̂_e − B_a·r̂`
    pub scalar_attitude: f64,
    /// `‖B_e − (B_e + δB)·r̂‖`
    pub vector_attitude: f64,
}

/// Builds the coplanar vectors and evaluates every error exactly.
pub fn exact_vector_oracle(s: &ErrorScenario) -> ExactErrors {
    let be_vec = Vector3::new(s.be, 0.0, 0.0);
    let ba_vec = Vector3::new(s.ba * s.theta.cos(), s.ba * sin_clean(s.theta), 0.0);
    // Proxy direction tilted towards B_a, ∠(B_a, r̂) = θ − α. This is the
    // geometry whose expansion gives the signed closed form above.
    let r_hat = Vector3::new(s.alpha.cos(), s.alpha.sin(), 0.0);
    let bt_vec = be_vec + ba_vec;
    let bt_hat = bt_vec / bt_vec.norm();
    let be_hat = be_vec / s.be;

    ExactErrors {
        taylor_projection: bt_vec.norm() - (s.be + ba_vec.dot(&be_hat)),
        proxy_scalar: ba_vec.dot(&bt_hat) - ba_vec.dot(&be_hat),
        proxy_vector: ba_vec.cross(&bt_hat).norm(),
        scalar_attitude: ba_vec.dot(&be_hat) - ba_vec.dot(&r_hat),
        vector_attitude: (be_vec - r_hat * (s.be + s.delta_b)).norm(),
    }
}

/// One row of the error table for a single θ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorTableRow {
    pub theta: f64,
    pub taylor_projection: f64,
    pub proxy_scalar: f64,
    pub proxy_vector: f64,
    pub scalar_attitude: f64,
    pub vector_attitude: f64,
    pub exact: ExactErrors,
}

pub fn error_table(ba: f64, be: f64, alpha: f64, delta_b: f64, thetas: &[f64]) -> Result<Vec<ErrorTableRow>> {
    thetas
        .iter()
        .map(|&theta| {
            let s = ErrorScenario::new(ba, be, theta, alpha, delta_b)?;
            Ok(ErrorTableRow {
                theta,
                taylor_projection: taylor_projection_error(&s),
                proxy_scalar: proxy_direction_error_scalar(&s),
                proxy_vector: proxy_direction_error_vector(&s),
                scalar_attitude: scalar_attitude_error(&s),
                vector_attitude: vector_error_magnitude(&s),
                exact: exact_vector_oracle(&s),
            })
        })
        .collect()
}
