//! Reference frames and attitude utilities.
//!
//! Earth frame is local NED, body frame is forward-right-down. Euler angles
//! follow the aerospace Z-Y-X (yaw, pitch, roll) sequence and a [`Rotation`]
//! maps body-frame vectors into the Earth frame.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Roll, pitch and yaw in radians.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EulerAttitude {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl EulerAttitude {
    pub fn new(roll: f64, pitch: f64, yaw: f64) -> Self {
        Self { roll, pitch, yaw }
    }

    pub fn is_finite(&self) -> bool {
        self.roll.is_finite() && self.pitch.is_finite() && self.yaw.is_finite()
    }
}

/// Orthonormal body-to-Earth rotation `R_eb`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Matrix3<f64>);

impl Rotation {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Wraps a matrix without checking orthonormality.
    pub fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Self(m)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn compose(&self, other: &Rotation) -> Self {
        Self(self.0 * other.0)
    }

    /// Body-frame vector expressed in the Earth frame.
    pub fn rotate_to_earth(&self, v_b: &Vector3<f64>) -> Vector3<f64> {
        self.0 * v_b
    }

    /// Maximum deviation of `R Rᵀ` from identity and of `det R` from one.
    pub fn orthonormality_error(&self) -> f64 {
        let gram = self.0 * self.0.transpose() - Matrix3::identity();
        gram.amax().max((self.0.determinant() - 1.0).abs())
    }

    /// Recovers Z-Y-X Euler angles. Ill-conditioned near |pitch| = π/2.
    pub fn to_euler(&self) -> EulerAttitude {
        let m = &self.0;
        let pitch = (-m[(2, 0)]).clamp(-1.0, 1.0).asin();
        let roll = m[(2, 1)].atan2(m[(2, 2)]);
        let yaw = m[(1, 0)].atan2(m[(0, 0)]);
        EulerAttitude { roll, pitch, yaw }
    }

    /// Small-angle perturbation `exp([δθ]×)` expressed as a rotation (Rodrigues).
    pub fn from_rotation_vector(phi: &Vector3<f64>) -> Self {
        let angle = phi.norm();
        let k = skew(phi);
        if angle < 1e-12 {
            return Self(Matrix3::identity() + k);
        }
        let a = angle.sin() / angle;
        let b = (1.0 - angle.cos()) / (angle * angle);
        Self(Matrix3::identity() + k * a + k * k * b)
    }
}

/// Cross-product matrix `[v]×`.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// `R_eb = Rz(yaw) · Ry(pitch) · Rx(roll)`.
pub fn euler_to_rotation(att: &EulerAttitude) -> Rotation {
    let (sr, cr) = att.roll.sin_cos();
    let (sp, cp) = att.pitch.sin_cos();
    let (sy, cy) = att.yaw.sin_cos();
    Rotation(Matrix3::new(
        cy * cp,
        cy * sp * sr - sy * cr,
        cy * sp * cr + sy * sr,
        sy * cp,
        sy * sp * sr + cy * cr,
        sy * sp * cr - cy * sr,
        -sp,
        cp * sr,
        cp * cr,
    ))
}

/// Earth-frame vector expressed in the body frame, `R_ebᵀ v_e`.
pub fn rotate_to_body(r_eb: &Rotation, v_e: &Vector3<f64>) -> Vector3<f64> {
    r_eb.0.tr_mul(v_e)
}

/// Body angular rate from Euler angles and their time derivatives.
pub fn body_rate(att: &EulerAttitude, rates: &EulerAttitude) -> Vector3<f64> {
    let (sr, cr) = att.roll.sin_cos();
    let (sp, cp) = att.pitch.sin_cos();
    Vector3::new(
        rates.roll - rates.yaw * sp,
        rates.pitch * cr + rates.yaw * cp * sr,
        -rates.pitch * sr + rates.yaw * cp * cr,
    )
}

/// Angle in `[0, π]` between two non-zero vectors.
pub fn angle_between(u: &Vector3<f64>, v: &Vector3<f64>) -> Result<f64> {
    if u.norm() == 0.0 || v.norm() == 0.0 {
        return Err(Error::Domain("angle between zero-length vectors".into()));
    }
    Ok(u.cross(v).norm().atan2(u.dot(v)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn rx(a: f64) -> Matrix3<f64> {
        Matrix3::new(1.0, 0.0, 0.0, 0.0, a.cos(), -a.sin(), 0.0, a.sin(), a.cos())
    }
    fn ry(a: f64) -> Matrix3<f64> {
        Matrix3::new(a.cos(), 0.0, a.sin(), 0.0, 1.0, 0.0, -a.sin(), 0.0, a.cos())
    }
    fn rz(a: f64) -> Matrix3<f64> {
        Matrix3::new(a.cos(), -a.sin(), 0.0, a.sin(), a.cos(), 0.0, 0.0, 0.0, 1.0)
    }

    #[test]
    fn zero_angles_give_identity() {
        let r = euler_to_rotation(&EulerAttitude::default());
        assert_eq!(*r.matrix(), Matrix3::identity());
    }

    #[test]
    fn pure_yaw_sends_body_x_to_earth_y() {
        let r = euler_to_rotation(&EulerAttitude::new(0.0, 0.0, FRAC_PI_2));
        let out = r.rotate_to_earth(&Vector3::x());
        assert_relative_eq!(out, Vector3::y(), epsilon = 1e-15);
    }

    #[test]
    fn matches_product_of_axis_rotations() {
        let att = EulerAttitude::new(0.1, 0.2, 0.3);
        let r = euler_to_rotation(&att);
        let brute = rz(0.3) * ry(0.2) * rx(0.1);
        assert_relative_eq!(*r.matrix(), brute, epsilon = 1e-15);
        assert!(r.orthonormality_error() < 1e-12);
    }

    #[test]
    fn rotate_to_body_cases() {
        let v = Vector3::new(50000.0, 0.0, 0.0);
        assert_eq!(rotate_to_body(&Rotation::identity(), &v), v);

        let r = euler_to_rotation(&EulerAttitude::new(0.0, 0.0, FRAC_PI_2));
        let out = rotate_to_body(&r, &Vector3::x());
        assert_relative_eq!(out, Vector3::new(0.0, -1.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn angle_between_cases() {
        let x = Vector3::x();
        assert_eq!(angle_between(&x, &x).unwrap(), 0.0);
        assert_relative_eq!(angle_between(&x, &Vector3::y()).unwrap(), FRAC_PI_2);
        assert_relative_eq!(
            angle_between(&x, &Vector3::new(1.0, 1.0, 0.0)).unwrap(),
            FRAC_PI_4,
            epsilon = 1e-12
        );
        assert!(angle_between(&x, &Vector3::zeros()).is_err());
    }

    #[test]
    fn rodrigues_matches_axis_rotation() {
        let r = Rotation::from_rotation_vector(&Vector3::new(0.0, 0.0, 0.4));
        assert_relative_eq!(*r.matrix(), rz(0.4), epsilon = 1e-14);
    }

    #[test]
    fn body_rate_pure_roll_and_yaw() {
        let att = EulerAttitude::default();
        let w = body_rate(&att, &EulerAttitude::new(0.1, 0.0, 0.0));
        assert_relative_eq!(w, Vector3::new(0.1, 0.0, 0.0));
        let w = body_rate(&att, &EulerAttitude::new(0.0, 0.0, 0.2));
        assert_relative_eq!(w, Vector3::new(0.0, 0.0, 0.2));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn vec3() -> impl Strategy<Value = Vector3<f64>> {
            (-1e5..1e5f64, -1e5..1e5f64, -1e5..1e5f64).prop_map(|(a, b, c)| Vector3::new(a, b, c))
        }

        proptest! {
            #[test]
            fn euler_round_trip(roll in -3.1..3.1f64, pitch in -1.5..1.5f64, yaw in -3.1..3.1f64) {
                let att = EulerAttitude::new(roll, pitch, yaw);
                let r = euler_to_rotation(&att);
                prop_assert!(r.orthonormality_error() < 1e-12);
                let back = r.to_euler();
                prop_assert!((back.roll - roll).abs() < 1e-9);
                prop_assert!((back.pitch - pitch).abs() < 1e-9);
                prop_assert!((back.yaw - yaw).abs() < 1e-9);
            }

            #[test]
            fn rotation_is_an_isometry(roll in -3.1..3.1f64, pitch in -1.5..1.5f64, yaw in -3.1..3.1f64, v in vec3()) {
                let r = euler_to_rotation(&EulerAttitude::new(roll, pitch, yaw));
                let vb = rotate_to_body(&r, &v);
                prop_assert!((vb.norm() - v.norm()).abs() <= 1e-9 * v.norm().max(1.0));
                let back = r.rotate_to_earth(&vb);
                prop_assert!((back - v).amax() <= 1e-12 * v.amax().max(1.0) * 10.0);
            }
        }
    }
}
