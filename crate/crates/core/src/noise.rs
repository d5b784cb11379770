//! Coloured sensor noise synthesised in the frequency domain, and the
//! two-tap bandwidth filter shared by all sensor models.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Amplitude spectral density profile of a sensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    /// White floor, nT/√Hz.
    pub sigma_w: f64,
    /// 1/f corner, Hz.
    pub f_knee: f64,
    /// Spectral slope of the power spectrum below the knee.
    pub nu: f64,
    /// Low-frequency regulariser, Hz.
    pub epsilon_f: f64,
}

impl NoiseParams {
    pub fn new(sigma_w: f64, f_knee: f64, nu: f64) -> Self {
        Self {
            sigma_w,
            f_knee,
            nu,
            epsilon_f: 1e-6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_w > 0.0) || !(self.f_knee >= 0.0) || !(self.nu >= 0.0) || !(self.epsilon_f > 0.0) {
            return Err(Error::Argument(format!("invalid noise parameters {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandwidthParams {
    /// Sensor bandwidth, Hz.
    pub f_bw: f64,
    /// Sampling rate, Hz.
    pub f_s: f64,
}

/// `σ_w · ((f_knee / max(f, ε))^{ν/2} + 1)`
pub fn target_asd(f: f64, p: &NoiseParams) -> f64 {
    if p.f_knee == 0.0 {
        return p.sigma_w;
    }
    p.sigma_w * ((p.f_knee / f.max(p.epsilon_f)).powf(0.5 * p.nu) + 1.0)
}

/// Real noise series of length `n` whose one-sided ASD follows [`target_asd`].
///
/// Each positive-frequency bin is a circular complex Gaussian scaled by
/// `S(f_k)·√(f_s·n/2)`, negative frequencies are the conjugate mirror and DC is
/// zero. The regulariser is overridden with half the fundamental, `f_s/(2n)`.
pub fn synth_noise(p: &NoiseParams, n: usize, f_s: f64, seed: u64) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::Argument(format!("noise synthesis needs n >= 2, got {n}")));
    }
    if !(f_s > 0.0) {
        return Err(Error::Argument(format!("sampling rate must be positive, got {f_s}")));
    }
    p.validate()?;
    let params = NoiseParams {
        epsilon_f: 0.5 * f_s / n as f64,
        ..*p
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gauss = || -> f64 { StandardNormal.sample(&mut rng) };
    let gain = (f_s * n as f64 / 2.0).sqrt();
    let half = std::f64::consts::FRAC_1_SQRT_2;

    let mut spec = vec![Complex::new(0.0, 0.0); n];
    for k in 1..=n / 2 {
        let f = k as f64 * f_s / n as f64;
        let amp = target_asd(f, &params) * gain;
        if 2 * k == n {
            spec[k] = Complex::new(amp * gauss(), 0.0);
        } else {
            let z = Complex::new(gauss() * half, gauss() * half) * amp;
            spec[k] = z;
            spec[n - k] = z.conj();
        }
    }

    FftPlanner::new().plan_fft_inverse(n).process(&mut spec);
    let scale = 1.0 / n as f64;
    Ok(spec.into_iter().map(|c| c.re * scale).collect())
}

/// `β = 1 / (1 + f_s / (2π f_BW))`
pub fn smoothing_beta(b: &BandwidthParams) -> f64 {
    1.0 / (1.0 + b.f_s / (2.0 * std::f64::consts::PI * b.f_bw))
}

/// `y_t = β·x_t + (1 − β)·x_{t−1}`, with `x_{−1} = x_0`.
pub fn bandwidth_filter(x: &[f64], b: &BandwidthParams) -> Result<Vec<f64>> {
    let first = *x
        .first()
        .ok_or_else(|| Error::Argument("bandwidth filter on an empty series".into()))?;
    let beta = smoothing_beta(b);
    let mut prev = first;
    Ok(x.iter()
        .map(|&v| {
            let y = beta * v + (1.0 - beta) * prev;
            prev = v;
            y
        })
        .collect())
}

/// Magnitude response of [`bandwidth_filter`] at frequency `f`.
pub fn bandwidth_gain(f: f64, b: &BandwidthParams) -> f64 {
    let beta = smoothing_beta(b);
    let w = 2.0 * std::f64::consts::PI * f / b.f_s;
    (beta * beta + (1.0 - beta).powi(2) + 2.0 * beta * (1.0 - beta) * w.cos()).sqrt()
}
