//! Welch amplitude spectral density and overlapping Allan deviation.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};

/// A one-sided ASD (`x` = frequency, Hz) or an Allan deviation (`x` = τ, s).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralEstimate {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl SpectralEstimate {
    /// Linear interpolation of `y` at `x0`; `None` outside the grid.
    pub fn interpolate(&self, x0: f64) -> Option<f64> {
        let i = self.x.partition_point(|&v| v < x0);
        if i == 0 || i >= self.x.len() {
            return (self.x.first() == Some(&x0)).then(|| self.y[0]);
        }
        let (x1, x2) = (self.x[i - 1], self.x[i]);
        let w = (x0 - x1) / (x2 - x1);
        Some(self.y[i - 1] * (1.0 - w) + self.y[i] * w)
    }

    /// Points with `lo <= x <= hi`.
    pub fn band(&self, lo: f64, hi: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.x
            .iter()
            .zip(&self.y)
            .filter(move |(x, _)| **x >= lo && **x <= hi)
            .map(|(x, y)| (*x, *y))
    }
}

/// Segment length giving `segments` Hann segments at 50 % overlap.
pub fn default_segment_length(n: usize, segments: usize) -> usize {
    (2 * n / (segments + 1)).max(2)
}

fn hann(n: usize) -> Vec<f64> {
    // Periodic Hann, as used for spectral estimation.
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

/// Welch estimate of the one-sided ASD with a Hann window and per-segment
/// mean removal. `overlap` is a fraction in `[0, 1)`.
pub fn welch_asd(series: &[f64], f_s: f64, segment_length: usize, overlap: f64) -> Result<SpectralEstimate> {
    if segment_length < 2 || series.len() < 2 * segment_length {
        return Err(Error::Argument(format!(
            "welch needs at least two segments: {} samples, segment {segment_length}",
            series.len()
        )));
    }
    if !(0.0..1.0).contains(&overlap) || !(f_s > 0.0) {
        return Err(Error::Argument(format!("invalid overlap {overlap} or rate {f_s}")));
    }
    let window = hann(segment_length);
    let win_power: f64 = window.iter().map(|w| w * w).sum();
    let step = (((1.0 - overlap) * segment_length as f64).round() as usize).max(1);
    let fft = FftPlanner::new().plan_fft_forward(segment_length);
    let bins = segment_length / 2 + 1;
    let mut acc = vec![0.0; bins];
    let mut count = 0usize;
    let mut buf = vec![Complex::new(0.0, 0.0); segment_length];

    let mut start = 0;
    while start + segment_length <= series.len() {
        let seg = &series[start..start + segment_length];
        let mean = seg.iter().sum::<f64>() / segment_length as f64;
        for ((b, &v), &w) in buf.iter_mut().zip(seg).zip(&window) {
            *b = Complex::new((v - mean) * w, 0.0);
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
        count += 1;
        start += step;
    }

    let norm = 1.0 / (f_s * win_power * count as f64);
    let y = acc
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let one_sided = if k == 0 || (segment_length.is_multiple_of(2) && k == segment_length / 2) {
                1.0
            } else {
                2.0
            };
            (p * norm * one_sided).sqrt()
        })
        .collect();
    let x = (0..bins).map(|k| k as f64 * f_s / segment_length as f64).collect();
    Ok(SpectralEstimate { x, y })
}

/// Log-spaced averaging times between one sample and a third of the record.
pub fn log_tau_grid(n: usize, f_s: f64, per_decade: usize) -> Vec<f64> {
    let max_m = n / 3;
    let mut ms: Vec<usize> = Vec::new();
    let mut k = 0;
    loop {
        let m = 10f64.powf(k as f64 / per_decade as f64).round() as usize;
        if m > max_m {
            break;
        }
        if ms.last() != Some(&m) {
            ms.push(m);
        }
        k += 1;
    }
    ms.into_iter().map(|m| m as f64 / f_s).collect()
}

/// Overlapping Allan deviation of a sampled quantity at the given averaging
/// times. Each τ is rounded to a whole number of samples; the returned grid
/// holds the τ actually used.
pub fn allan_deviation(series: &[f64], f_s: f64, taus: &[f64]) -> Result<SpectralEstimate> {
    let n = series.len();
    if taus.is_empty() {
        return Err(Error::Argument("empty tau grid".into()));
    }
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for v in series {
        prefix.push(prefix.last().unwrap() + v);
    }

    let mut x = Vec::with_capacity(taus.len());
    let mut y = Vec::with_capacity(taus.len());
    let mut prev_m = 0usize;
    for &tau in taus {
        let m = (tau * f_s).round() as usize;
        if !(tau > 0.0) || m < 1 || m <= prev_m || tau > n as f64 / (3.0 * f_s) + 0.5 / f_s {
            return Err(Error::Argument(format!(
                "tau {tau} invalid for {n} samples at {f_s} Hz (grid must be increasing, 1/f_s <= tau <= n/(3 f_s))"
            )));
        }
        prev_m = m;
        let terms = n + 1 - 2 * m;
        let mut sum = 0.0;
        for j in 0..terms {
            // Difference of adjacent m-sample averages, times m.
            let d = (prefix[j + 2 * m] - prefix[j + m]) - (prefix[j + m] - prefix[j]);
            sum += d * d;
        }
        let avar = sum / (2.0 * (m * m) as f64 * terms as f64);
        x.push(m as f64 / f_s);
        y.push(avar.max(0.0).sqrt());
    }
    Ok(SpectralEstimate { x, y })
}

/// Least-squares slope of `log10 y` against `log10 x`.
pub fn log_log_slope(points: impl Iterator<Item = (f64, f64)>) -> f64 {
    let pts: Vec<(f64, f64)> = points
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.log10(), y.log10()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Ratio of an ASD estimate to a reference ASD, power-averaged over
/// log-spaced bands between `lo` and `hi`. Returns `(band centre, ratio)` for
/// every band holding at least one frequency bin.
pub fn log_band_ratios(
    est: &SpectralEstimate,
    reference: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    per_decade: usize,
) -> Vec<(f64, f64)> {
    let bands = ((hi / lo).log10() * per_decade as f64).ceil().max(1.0) as usize;
    let edge = |k: usize| (lo * 10f64.powf(k as f64 / per_decade as f64)).min(hi);
    (0..bands)
        .filter_map(|k| {
            let (a, b) = (edge(k), edge(k + 1));
            let (mut p_est, mut p_ref, mut count) = (0.0, 0.0, 0usize);
            for (f, y) in est.band(a, b).filter(|(f, _)| *f < b || b == hi) {
                p_est += y * y;
                p_ref += reference(f).powi(2);
                count += 1;
            }
            (count > 0 && p_ref > 0.0).then(|| ((a * b).sqrt(), (p_est / p_ref).sqrt()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    #[test]
    fn band_ratio_of_matching_profile_is_one() {
        let est = SpectralEstimate {
            x: (1..1000).map(|k| k as f64 * 0.1).collect(),
            y: (1..1000).map(|k| 2.0 / (k as f64 * 0.1).sqrt()).collect(),
        };
        let r = log_band_ratios(&est, |f| 1.0 / f.sqrt(), 1.0, 100.0, 5);
        assert_eq!(r.len(), 10);
        assert!(r.iter().all(|(_, v)| (v - 2.0).abs() < 1e-12));
    }

    use super::*;
    use crate::noise::{synth_noise, NoiseParams};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn white(n: usize, sigma: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                sigma * z
            })
            .collect()
    }

    #[test]
    fn zero_series_has_zero_asd() {
        let est = welch_asd(&vec![0.0; 4096], 20.0, 512, 0.5).unwrap();
        assert!(est.y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn too_short_series_is_rejected() {
        assert!(welch_asd(&vec![0.0; 100], 20.0, 64, 0.5).is_err());
    }

    #[test]
    fn sine_peak_matches_window_response() {
        let fs = 64.0;
        let seg = 1024;
        let k0 = 100;
        let f0 = k0 as f64 * fs / seg as f64;
        let amp = 2.0;
        let x: Vec<f64> = (0..seg * 8)
            .map(|i| amp * (2.0 * std::f64::consts::PI * f0 * i as f64 / fs).sin())
            .collect();
        let est = welch_asd(&x, fs, seg, 0.5).unwrap();
        let w = hann(seg);
        let sum_w: f64 = w.iter().sum();
        let sum_w2: f64 = w.iter().map(|v| v * v).sum();
        // |X_k0| = A/2 · Σw for a bin-centred sine.
        let expect = amp / 2.0 * sum_w * (2.0 / (fs * sum_w2)).sqrt();
        assert!((est.y[k0] / expect - 1.0).abs() < 1e-6, "{} vs {expect}", est.y[k0]);
        // Hann: (Σw)²/Σw² = 2N/3, so the peak is A·√(T/3).
        let t_seg = seg as f64 / fs;
        assert!((est.y[k0] / (amp * (t_seg / 3.0).sqrt()) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn white_noise_asd_level() {
        let fs = 20.0;
        let sigma_w = 0.4;
        let x = white(1 << 18, sigma_w * (fs / 2.0f64).sqrt(), 1);
        let est = welch_asd(&x, fs, default_segment_length(x.len(), 8), 0.5).unwrap();
        let mut vals: Vec<f64> = est.y[1..est.y.len() - 1].to_vec();
        vals.sort_by(f64::total_cmp);
        let median = vals[vals.len() / 2];
        assert!((median / sigma_w - 1.0).abs() < 0.1, "{median}");
    }

    #[test]
    fn parseval_consistency() {
        let fs = 50.0;
        let p = NoiseParams::new(0.1, 0.1, 1.0);
        let x = synth_noise(&p, 1 << 16, fs, 9).unwrap();
        let est = welch_asd(&x, fs, 4096, 0.5).unwrap();
        let df = est.x[1];
        let power: f64 = est.y.iter().map(|v| v * v * df).sum();
        let var = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
        assert!((power / var - 1.0).abs() < 0.05, "{power} vs {var}");
    }

    #[test]
    fn adev_of_constant_is_zero() {
        let est = allan_deviation(&vec![5.0; 3000], 10.0, &[0.1, 1.0, 10.0]).unwrap();
        assert!(est.y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn adev_of_linear_drift() {
        let fs = 10.0;
        let a = 0.3;
        let x: Vec<f64> = (0..5000).map(|i| a * i as f64 / fs).collect();
        let est = allan_deviation(&x, fs, &[0.1, 1.0, 25.0, 100.0]).unwrap();
        for (tau, adev) in est.x.iter().zip(&est.y) {
            let expect = a * tau / 2f64.sqrt();
            assert!((adev - expect).abs() <= 1e-9 * expect, "{adev} vs {expect}");
        }
    }

    #[test]
    fn adev_white_and_random_walk_slopes() {
        let fs = 10.0;
        let x = white(1 << 17, 1.0, 2);
        let taus = log_tau_grid(x.len(), fs, 8);
        let est = allan_deviation(&x, fs, &taus).unwrap();
        let slope = log_log_slope(est.band(1.0, 10.0));
        assert!((slope + 0.5).abs() < 0.05, "white slope {slope}");
        // White level: σ_w/√(2τ) with σ_w² = 2σ²/f_s.
        let sigma_w = (2.0 / fs).sqrt();
        let at1 = est.interpolate(1.0).unwrap();
        assert!((at1 / (sigma_w / 2f64.sqrt()) - 1.0).abs() < 0.05);

        let mut acc = 0.0;
        let rw: Vec<f64> = x
            .iter()
            .map(|v| {
                acc += v;
                acc
            })
            .collect();
        let est = allan_deviation(&rw, fs, &taus).unwrap();
        let slope = log_log_slope(est.band(1.0, 100.0));
        assert!((slope - 0.5).abs() < 0.1, "random walk slope {slope}");
    }

    #[test]
    fn adev_rejects_bad_grids() {
        let x = vec![0.0; 300];
        assert!(allan_deviation(&x, 10.0, &[]).is_err());
        assert!(allan_deviation(&x, 10.0, &[0.0]).is_err());
        assert!(allan_deviation(&x, 10.0, &[20.0]).is_err());
        assert!(allan_deviation(&x, 10.0, &[1.0, 0.5]).is_err());
    }
}
