//! Calibration and validation trajectories, sensor temperature, INS attitude
//! drift and the clean onboard magnetic signals.

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::Path;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::{body_rate, euler_to_rotation, rotate_to_body, EulerAttitude, Rotation};
use crate::seed::derive_seed;
use crate::tl::{platform_field, FieldSample, TlCoefficients};

/// Standard gravity, m/s².
pub const GRAVITY: f64 = 9.80665;
/// Default onboard sampling rate, Hz.
pub const F_S: f64 = 20.0;
/// Sensor housing thermal time constant, s.
pub const THERMAL_TAU: f64 = 300.0;
/// Background field magnitude, nT.
pub const BE_MAGNITUDE: f64 = 50000.0;

const DEG: f64 = PI / 180.0;

/// Uniform background field in NED from magnitude (nT), inclination and
/// declination (rad).
pub fn background_field(magnitude: f64, inclination: f64, declination: f64) -> Vector3<f64> {
    let (si, ci) = inclination.sin_cos();
    let (sd, cd) = declination.sin_cos();
    Vector3::new(ci * cd, ci * sd, si) * magnitude
}

/// 50000 nT at 70° inclination, 0° declination.
pub fn default_background_field() -> Vector3<f64> {
    background_field(BE_MAGNITUDE, 70.0 * DEG, 0.0)
}

/// Altitude `base + amplitude·sin(2πt/period) + climb·t/T` over a flight of length `T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AltitudeProfile {
    /// m
    pub base: f64,
    /// m
    pub amplitude: f64,
    /// s
    pub period: f64,
    /// Total altitude change over the flight, m.
    pub climb: f64,
}

impl Default for AltitudeProfile {
    fn default() -> Self {
        Self {
            base: 300.0,
            amplitude: 50.0,
            period: 600.0,
            climb: 0.0,
        }
    }
}

impl AltitudeProfile {
    pub fn at(&self, t: f64, total: f64) -> f64 {
        let osc = if self.period > 0.0 {
            self.amplitude * (2.0 * PI * t / self.period).sin()
        } else {
            0.0
        };
        self.base + osc + self.climb * t / total.max(f64::MIN_POSITIVE)
    }

    fn validate(&self) -> Result<()> {
        if !(self.base.is_finite() && self.amplitude.is_finite() && self.climb.is_finite() && self.period >= 0.0) {
            return Err(Error::Config(format!("invalid altitude profile {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExcitationAxis {
    Roll,
    Pitch,
}

/// One two-lobe (doublet) attitude excitation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Excitation {
    pub axis: ExcitationAxis,
    /// s
    pub start: f64,
    /// s, both lobes
    pub duration: f64,
    /// Signed peak of the first and second lobe, rad.
    pub lobes: (f64, f64),
}

impl Excitation {
    /// Angle and rate at time `t`; zero outside the burst.
    fn eval(&self, t: f64) -> (f64, f64) {
        let half = 0.5 * self.duration;
        let u = t - self.start;
        if !(0.0..self.duration).contains(&u) {
            return (0.0, 0.0);
        }
        let (amp, v) = if u < half {
            (self.lobes.0, u)
        } else {
            (self.lobes.1, u - half)
        };
        let w = PI / half;
        let s = (w * v).sin();
        (amp * s * s, amp * w * (2.0 * w * v).sin())
    }
}

/// Calibration flight: repeated square laps with left coordinated turns and
/// roll/pitch doublets on every straight leg.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationConfig {
    /// Hz
    pub f_s: f64,
    /// m/s
    pub speed: f64,
    pub laps: usize,
    /// Duration of one side of the square including its turn, s.
    pub leg_duration: f64,
    /// s
    pub turn_duration: f64,
    /// Lower/upper roll envelope, degrees.
    pub roll_envelope_deg: (f64, f64),
    /// Pitch envelope magnitude, degrees.
    pub pitch_limit_deg: f64,
    /// Range of the downward roll lobe magnitude, degrees.
    pub roll_down_deg: (f64, f64),
    /// Range of the upward roll lobe magnitude, degrees.
    pub roll_up_deg: (f64, f64),
    /// Range of the pitch lobe magnitude, degrees.
    pub pitch_deg: (f64, f64),
    /// s
    pub roll_burst: f64,
    /// s
    pub pitch_burst: f64,
    /// Bursts flown on each straight leg, in order.
    pub schedule: Vec<ExcitationAxis>,
    pub altitude: AltitudeProfile,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            f_s: F_S,
            speed: 60.0,
            laps: 5,
            leg_duration: 33.0,
            turn_duration: 15.0,
            roll_envelope_deg: (-55.0, 15.0),
            pitch_limit_deg: 10.0,
            roll_down_deg: (35.0, 55.0),
            roll_up_deg: (5.0, 15.0),
            pitch_deg: (5.0, 10.0),
            roll_burst: 8.0,
            pitch_burst: 6.0,
            schedule: vec![ExcitationAxis::Roll, ExcitationAxis::Pitch],
            altitude: AltitudeProfile::default(),
        }
    }
}

impl CalibrationConfig {
    pub fn duration(&self) -> f64 {
        self.laps as f64 * 4.0 * self.leg_duration
    }

    /// Peak bank angle of the coordinated 90° turn, rad (negative: left).
    pub fn peak_turn_bank(&self) -> f64 {
        let peak_rate = 2.0 * FRAC_PI_2 / self.turn_duration;
        -(self.speed * peak_rate / GRAVITY).atan()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(format!("calibration trajectory: {msg}")));
        if !(self.f_s > 0.0 && self.speed > 0.0 && self.laps > 0 && self.turn_duration > 0.0) {
            return bad("f_s, speed, laps and turn_duration must be positive".into());
        }
        let (lo, hi) = self.roll_envelope_deg;
        if !(lo < 0.0 && hi > 0.0 && lo >= -90.0 && hi <= 90.0) {
            return bad(format!("roll envelope [{lo}, {hi}] deg must bracket zero within ±90"));
        }
        if !(self.pitch_limit_deg > 0.0 && self.pitch_limit_deg < 90.0) {
            return bad("pitch limit must lie in (0, 90) deg".into());
        }
        let within = |r: (f64, f64), max: f64| r.0 >= 0.0 && r.0 <= r.1 && r.1 <= max;
        if !within(self.roll_down_deg, -lo)
            || !within(self.roll_up_deg, hi)
            || !within(self.pitch_deg, self.pitch_limit_deg)
        {
            return bad("excitation amplitudes exceed the attitude envelope".into());
        }
        if self.peak_turn_bank() < lo * DEG {
            return bad(format!(
                "turn bank {:.1} deg exceeds the roll envelope; lengthen the turn",
                self.peak_turn_bank() / DEG
            ));
        }
        let bursts: f64 = self
            .schedule
            .iter()
            .map(|a| match a {
                ExcitationAxis::Roll => self.roll_burst,
                ExcitationAxis::Pitch => self.pitch_burst,
            })
            .sum();
        let gaps = (self.schedule.len() + 1) as f64;
        if self.roll_burst <= 0.0 || self.pitch_burst <= 0.0 || self.turn_duration + bursts + gaps > self.leg_duration {
            return bad("turn and bursts do not fit into one leg".into());
        }
        self.altitude.validate()
    }
}

/// Validation flight: parallel survey lines joined by alternating 180° turns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidationConfig {
    /// Hz
    pub f_s: f64,
    /// m/s
    pub speed: f64,
    pub lines: usize,
    /// s
    pub line_duration: f64,
    /// s
    pub turn_duration: f64,
    /// Heading of the first line, degrees.
    pub heading_deg: f64,
    /// Standard deviation of the smooth attitude wobble, degrees.
    pub wobble_deg: f64,
    pub altitude: AltitudeProfile,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            f_s: F_S,
            speed: 60.0,
            lines: 12,
            line_duration: 230.0,
            turn_duration: 60.0,
            heading_deg: 0.0,
            wobble_deg: 0.5,
            altitude: AltitudeProfile {
                amplitude: 20.0,
                ..AltitudeProfile::default()
            },
        }
    }
}

impl ValidationConfig {
    pub fn duration(&self) -> f64 {
        self.lines as f64 * (self.line_duration + self.turn_duration)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f_s > 0.0
            && self.speed > 0.0
            && self.lines > 0
            && self.line_duration > 0.0
            && self.turn_duration > 0.0)
        {
            return Err(Error::Config(
                "validation trajectory: durations, speed and line count must be positive".into(),
            ));
        }
        if !(self.wobble_deg >= 0.0 && self.wobble_deg < 10.0) {
            return Err(Error::Config(
                "validation trajectory: wobble must lie in [0, 10) deg".into(),
            ));
        }
        self.altitude.validate()
    }
}

/// Time-indexed flight path at a fixed sampling rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub f_s: f64,
    pub t: Vec<f64>,
    /// NED position, m.
    pub position: Vec<Vector3<f64>>,
    /// m
    pub altitude: Vec<f64>,
    pub attitude: Vec<EulerAttitude>,
    /// Time derivatives of the Euler angles, rad/s.
    pub euler_rates: Vec<EulerAttitude>,
    pub rotation: Vec<Rotation>,
    /// True on straight (non-turning) segments.
    pub straight: Vec<bool>,
    pub excitations: Vec<Excitation>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.len() as f64 / self.f_s
    }

    fn build(
        f_s: f64,
        total: f64,
        speed: f64,
        altitude: &AltitudeProfile,
        excitations: Vec<Excitation>,
        mut attitude_at: impl FnMut(f64) -> (EulerAttitude, EulerAttitude, bool),
    ) -> Self {
        let n = (total * f_s).round() as usize;
        let dt = 1.0 / f_s;
        let mut traj = Trajectory {
            f_s,
            t: Vec::with_capacity(n),
            position: Vec::with_capacity(n),
            altitude: Vec::with_capacity(n),
            attitude: Vec::with_capacity(n),
            euler_rates: Vec::with_capacity(n),
            rotation: Vec::with_capacity(n),
            straight: Vec::with_capacity(n),
            excitations,
        };
        let mut horizontal = Vector3::zeros();
        for k in 0..n {
            let t = k as f64 * dt;
            let (att, rates, straight) = attitude_at(t);
            let h = altitude.at(t, total);
            if k > 0 {
                let yaw = traj.attitude[k - 1].yaw;
                horizontal += Vector3::new(yaw.cos(), yaw.sin(), 0.0) * speed * dt;
            }
            traj.t.push(t);
            traj.position.push(Vector3::new(horizontal.x, horizontal.y, -h));
            traj.altitude.push(h);
            traj.rotation.push(euler_to_rotation(&att));
            traj.attitude.push(att);
            traj.euler_rates.push(rates);
            traj.straight.push(straight);
        }
        traj
    }

    /// Trajectory from sampled attitude and altitude; Euler rates come from
    /// central differences (one-sided at the ends) of the unwrapped angles.
    pub fn from_samples(t: Vec<f64>, attitude: Vec<EulerAttitude>, altitude: Vec<f64>) -> Result<Self> {
        let n = t.len();
        if n < 2 || attitude.len() != n || altitude.len() != n {
            return Err(Error::Argument(
                "trajectory needs ≥ 2 samples with matching columns".into(),
            ));
        }
        let dt = (t[n - 1] - t[0]) / (n - 1) as f64;
        if !(dt > 0.0) || t.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-6 * dt.max(1.0)) {
            return Err(Error::Argument(
                "trajectory time column must be uniformly sampled".into(),
            ));
        }
        let unwrap = |get: fn(&EulerAttitude) -> f64| -> Vec<f64> {
            let mut out = Vec::with_capacity(n);
            let mut offset = 0.0;
            for k in 0..n {
                if k > 0 {
                    let d = get(&attitude[k]) - get(&attitude[k - 1]);
                    offset -= 2.0 * PI * (d / (2.0 * PI)).round();
                }
                out.push(get(&attitude[k]) + offset);
            }
            out
        };
        let series = [unwrap(|a| a.roll), unwrap(|a| a.pitch), unwrap(|a| a.yaw)];
        let diff = |x: &[f64], k: usize| match k {
            0 => (x[1] - x[0]) / dt,
            k if k == n - 1 => (x[k] - x[k - 1]) / dt,
            k => (x[k + 1] - x[k - 1]) / (2.0 * dt),
        };
        let rates = (0..n)
            .map(|k| EulerAttitude::new(diff(&series[0], k), diff(&series[1], k), diff(&series[2], k)))
            .collect();
        let position = altitude.iter().map(|&h| Vector3::new(0.0, 0.0, -h)).collect();
        Ok(Trajectory {
            f_s: 1.0 / dt,
            rotation: attitude.iter().map(euler_to_rotation).collect(),
            t,
            position,
            altitude,
            attitude,
            euler_rates: rates,
            straight: vec![true; n],
            excitations: Vec::new(),
        })
    }

    /// Reads a CSV with header columns `t, roll, pitch, yaw, altitude`
    /// (seconds, radians, meters).
    pub fn read_csv(path: &Path) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            t: f64,
            roll: f64,
            pitch: f64,
            yaw: f64,
            altitude: f64,
        }
        let mut reader = csv::Reader::from_path(path)?;
        let (mut t, mut att, mut alt) = (Vec::new(), Vec::new(), Vec::new());
        for row in reader.deserialize() {
            let r: Row = row?;
            t.push(r.t);
            att.push(EulerAttitude::new(r.roll, r.pitch, r.yaw));
            alt.push(r.altitude);
        }
        Self::from_samples(t, att, alt)
    }

    /// Writes one row per sample: time, NED position, altitude, Euler angles
    /// and their rates (seconds, meters, radians, rad/s).
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "t",
            "north",
            "east",
            "down",
            "altitude",
            "roll",
            "pitch",
            "yaw",
            "roll_rate",
            "pitch_rate",
            "yaw_rate",
        ])?;
        for k in 0..self.len() {
            let (p, a, r) = (self.position[k], self.attitude[k], self.euler_rates[k]);
            let row = [
                self.t[k],
                p.x,
                p.y,
                p.z,
                self.altitude[k],
                a.roll,
                a.pitch,
                a.yaw,
                r.roll,
                r.pitch,
                r.yaw,
            ];
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Smooth heading change of `delta` over `duration`: returns angle offset,
/// rate and acceleration at `u ∈ [0, 1]`.
fn smooth_turn(delta: f64, duration: f64, u: f64) -> (f64, f64, f64) {
    let w = 2.0 * PI * u;
    (
        delta * (u - w.sin() / (2.0 * PI)),
        delta / duration * (1.0 - w.cos()),
        delta / (duration * duration) * 2.0 * PI * w.sin(),
    )
}

/// Coordinated bank angle and its rate for a yaw rate and acceleration.
fn coordinated_bank(speed: f64, yaw_rate: f64, yaw_acc: f64) -> (f64, f64) {
    let k = speed / GRAVITY;
    let x = k * yaw_rate;
    (x.atan(), k * yaw_acc / (1.0 + x * x))
}

fn uniform_deg(rng: &mut ChaCha8Rng, range: (f64, f64)) -> f64 {
    if range.1 > range.0 {
        rng.random_range(range.0..range.1) * DEG
    } else {
        range.0 * DEG
    }
}

/// Square calibration pattern: `laps` counter-clockwise squares, every leg
/// opening with a 90° left turn followed by the scheduled doublets.
pub fn gen_calibration_trajectory(cfg: &CalibrationConfig, seed: u64) -> Result<Trajectory> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x6361_6c69));
    let legs = cfg.laps * 4;
    let mut excitations = Vec::new();
    for leg in 0..legs {
        let leg_start = leg as f64 * cfg.leg_duration;
        let bursts: Vec<f64> = cfg
            .schedule
            .iter()
            .map(|a| match a {
                ExcitationAxis::Roll => cfg.roll_burst,
                ExcitationAxis::Pitch => cfg.pitch_burst,
            })
            .collect();
        let straight = cfg.leg_duration - cfg.turn_duration;
        let gap = (straight - bursts.iter().sum::<f64>()) / (bursts.len() + 1) as f64;
        let mut start = leg_start + cfg.turn_duration + gap;
        for (axis, duration) in cfg.schedule.iter().zip(bursts) {
            let lobes = match axis {
                ExcitationAxis::Roll => (
                    -uniform_deg(&mut rng, cfg.roll_down_deg),
                    uniform_deg(&mut rng, cfg.roll_up_deg),
                ),
                ExcitationAxis::Pitch => {
                    let a = uniform_deg(&mut rng, cfg.pitch_deg);
                    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                    (sign * a, -sign * a)
                }
            };
            excitations.push(Excitation {
                axis: *axis,
                start,
                duration,
                lobes,
            });
            start += duration + gap;
        }
    }

    let bursts = excitations.clone();
    let attitude_at = |t: f64| {
        let leg = ((t / cfg.leg_duration).floor() as usize).min(legs - 1);
        let tau = t - leg as f64 * cfg.leg_duration;
        let mut yaw = -(leg as f64) * FRAC_PI_2;
        let (mut roll, mut pitch, mut roll_rate, mut pitch_rate, mut yaw_rate) = (0.0, 0.0, 0.0, 0.0, 0.0);
        let turning = tau < cfg.turn_duration;
        if turning {
            let (dpsi, rate, acc) = smooth_turn(-FRAC_PI_2, cfg.turn_duration, tau / cfg.turn_duration);
            yaw += dpsi;
            yaw_rate = rate;
            (roll, roll_rate) = coordinated_bank(cfg.speed, rate, acc);
        } else {
            yaw -= FRAC_PI_2;
            for b in bursts.iter().filter(|b| t >= b.start && t < b.start + b.duration) {
                let (angle, rate) = b.eval(t);
                match b.axis {
                    ExcitationAxis::Roll => (roll, roll_rate) = (angle, rate),
                    ExcitationAxis::Pitch => (pitch, pitch_rate) = (angle, rate),
                }
            }
        }
        (
            EulerAttitude::new(roll, pitch, wrap(yaw)),
            EulerAttitude::new(roll_rate, pitch_rate, yaw_rate),
            !turning,
        )
    };
    Ok(Trajectory::build(
        cfg.f_s,
        cfg.duration(),
        cfg.speed,
        &cfg.altitude,
        excitations,
        attitude_at,
    ))
}

/// Smooth seeded wobble: a few incommensurate sinusoids per axis scaled to a
/// target standard deviation.
struct Wobble {
    terms: [Vec<(f64, f64, f64)>; 3],
}

impl Wobble {
    fn new(rng: &mut ChaCha8Rng, sigma: f64) -> Self {
        let mut axis = |scale: f64| -> Vec<(f64, f64, f64)> {
            const TERMS: usize = 4;
            // Each sinusoid of amplitude a contributes a²/2 to the variance.
            let amp = sigma * scale * (2.0 / TERMS as f64).sqrt();
            (0..TERMS)
                .map(|_| {
                    (
                        amp,
                        2.0 * PI * rng.random_range(0.02..0.2),
                        rng.random_range(0.0..2.0 * PI),
                    )
                })
                .collect()
        };
        Self {
            terms: [axis(1.0), axis(0.6), axis(0.4)],
        }
    }

    fn eval(&self, i: usize, t: f64) -> (f64, f64) {
        self.terms[i].iter().fold((0.0, 0.0), |(x, dx), &(a, w, ph)| {
            (x + a * (w * t + ph).sin(), dx + a * w * (w * t + ph).cos())
        })
    }
}

/// Survey pattern: straight lines joined by 180° turns of alternating sense,
/// with a small smooth attitude wobble throughout.
pub fn gen_validation_trajectory(cfg: &ValidationConfig, seed: u64) -> Result<Trajectory> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x7661_6c69));
    let wobble = Wobble::new(&mut rng, cfg.wobble_deg * DEG);
    let period = cfg.line_duration + cfg.turn_duration;
    let heading0 = cfg.heading_deg * DEG;
    let attitude_at = |t: f64| {
        let line = ((t / period).floor() as usize).min(cfg.lines - 1);
        let tau = t - line as f64 * period;
        let base = heading0 + if line.is_multiple_of(2) { 0.0 } else { PI };
        let (mut roll, mut roll_rate, mut yaw, mut yaw_rate) = (0.0, 0.0, base, 0.0);
        let turning = tau >= cfg.line_duration;
        if turning {
            let sense = if line.is_multiple_of(2) { 1.0 } else { -1.0 };
            let u = (tau - cfg.line_duration) / cfg.turn_duration;
            let (dpsi, rate, acc) = smooth_turn(sense * PI, cfg.turn_duration, u);
            yaw += dpsi;
            yaw_rate = rate;
            (roll, roll_rate) = coordinated_bank(cfg.speed, rate, acc);
        }
        let (wr, dwr) = wobble.eval(0, t);
        let (wp, dwp) = wobble.eval(1, t);
        let (wy, dwy) = wobble.eval(2, t);
        (
            EulerAttitude::new(roll + wr, wp, wrap(yaw + wy)),
            EulerAttitude::new(roll_rate + dwr, dwp, yaw_rate + dwy),
            !turning,
        )
    };
    Ok(Trajectory::build(
        cfg.f_s,
        cfg.duration(),
        cfg.speed,
        &cfg.altitude,
        Vec::new(),
        attitude_at,
    ))
}

fn wrap(angle: f64) -> f64 {
    let a = (angle + PI).rem_euclid(2.0 * PI) - PI;
    if a == -PI {
        PI
    } else {
        a
    }
}

/// Ambient temperature of the standard atmosphere at altitude `h` (m), °C.
pub fn ambient_temperature(h: f64) -> f64 {
    20.0 - 0.0065 * h
}

/// Sensor temperature through a first-order lag of time constant `tau` (s)
/// behind the altitude-driven ambient temperature, starting in equilibrium.
/// The lag is integrated exactly for a piecewise-constant input.
pub fn sensor_temperature(altitude: &[f64], f_s: f64, tau: f64) -> Vec<f64> {
    let Some(&h0) = altitude.first() else {
        return Vec::new();
    };
    let decay = if tau > 0.0 { (-1.0 / (f_s * tau)).exp() } else { 0.0 };
    let mut temp = ambient_temperature(h0);
    altitude
        .iter()
        .map(|&h| {
            let amb = ambient_temperature(h);
            temp = amb + (temp - amb) * decay;
            temp
        })
        .collect()
}

/// Initial state of the gyro bias process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialBias {
    /// Bias starts at zero (estimated during alignment) and wanders from there.
    #[default]
    Zero,
    /// Bias drawn from the stationary Gauss-Markov distribution.
    Stationary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GyroErrorParams {
    /// Angular random walk, rad/√s.
    pub arw: f64,
    /// Gauss-Markov bias standard deviation, rad/s.
    pub bias_sigma: f64,
    /// Gauss-Markov correlation time, s.
    pub bias_tau: f64,
    pub initial_bias: InitialBias,
}

impl Default for GyroErrorParams {
    fn default() -> Self {
        Self::tactical()
    }
}

impl GyroErrorParams {
    /// Tactical-grade INS.
    pub fn tactical() -> Self {
        Self {
            arw: 3.6e-5,
            bias_sigma: 4.8e-6,
            bias_tau: 3600.0,
            initial_bias: InitialBias::Zero,
        }
    }

    /// Error-free attitude reference.
    pub fn none() -> Self {
        Self {
            arw: 0.0,
            bias_sigma: 0.0,
            ..Self::tactical()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.arw >= 0.0 && self.bias_sigma >= 0.0 && self.bias_tau > 0.0) {
            return Err(Error::Config(format!("invalid gyro parameters {self:?}")));
        }
        Ok(())
    }
}

/// Per-axis attitude error `δθ(t) = ∫ (b + w) dt` with white rate noise of
/// density `arw` and a first-order Gauss-Markov bias `b`.
pub fn gyro_attitude_error(p: &GyroErrorParams, n: usize, f_s: f64, seed: u64) -> Result<Vec<Vector3<f64>>> {
    p.validate()?;
    if n == 0 {
        return Err(Error::Argument("gyro error series needs n ≥ 1".into()));
    }
    let dt = 1.0 / f_s;
    let phi = (-dt / p.bias_tau).exp();
    let drive = p.bias_sigma * (1.0 - phi * phi).sqrt();
    let walk = p.arw * dt.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x6779_726f));
    let mut gauss = || -> f64 { StandardNormal.sample(&mut rng) };

    let mut bias = match p.initial_bias {
        InitialBias::Zero => Vector3::zeros(),
        InitialBias::Stationary => Vector3::new(gauss(), gauss(), gauss()) * p.bias_sigma,
    };
    let mut angle = Vector3::zeros();
    let mut out = Vec::with_capacity(n);
    out.push(angle);
    for _ in 1..n {
        let w = Vector3::new(gauss(), gauss(), gauss());
        angle += bias * dt + w * walk;
        let z = Vector3::new(gauss(), gauss(), gauss());
        bias = bias * phi + z * drive;
        out.push(angle);
    }
    Ok(out)
}

/// Clean and reference signals along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct OnboardSignals {
    pub f_s: f64,
    pub t: Vec<f64>,
    /// Background field in NED, nT.
    pub be_e: Vector3<f64>,
    /// True background field in the body frame, nT.
    pub be_b: Vec<Vector3<f64>>,
    /// Analytic time derivative of `be_b`, nT/s.
    pub dbe_b: Vec<Vector3<f64>>,
    /// Platform field, nT.
    pub ba_b: Vec<Vector3<f64>>,
    /// Total field in the body frame, nT.
    pub bt_b: Vec<Vector3<f64>>,
    /// Scalar total field, nT.
    pub bt: Vec<f64>,
    /// Internal sensor temperature, °C.
    pub t_sensor: Vec<f64>,
    pub r_eb: Vec<Rotation>,
    /// INS-estimated rotation.
    pub r_hat_eb: Vec<Rotation>,
}

impl OnboardSignals {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Background field samples (field and derivative) along the flight.
    pub fn background_samples(&self) -> Vec<FieldSample> {
        (0..self.len())
            .map(|k| FieldSample::new(self.be_b[k], self.dbe_b[k], self.t[k]))
            .collect()
    }

    /// Writes one row per sample with the body-frame field components,
    /// scalar field, sensor temperature and INS Euler angles.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "t",
            "be_x",
            "be_y",
            "be_z",
            "dbe_x",
            "dbe_y",
            "dbe_z",
            "ba_x",
            "ba_y",
            "ba_z",
            "bt_x",
            "bt_y",
            "bt_z",
            "bt",
            "t_sensor",
            "ins_roll",
            "ins_pitch",
            "ins_yaw",
        ])?;
        for k in 0..self.len() {
            let ins = self.r_hat_eb[k].to_euler();
            let mut row = vec![self.t[k]];
            for v in [self.be_b[k], self.dbe_b[k], self.ba_b[k], self.bt_b[k]] {
                row.extend(v.iter());
            }
            row.extend([self.bt[k], self.t_sensor[k], ins.roll, ins.pitch, ins.yaw]);
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Background field in the body frame with its analytic derivative
/// `dB/dt = B × ω` along a trajectory.
pub fn background_samples(traj: &Trajectory, be_e: &Vector3<f64>) -> Vec<FieldSample> {
    (0..traj.len())
        .map(|k| {
            let b = rotate_to_body(&traj.rotation[k], be_e);
            let omega = body_rate(&traj.attitude[k], &traj.euler_rates[k]);
            FieldSample::new(b, b.cross(&omega), traj.t[k])
        })
        .collect()
}

pub fn simulate_onboard(
    traj: &Trajectory,
    be_e: &Vector3<f64>,
    coeffs: &TlCoefficients,
    gyro: &GyroErrorParams,
    seed: u64,
) -> Result<OnboardSignals> {
    simulate_onboard_with_tau(traj, be_e, coeffs, gyro, THERMAL_TAU, seed)
}

pub fn simulate_onboard_with_tau(
    traj: &Trajectory,
    be_e: &Vector3<f64>,
    coeffs: &TlCoefficients,
    gyro: &GyroErrorParams,
    tau: f64,
    seed: u64,
) -> Result<OnboardSignals> {
    if traj.is_empty() {
        return Err(Error::Argument("empty trajectory".into()));
    }
    let samples = background_samples(traj, be_e);
    let ba_b: Vec<Vector3<f64>> = samples.iter().map(|s| platform_field(coeffs, &s.b, &s.dbdt)).collect();
    let bt_b: Vec<Vector3<f64>> = samples.iter().zip(&ba_b).map(|(s, a)| s.b + a).collect();
    let drift = gyro_attitude_error(gyro, traj.len(), traj.f_s, seed)?;
    let r_hat_eb = traj
        .rotation
        .iter()
        .zip(&drift)
        .map(|(r, d)| r.compose(&Rotation::from_rotation_vector(d)))
        .collect();
    Ok(OnboardSignals {
        f_s: traj.f_s,
        t: traj.t.clone(),
        be_e: *be_e,
        be_b: samples.iter().map(|s| s.b).collect(),
        dbe_b: samples.iter().map(|s| s.dbdt).collect(),
        bt: bt_b.iter().map(|b| b.norm()).collect(),
        ba_b,
        bt_b,
        t_sensor: sensor_temperature(&traj.altitude, traj.f_s, tau),
        r_eb: traj.rotation.clone(),
        r_hat_eb,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn excitation_rate_matches_angle() {
        let e = Excitation {
            axis: ExcitationAxis::Roll,
            start: 2.0,
            duration: 8.0,
            lobes: (-0.9, 0.2),
        };
        let h = 1e-6;
        for k in 1..80 {
            let t = 2.0 + 0.1 * k as f64 + 0.013;
            let fd = (e.eval(t + h).0 - e.eval(t - h).0) / (2.0 * h);
            assert_relative_eq!(e.eval(t).1, fd, epsilon = 1e-6);
        }
        assert_eq!(e.eval(1.9), (0.0, 0.0));
        assert_relative_eq!(e.eval(4.0).0, -0.9, epsilon = 1e-12);
        assert_relative_eq!(e.eval(8.0).0, 0.2, epsilon = 1e-12);
    }

    #[test]
    fn turn_profile_derivatives() {
        let h = 1e-6;
        for k in 1..20 {
            let u = k as f64 / 20.0;
            let (a, r, acc) = smooth_turn(-FRAC_PI_2, 15.0, u);
            let (ap, rp, _) = smooth_turn(-FRAC_PI_2, 15.0, u + h / 15.0);
            assert_relative_eq!((ap - a) / h, r, epsilon = 1e-5);
            assert_relative_eq!((rp - r) / h, acc, epsilon = 1e-5);
        }
        assert_relative_eq!(smooth_turn(-FRAC_PI_2, 15.0, 1.0).0, -FRAC_PI_2, epsilon = 1e-15);
    }

    #[test]
    fn temperature_lag() {
        assert_eq!(
            sensor_temperature(&[500.0; 10], 20.0, 300.0),
            vec![ambient_temperature(500.0); 10]
        );
        let mut h = vec![0.0; 1];
        h.extend(vec![1000.0; 20 * 600]);
        let temp = sensor_temperature(&h, 20.0, 300.0);
        let dt_amb = ambient_temperature(1000.0) - ambient_temperature(0.0);
        for &k in &[20usize, 3000, 6000, 12000] {
            let t = k as f64 / 20.0;
            let expect = ambient_temperature(1000.0) - dt_amb * (-t / 300.0).exp();
            assert_relative_eq!(temp[k], expect, epsilon = 1e-9);
        }
        let tracked = sensor_temperature(&[0.0, 100.0, 400.0], 20.0, 0.0);
        assert_eq!(
            tracked,
            vec![20.0, ambient_temperature(100.0), ambient_temperature(400.0)]
        );
    }

    #[test]
    fn zero_gyro_error_is_zero() {
        let d = gyro_attitude_error(&GyroErrorParams::none(), 100, 20.0, 1).unwrap();
        assert!(d.iter().all(|v| *v == Vector3::zeros()));
        assert!(gyro_attitude_error(&GyroErrorParams::none(), 0, 20.0, 1).is_err());
    }

    #[test]
    fn background_field_direction() {
        let b = default_background_field();
        assert_relative_eq!(b.norm(), 50000.0, epsilon = 1e-9);
        assert_relative_eq!(b.z / b.norm(), (70.0 * DEG).sin(), epsilon = 1e-12);
        assert_eq!(b.y, 0.0);
    }

    #[test]
    fn config_envelope_checks() {
        let mut cfg = CalibrationConfig {
            turn_duration: 5.0,
            ..Default::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        cfg.turn_duration = 15.0;
        cfg.roll_down_deg = (30.0, 70.0);
        assert!(cfg.validate().is_err());
        assert!(CalibrationConfig::default().validate().is_ok());
        assert!(CalibrationConfig::default().peak_turn_bank() > -55.0 * DEG);
    }

    #[test]
    fn wrap_range() {
        for a in [-7.0, -PI, 0.0, 3.0, PI, 9.5] {
            let w = wrap(a);
            assert!(w > -PI && w <= PI);
            assert_relative_eq!(w.sin(), a.sin(), epsilon = 1e-12);
        }
    }
}
