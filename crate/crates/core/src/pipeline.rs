//! End-to-end simulation of a calibration and a validation flight sharing one
//! platform.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::calibration::{
    calibrate_and_validate, AttitudeSource, CalibrationResult, Compensation, FitOptions, ModelKind,
};
use crate::error::Result;
use crate::flight::{
    background_samples, default_background_field, gen_calibration_trajectory, gen_validation_trajectory,
    simulate_onboard_with_tau, CalibrationConfig, GyroErrorParams, OnboardSignals, Trajectory, ValidationConfig,
    THERMAL_TAU,
};
use crate::seed::derive_seed;
use crate::sensors::{measure_series, Measurements, SensorModels, SensorSetup};
use crate::tl::{generate_scenario_coefficients, ScenarioKind, TlCoefficients};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSetup {
    pub scenario: ScenarioKind,
    pub calibration: CalibrationConfig,
    pub validation: ValidationConfig,
    /// Background field in NED, nT.
    pub background: [f64; 3],
    pub gyro: GyroErrorParams,
    /// Sensor thermal time constant, s.
    pub thermal_tau: f64,
}

impl Default for SimulationSetup {
    fn default() -> Self {
        Self {
            scenario: ScenarioKind::Random,
            calibration: CalibrationConfig::default(),
            validation: ValidationConfig::default(),
            background: default_background_field().into(),
            gyro: GyroErrorParams::tactical(),
            thermal_tau: THERMAL_TAU,
        }
    }
}

impl SimulationSetup {
    pub fn with_scenario(scenario: ScenarioKind) -> Self {
        Self {
            scenario,
            ..Self::default()
        }
    }

    pub fn be_e(&self) -> Vector3<f64> {
        Vector3::from(self.background)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Flight {
    pub trajectory: Trajectory,
    pub signals: OnboardSignals,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Flights {
    pub coefficients: TlCoefficients,
    pub calibration: Flight,
    pub validation: Flight,
}

/// Trajectories, ground-truth coefficients and clean signals for one seed.
/// Coefficients are drawn against the calibration flight's background field.
pub fn simulate_flights(setup: &SimulationSetup, seed: u64) -> Result<Flights> {
    let be_e = setup.be_e();
    let cal_traj = gen_calibration_trajectory(&setup.calibration, derive_seed(seed, 1))?;
    let val_traj = gen_validation_trajectory(&setup.validation, derive_seed(seed, 2))?;
    let coefficients = generate_scenario_coefficients(
        setup.scenario,
        derive_seed(seed, 3),
        &background_samples(&cal_traj, &be_e),
    )?;
    let signals = |traj: &Trajectory, tag: u64| {
        simulate_onboard_with_tau(
            traj,
            &be_e,
            &coefficients,
            &setup.gyro,
            setup.thermal_tau,
            derive_seed(seed, tag),
        )
    };
    Ok(Flights {
        calibration: Flight {
            signals: signals(&cal_traj, 4)?,
            trajectory: cal_traj,
        },
        validation: Flight {
            signals: signals(&val_traj, 5)?,
            trajectory: val_traj,
        },
        coefficients,
    })
}

/// Sensor outputs on both flights.
pub fn measure_flights(
    flights: &Flights,
    setup: SensorSetup,
    models: &SensorModels,
    seed: u64,
) -> Result<(Measurements, Measurements)> {
    Ok((
        measure_series(setup, models, &flights.calibration.signals, derive_seed(seed, 6))?,
        measure_series(setup, models, &flights.validation.signals, derive_seed(seed, 7))?,
    ))
}

/// Fits `model` with `src` on the calibration flight and compensates the validation flight.
pub fn evaluate(
    flights: &Flights,
    meas: &(Measurements, Measurements),
    model: ModelKind,
    src: AttitudeSource,
    opts: &FitOptions,
) -> Result<(CalibrationResult, Compensation)> {
    calibrate_and_validate(
        model,
        src,
        opts,
        (&flights.calibration.signals, &meas.0),
        (&flights.validation.signals, &meas.1),
    )
}
