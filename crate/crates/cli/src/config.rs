//! Versioned JSON scenario configuration.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use aeromag_core::calibration::{AttitudeSource, FitOptions, ModelKind};
use aeromag_core::flight::{
    background_field, CalibrationConfig, GyroErrorParams, ValidationConfig, BE_MAGNITUDE, THERMAL_TAU,
};
use aeromag_core::pipeline::SimulationSetup;
use aeromag_core::sensors::{SensorGrade, SensorModel, SensorModels, SensorParams, SensorSetup};
use aeromag_core::tl::ScenarioKind;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable overriding the configured seed.
pub const SEED_ENV: &str = "AEROMAG_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_scenario")]
    pub scenario: ScenarioKind,
    pub setups: Vec<SensorSetup>,
    pub sources: Vec<AttitudeSource>,
    pub models: Vec<ModelKind>,
    #[serde(default)]
    pub trajectory: TrajectoryConfig,
    #[serde(default)]
    pub background: BackgroundConfig,
    #[serde(default)]
    pub gyro: GyroErrorParams,
    /// Sensor thermal time constant, s.
    #[serde(default = "default_tau")]
    pub thermal_tau: f64,
    /// Partial parameter overrides per sensor grade, merged into the presets.
    #[serde(default)]
    pub sensors: HashMap<SensorGrade, serde_json::Value>,
    #[serde(default)]
    pub fit: FitOptions,
    /// Write ASD/ADEV of each instrument's scalar error on the validation flight.
    #[serde(default = "yes")]
    pub spectra: bool,
    /// Output directory, relative to the working directory.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn default_scenario() -> ScenarioKind {
    ScenarioKind::Random
}

fn default_tau() -> f64 {
    THERMAL_TAU
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrajectoryConfig {
    pub calibration: CalibrationConfig,
    pub validation: ValidationConfig,
}

/// Uniform background field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BackgroundConfig {
    /// nT
    pub magnitude: f64,
    pub inclination_deg: f64,
    pub declination_deg: f64,
}

impl Default for BackgroundConfig {
    fn default() -> Self {
        Self {
            magnitude: BE_MAGNITUDE,
            inclination_deg: 70.0,
            declination_deg: 0.0,
        }
    }
}

impl ScenarioConfig {
    /// Parses and validates a configuration; errors name the offending field.
    pub fn from_json(text: &str) -> CliResult<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::Config(format!("field '{path}': {}", e.into_inner()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.version != SCHEMA_VERSION {
            return bad(format!(
                "field 'version': unsupported schema version {} (expected {SCHEMA_VERSION})",
                self.version
            ));
        }
        for (name, empty) in [
            ("setups", self.setups.is_empty()),
            ("sources", self.sources.is_empty()),
            ("models", self.models.is_empty()),
        ] {
            if empty {
                return bad(format!("field '{name}': at least one entry is required"));
            }
        }
        if !(self.background.magnitude > 0.0) {
            return bad("field 'background.magnitude': must be positive".into());
        }
        if !(self.thermal_tau > 0.0) {
            return bad("field 'thermal_tau': must be positive".into());
        }
        if !(self.fit.model_magnitude > 0.0) {
            return bad("field 'fit.model_magnitude': must be positive".into());
        }
        fn cfg_err(field: &'static str) -> impl Fn(aeromag_core::Error) -> CliError {
            move |e| CliError::Config(format!("field '{field}': {e}"))
        }
        self.trajectory
            .calibration
            .validate()
            .map_err(cfg_err("trajectory.calibration"))?;
        self.trajectory
            .validation
            .validate()
            .map_err(cfg_err("trajectory.validation"))?;
        self.gyro.validate().map_err(cfg_err("gyro"))?;
        self.sensor_models()?;
        Ok(())
    }

    /// Applies the `AEROMAG_SEED` override, if set.
    pub fn apply_seed_override(&mut self) -> CliResult<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seed = v
                .trim()
                .parse()
                .map_err(|_| CliError::Config(format!("{SEED_ENV}='{v}' is not an unsigned integer")))?;
        }
        Ok(())
    }

    pub fn simulation_setup(&self) -> SimulationSetup {
        let b = &self.background;
        SimulationSetup {
            scenario: self.scenario,
            calibration: self.trajectory.calibration.clone(),
            validation: self.trajectory.validation.clone(),
            background: background_field(
                b.magnitude,
                b.inclination_deg.to_radians(),
                b.declination_deg.to_radians(),
            )
            .into(),
            gyro: self.gyro,
            thermal_tau: self.thermal_tau,
        }
    }

    pub fn sensor_models(&self) -> CliResult<SensorModels> {
        let mut models = SensorModels::default();
        for (grade, patch) in &self.sensors {
            let params = SensorParams::preset_with_overrides(*grade, patch)
                .map_err(|e| CliError::Config(format!("field 'sensors.{grade}': {e}")))?;
            models.set(SensorModel::new(params));
        }
        Ok(models)
    }
}
