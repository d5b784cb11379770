use std::path::PathBuf;
use std::process::ExitCode;

use aeromag_cli::analyze::{parse_angle, parse_theta_grid, write_error_table};
use aeromag_cli::bench::run_noise_bench;
use aeromag_cli::config::{ScenarioConfig, SCHEMA_VERSION};
use aeromag_cli::error::{io_at, CliError, CliResult};
use aeromag_cli::export::{export_trajectory, FlightKind};
use aeromag_cli::output::write_estimate;
use aeromag_cli::scenario::run_scenario;
use aeromag_core::sensors::{SensorGrade, SensorModel};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "aeromag", version, about = "Platform-field calibration simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate flights, corrupt them with sensor models, fit and validate.
    RunScenario {
        /// JSON scenario configuration.
        config: PathBuf,
        /// Output directory (overrides `output_dir` of the config).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Closed-form calibration errors with their exact counterparts, as CSV on stdout.
    AnalyzeErrors {
        /// Platform field magnitude, nT.
        #[arg(long, allow_negative_numbers = true)]
        ba: f64,
        /// Background field magnitude, nT.
        #[arg(long, default_value_t = 50000.0, allow_negative_numbers = true)]
        be: f64,
        /// Attitude error (suffix `deg` or `rad`; degrees if bare).
        #[arg(long, default_value = "0.1deg", value_parser = parse_angle)]
        alpha: f64,
        /// Scalar magnitude error of the reference, nT.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        deltab: f64,
        /// Angles between background and platform field, degrees: `90`, `0,45,90` or `0:180:15`.
        #[arg(long, default_value = "0:180:15")]
        theta_grid: String,
    },
    /// Static-field noise of one sensor grade: ASD and Allan deviation CSVs.
    NoiseBench {
        #[arg(long)]
        grade: String,
        /// Record length, s.
        #[arg(long, default_value_t = 1024.0)]
        duration: f64,
        /// Sampling rate, Hz.
        #[arg(long, default_value_t = 256.0)]
        fs: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Write a generated trajectory (and optionally its onboard signals) as CSV.
    ExportTrajectory {
        #[arg(long, value_enum, default_value_t = FlightKind::Calibration)]
        kind: FlightKind,
        /// Scenario configuration supplying trajectory parameters and seed.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Seed (overrides the config seed).
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Also write the clean onboard signals to this file.
        #[arg(long)]
        signals: Option<PathBuf>,
    },
}

fn default_config() -> ScenarioConfig {
    ScenarioConfig::from_json(&format!(
        r#"{{"version": {SCHEMA_VERSION}, "setups": ["ideal"], "sources": ["perfect"], "models": ["scalar-1d"]}}"#
    ))
    .expect("built-in configuration is valid")
}

fn run(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::RunScenario { config, out } => {
            let mut cfg = ScenarioConfig::load(&config)?;
            cfg.apply_seed_override()?;
            let dir = out
                .or_else(|| cfg.output_dir.clone())
                .unwrap_or_else(|| PathBuf::from("out"));
            let summary = run_scenario(&cfg, &dir)?;
            println!("setup,model,source,calibration_mean_nt,validation_mean_nt,condition_number,ill_conditioned");
            for e in &summary.entries {
                for f in &e.fits {
                    println!(
                        "{},{},{},{},{},{:e},{}",
                        e.setup,
                        f.model,
                        f.source,
                        f.calibration.mean,
                        f.validation.map_or(f64::NAN, |v| v.mean),
                        f.condition_number,
                        f.ill_conditioned
                    );
                }
            }
            eprintln!("results written to {}", dir.display());
            Ok(())
        }
        Command::AnalyzeErrors {
            ba,
            be,
            alpha,
            deltab,
            theta_grid,
        } => {
            let thetas = parse_theta_grid(&theta_grid).map_err(CliError::Config)?;
            write_error_table(std::io::stdout().lock(), ba, be, alpha, deltab, &thetas)
        }
        Command::NoiseBench {
            grade,
            duration,
            fs,
            seed,
            out,
        } => {
            let grade: SensorGrade = grade
                .parse()
                .map_err(|e: aeromag_core::Error| CliError::Config(e.to_string()))?;
            let bench = run_noise_bench(&SensorModel::preset(grade), duration, fs, seed)?;
            std::fs::create_dir_all(&out).map_err(io_at(&out))?;
            write_estimate(
                &out.join(format!("asd_{grade}.csv")),
                "frequency_hz",
                "asd_nt_per_rthz",
                &bench.asd,
            )?;
            write_estimate(&out.join(format!("adev_{grade}.csv")), "tau_s", "adev_nt", &bench.adev)
        }
        Command::ExportTrajectory {
            kind,
            config,
            seed,
            out,
            signals,
        } => {
            let mut cfg = match config {
                Some(p) => ScenarioConfig::load(&p)?,
                None => default_config(),
            };
            cfg.apply_seed_override()?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            export_trajectory(&cfg, kind, &out, signals.as_deref()).map(|_| ())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("aeromag: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
