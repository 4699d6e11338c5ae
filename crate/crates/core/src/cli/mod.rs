//! Command-line front end: configuration, presets, runs and file emission.

pub mod config;
pub mod output;
pub mod presets;
pub mod run;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Parser, Subcommand};
use thiserror::Error;

use crate::model::PhysicalParams;

pub use config::{parse_config, ExperimentConfig, RunKind};
pub use presets::preset;
pub use run::{execute, produce, Manifest, RunOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("unknown preset `{0}` (known: fig2 .. fig8)")]
    UnknownPreset(String),
    #[error(transparent)]
    Model(#[from] crate::Error),
    #[error("cannot write {}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::UnknownPreset(_) => EXIT_CONFIG,
            CliError::Model(e) if e.is_numerical() => EXIT_NUMERICAL,
            CliError::Model(_) => EXIT_CONFIG,
            CliError::Io { .. } => EXIT_IO,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "chiral-cat", version, about = "Chiral cat-state simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a preset or a configuration file and write CSV/JSON outputs.
    #[command(group(ArgGroup::new("input").required(true).args(["preset", "config"])))]
    Simulate {
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory (default: out/<name>).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        jobs: Option<usize>,
        /// Omit wall-clock fields so the manifest is byte-reproducible.
        #[arg(long)]
        seed_free: bool,
    },
    /// Sagnac-Fizeau shift from resonator parameters, or the rotation rate
    /// needed for a given shift.
    #[command(group(ArgGroup::new("target").required(true).args(["omega_rad_s", "delta_sag_rad_s"])))]
    Sagnac {
        #[arg(long)]
        n_r: f64,
        #[arg(long)]
        radius_m: f64,
        #[arg(long)]
        lambda_m: f64,
        #[arg(long, allow_hyphen_values = true)]
        omega_rad_s: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        delta_sag_rad_s: Option<f64>,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        dn_dlambda: f64,
        /// Coupling J in rad/s; adds Δ_sag/J to the report.
        #[arg(long)]
        j_rad_s: Option<f64>,
    },
    /// Parse a configuration and print the dispersive-regime report.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    parse_config(&text, &stem)
}

fn simulate(
    preset_name: Option<String>,
    config: Option<PathBuf>,
    out: Option<PathBuf>,
    opts: RunOptions,
) -> Result<(), CliError> {
    let cfg = match (preset_name, config) {
        (Some(p), _) => preset(&p)?,
        (None, Some(c)) => load_config(&c)?,
        (None, None) => return Err(CliError::Config("need --preset or --config".into())),
    };
    if opts.jobs == Some(0) {
        return Err(CliError::Config("--jobs must be at least 1".into()));
    }
    let out = out.unwrap_or_else(|| Path::new("out").join(&cfg.name));
    let m = execute(&cfg, &out, opts)?;
    println!("{}: {} files written to {}", cfg.name, m.files.len() + 1, out.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn sagnac_cmd(
    n_r: f64,
    radius: f64,
    lambda: f64,
    omega: Option<f64>,
    delta_sag: Option<f64>,
    dn_dlambda: f64,
    j: Option<f64>,
) -> Result<(), CliError> {
    let cfg = |e: crate::Error| CliError::Config(e.to_string());
    let base = PhysicalParams::new(n_r, radius, lambda, omega.unwrap_or(0.0))
        .map_err(cfg)?
        .with_dispersion(dn_dlambda);
    let p = match delta_sag {
        Some(d) => PhysicalParams {
            omega: base.omega_for_shift(d),
            ..base
        },
        None => base,
    };
    p.validate().map_err(cfg)?;
    if let Some(j) = j {
        if !(j > 0.0 && j.is_finite()) {
            return Err(CliError::Config("--j-rad-s must be positive".into()));
        }
    }
    let r = run::sagnac_report(&p, j);
    println!("omega_rad_s = {:?}", r.physical.omega);
    println!("delta_sag_rad_s = {:?}", r.delta_sag_rad_s);
    if let Some(x) = r.delta_sag_over_j {
        println!("delta_sag_over_j = {x:?}");
    }
    Ok(())
}

fn validate_cmd(path: &Path) -> Result<(), CliError> {
    let c = load_config(path)?;
    let d = run::Derived::of(&c.system, c.run.dispersive_threshold);
    println!("{}", serde_json::to_string_pretty(&d).expect("serializable"));
    Ok(())
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let res = match cli.command {
        Command::Simulate {
            preset,
            config,
            out,
            jobs,
            seed_free,
        } => simulate(preset, config, out, RunOptions { jobs, seed_free }),
        Command::Sagnac {
            n_r,
            radius_m,
            lambda_m,
            omega_rad_s,
            delta_sag_rad_s,
            dn_dlambda,
            j_rad_s,
        } => sagnac_cmd(n_r, radius_m, lambda_m, omega_rad_s, delta_sag_rad_s, dn_dlambda, j_rad_s),
        Command::Validate { config } => validate_cmd(&config),
    };
    match res {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
