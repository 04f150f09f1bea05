//! Command-line driver: reads a TOML job, runs one subcommand, and writes
//! CSV results plus a `manifest.json` into the output directory.

pub mod commands;
pub mod config;
pub mod manifest;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use afflab_core::Error;

use crate::commands::Report;
use crate::config::{LoadedConfig, WORD_BUDGET_ENV};
use crate::manifest::{sha256_hex, Manifest, OutputFile, MANIFEST_FILE};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_CERTIFICATION: i32 = 3;
pub const EXIT_BUDGET: i32 = 4;
pub const EXIT_NUMERICAL: i32 = 5;

const DEFAULT_OUT_DIR: &str = "afflab-out";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Io(_) => EXIT_CONFIG,
            Self::Core(e) => match e {
                Error::CertificationFailed(_) => EXIT_CERTIFICATION,
                Error::DepthOverflow { .. } => EXIT_BUDGET,
                Error::SingularMatrix { .. }
                | Error::UndecidableTail
                | Error::NoRoot { .. }
                | Error::DivergentRay { .. }
                | Error::MaxIterations(_)
                | Error::Numerical(_) => EXIT_NUMERICAL,
                Error::NegativeExponent(_)
                | Error::NonInvertible(_)
                | Error::NotContracting { .. }
                | Error::WrongDimension { .. }
                | Error::WordTooShort { .. }
                | Error::SymbolOutOfRange { .. }
                | Error::EnvelopeViolation { .. }
                | Error::Invalid(_) => EXIT_CONFIG,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Affinity dimension: root of s ↦ P(φ^s)
    Dim,
    /// Pressure brackets on an s-grid
    Pressure,
    /// Birkhoff spectrum on an α-grid
    Spectrum,
    /// Quasi-multiplicativity certificates
    Certify,
    /// Point cloud of the projected attractor
    Render,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::Dim => "dim",
            Self::Pressure => "pressure",
            Self::Spectrum => "spectrum",
            Self::Certify => "certify",
            Self::Render => "render",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "afflab", version, about = "Dimension, pressure and spectra of self-affine systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// TOML job description
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Output directory (default: `output.dir` from the config, else ./afflab-out)
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Worker threads (default: hardware concurrency)
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,

    /// Seed for randomized steps (overrides `seed` in the config)
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
}

/// What a finished run left behind.
#[derive(Debug)]
pub struct Outcome {
    pub out_dir: PathBuf,
    pub manifest: Manifest,
    pub summary: Vec<String>,
    pub exit_code: i32,
    pub error: Option<String>,
}

/// Runs the job and prints a summary; returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let env_budget = std::env::var(WORD_BUDGET_ENV).ok();
    match execute(cli, env_budget.as_deref()) {
        Ok(outcome) => {
            for line in &outcome.summary {
                println!("{line}");
            }
            println!("results in {}", outcome.out_dir.display());
            if let Some(e) = &outcome.error {
                eprintln!("afflab: {e}");
            }
            outcome.exit_code
        }
        Err(e) => {
            eprintln!("afflab: {e}");
            e.exit_code()
        }
    }
}

/// Runs the job. Failures after the config is loaded still write a manifest
/// and come back as an [`Outcome`] with a non-zero exit code.
pub fn execute(cli: &Cli, env_budget: Option<&str>) -> Result<Outcome, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config PATH is required".into()))?;
    let loaded = config::load(path, env_budget)?;
    let out_dir = cli
        .out
        .clone()
        .or_else(|| loaded.config.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    let seed = loaded.config.seed(cli.seed);

    let pool = match cli.threads {
        Some(0) => return Err(CliError::Config("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build(),
        None => rayon::ThreadPoolBuilder::new().build(),
    }
    .map_err(|e| CliError::Config(format!("cannot start worker threads: {e}")))?;

    let result = pool.install(|| dispatch(cli.command, &loaded, seed));
    let (report, error) = match result {
        Ok(mut r) => {
            let deferred = r.deferred.take();
            (r, deferred)
        }
        Err(e) => (
            Report {
                certificate_mode: "none".into(),
                ..Default::default()
            },
            Some(e),
        ),
    };

    let mut manifest = Manifest::new(cli.command.name(), &loaded, seed, report.certificate_mode.clone());
    if let Some(e) = &error {
        manifest.status = e.to_string();
    }
    write_outputs(&out_dir, &report, &mut manifest)?;
    Ok(Outcome {
        out_dir,
        manifest,
        summary: report.summary,
        exit_code: error.as_ref().map_or(EXIT_OK, CliError::exit_code),
        error: error.map(|e| e.to_string()),
    })
}

fn dispatch(command: Command, loaded: &LoadedConfig, seed: u64) -> Result<Report, CliError> {
    let config = &loaded.config;
    let ifs = config.build_ifs()?;
    match command {
        Command::Dim => commands::cmd_dim(config, &ifs),
        Command::Pressure => commands::cmd_pressure(config, &ifs),
        Command::Spectrum => commands::cmd_spectrum(config, &ifs),
        Command::Certify => commands::cmd_certify(config, &ifs),
        Command::Render => commands::cmd_render(config, &ifs, seed),
    }
}

fn write_outputs(dir: &Path, report: &Report, manifest: &mut Manifest) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    for (name, bytes) in &report.files {
        std::fs::write(dir.join(name), bytes).map_err(io)?;
        manifest.outputs.push(OutputFile {
            name: name.clone(),
            sha256: sha256_hex(bytes),
        });
    }
    std::fs::write(dir.join(MANIFEST_FILE), manifest.to_json()).map_err(io)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Config("x".into()).exit_code(), EXIT_CONFIG);
        assert_eq!(CliError::from(Error::CertificationFailed("x".into())).exit_code(), EXIT_CERTIFICATION);
        assert_eq!(
            CliError::from(Error::DepthOverflow { words: 1e9, budget: 10 }).exit_code(),
            EXIT_BUDGET
        );
        assert_eq!(CliError::from(Error::NoRoot { s_max: 1e3 }).exit_code(), EXIT_NUMERICAL);
        assert_eq!(CliError::from(Error::NotContracting { index: 1, norm: 2.0 }).exit_code(), EXIT_CONFIG);
    }

    #[test]
    fn cli_parses_flags_in_any_position() {
        let a = Cli::try_parse_from(["afflab", "dim", "--config", "x.toml", "--threads", "2"]).unwrap();
        let b = Cli::try_parse_from(["afflab", "--seed", "7", "render", "--config", "x.toml"]).unwrap();
        assert_eq!(a.command, Command::Dim);
        assert_eq!(a.threads, Some(2));
        assert_eq!(b.seed, Some(7));
        assert!(Cli::try_parse_from(["afflab", "nope"]).is_err());
    }
}
