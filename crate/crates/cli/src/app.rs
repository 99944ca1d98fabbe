//! Argument parsing and the top-level run loop shared by the binary and the
//! integration tests.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands::{self, Command};
use crate::config::{BasisSpec, ExperimentConfig, Format, Overrides, OUT_DIR_ENV};
use crate::error::CliResult;
use crate::formats;

const CONVENTIONS: &str = "\
Units: ħ = 1 with quadrature x = (a + a†)/√2, so the coherent amplitude α sits \
at x ≈ √2·Re α. Homodyne phases default to jπ/6 (j = 0..5) with 51 bins on \
(−5, 5) and a Fock cutoff of 15.

Precedence: command-line flag > config file > default. The output directory \
falls back to $GRAMTOMO_OUT, then ./gramtomo-out.

Exit codes: 0 success, 1 validation, 2 numerical-consistency failure, 3 IO.";

#[derive(Debug, Parser)]
#[command(name = "gramtomo", version, about = "Gram-mode maximum-likelihood homodyne tomography experiments", after_long_help = CONVENTIONS)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,

    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Eigenvalues of the Gram operator G and of the operator-space Gram matrix Q.
    GramSpectrum,
    /// Simulate (or load) counts and run one MaxLik reconstruction.
    Reconstruct,
    /// Fidelity versus reconstruction dimension in the Gram and/or Fock basis.
    Sweep,
    /// Repeated noisy reconstructions at one dimension.
    Stability,
    /// Frame and Hadamard identities; exits 2 if any deviation exceeds tolerance.
    FramesCheck,
}

#[derive(Debug, Args)]
pub struct Flags {
    /// JSON experiment config (unknown keys are rejected).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Noise seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Write only this format.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    /// Trials for sweep and stability.
    #[arg(long, global = true)]
    pub trials: Option<usize>,

    /// Reconstruction dimensions, comma separated; exactly one for reconstruct and stability.
    #[arg(long, global = true, value_delimiter = ',')]
    pub dims: Option<Vec<usize>>,

    /// Reconstruction basis.
    #[arg(long, global = true, value_enum)]
    pub basis: Option<BasisSpec>,
}

impl Sub {
    fn command(&self) -> Command {
        match self {
            Sub::GramSpectrum => Command::GramSpectrum,
            Sub::Reconstruct => Command::Reconstruct,
            Sub::Sweep => Command::Sweep,
            Sub::Stability => Command::Stability,
            Sub::FramesCheck => Command::FramesCheck,
        }
    }
}

impl Flags {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            out: self.out.clone(),
            format: self.format,
            trials: self.trials,
            dims: self.dims.clone(),
            basis: self.basis,
        }
    }
}

/// Loads, resolves, runs and writes. Returns the paths written.
pub fn run_cli(cli: &Cli, env_out: Option<PathBuf>) -> CliResult<Vec<PathBuf>> {
    let command = cli.command.command();
    let base = match &cli.flags.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let config = base.resolve(&cli.flags.overrides(), env_out, command.single_dim())?;
    let report = commands::execute(command, &config)?;
    let written = formats::write_artifacts(config.out_dir(), &report.artifacts)?;
    match commands::failure(&report) {
        Some(err) => Err(err),
        None => Ok(written),
    }
}

/// Process entry point; returns the exit code.
pub fn main_with<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let env_out = std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from);
    match run_cli(&cli, env_out) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("gramtomo: {e}");
            e.exit_code()
        }
    }
}
