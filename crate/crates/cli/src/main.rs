//! `pnpk`: config-driven reconstruction, contraction sweeps and verification.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use config::ExperimentConfig;

#[derive(Parser)]
#[command(
    name = "pnpk",
    version,
    about = "Plug-and-Play reconstruction with kernel denoisers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON experiment configuration; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the configuration's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for sweeps and data-parallel kernels (0 = all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Degrade the input, reconstruct it and write the image, trajectory and report.
    Reconstruct(Common),
    /// Measure contraction factors and bounds over the configured grid.
    Sweep(Common),
    /// Dense norms of the non-contractive example for n = 3..n_max.
    Counterexample {
        #[command(flatten)]
        common: Common,
        /// Overrides `counterexample.n_max`.
        #[arg(long)]
        n_max: Option<usize>,
    },
    /// Apply the kernel denoiser built from a noisy image to itself.
    Denoise(Common),
    /// Check denoiser assumptions, operator identities and bounds on the configured instance.
    Verify(Common),
}

/// Failure classes, each with its own exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error("solver failure: {0}")]
    Solver(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Verification(_) => 3,
            CliError::Io(_) => 4,
            CliError::Solver(_) => 5,
        }
    }

    /// Classifies a library error; `path` names the file being read, if any.
    pub fn from_core(e: pnp_kernel::Error, path: Option<&Path>) -> Self {
        use pnp_kernel::Error as E;
        let msg = match path {
            Some(p) => format!("{}: {e}", p.display()),
            None => e.to_string(),
        };
        match e {
            E::Io(_) | E::Format(_) => CliError::Io(msg),
            E::Verification(_) => CliError::Verification(msg),
            E::CgNotConverged { .. } | E::SinkhornNotConverged { .. } => CliError::Solver(msg),
            E::InvalidParameter(_) | E::DimensionMismatch { .. } => CliError::Config(msg),
        }
    }
}

impl From<pnp_kernel::Error> for CliError {
    fn from(e: pnp_kernel::Error) -> Self {
        CliError::from_core(e, None)
    }
}

pub struct Context {
    pub cfg: ExperimentConfig,
    pub out: PathBuf,
}

impl Context {
    fn new(common: &Common) -> Result<Self, CliError> {
        let mut cfg = match &common.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = common.seed {
            cfg.seed = seed;
        }
        std::fs::create_dir_all(&common.out)
            .map_err(|e| CliError::Io(format!("{}: {e}", common.out.display())))?;
        Ok(Self {
            cfg,
            out: common.out.clone(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let common = match &cli.command {
        Command::Reconstruct(c) | Command::Sweep(c) | Command::Denoise(c) | Command::Verify(c) => c,
        Command::Counterexample { common, .. } => common,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(common.threads)
        .build_global()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let mut ctx = Context::new(common)?;
    match cli.command {
        Command::Reconstruct(_) => commands::reconstruct(&ctx),
        Command::Sweep(_) => commands::sweep(&ctx),
        Command::Counterexample { n_max, .. } => {
            if let Some(n) = n_max {
                ctx.cfg.counterexample.n_max = n;
                ctx.cfg.validate()?;
            }
            commands::counterexample(&ctx)
        }
        Command::Denoise(_) => commands::denoise(&ctx),
        Command::Verify(_) => commands::verify(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pnpk: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
