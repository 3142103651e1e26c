use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use hdqkd::keyrate::Bound;

use crate::config::{CurveKind, Intended, MubFamily, OutputModes, SimFamily, OUT_DIR_ENV};

#[derive(Debug, Parser)]
#[command(
    name = "hdqkd",
    version,
    about = "High-dimensional QKD: bases, sorter design, simulation and key rates"
)]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory [env: HDQKD_OUT_DIR; default: out].
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Only print errors and warnings.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

impl Cli {
    pub fn out_env() -> Option<PathBuf> {
        std::env::var_os(OUT_DIR_ENV)
            .filter(|v| !v.is_empty())
            .map(PathBuf::from)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate or check basis files.
    #[command(subcommand)]
    Mub(MubCommand),
    /// Design or evaluate a phase-mask sorter.
    #[command(subcommand)]
    Optics(OpticsCommand),
    /// Sample coincidence counts and a protocol session.
    Simulate(SimulateArgs),
    /// Key rate, threshold and plot data.
    Keyrate(KeyrateArgs),
}

#[derive(Debug, Subcommand)]
pub enum MubCommand {
    /// Write one JSON file per basis.
    Gen(MubGenArgs),
    /// Report unitarity and unbiasedness deviations of basis files.
    Check(MubCheckArgs),
}

#[derive(Debug, Args)]
pub struct MubGenArgs {
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long, value_enum)]
    pub family: Option<MubFamily>,
}

#[derive(Debug, Args)]
pub struct MubCheckArgs {
    /// Basis files or directories of them.
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
    #[arg(long, default_value_t = hdqkd::mub::UNBIASED_TOL)]
    pub tol: f64,
}

#[derive(Debug, Subcommand)]
pub enum OpticsCommand {
    /// Run wavefront matching and write the mask stack.
    Design(OpticsArgs),
    /// Compute the transfer matrix and sorter metrics of a stack.
    Eval(OpticsArgs),
}

#[derive(Debug, Args)]
pub struct OpticsArgs {
    #[arg(long)]
    pub d: Option<usize>,
    /// dft, computational, row-dft, column-dft or wh:<r>.
    #[arg(long)]
    pub basis: Option<String>,
    /// square or line.
    #[arg(long)]
    pub arrangement: Option<String>,
    /// Grid side in pixels (sets both nx and ny).
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub pitch: Option<f64>,
    #[arg(long)]
    pub wavelength: Option<f64>,
    #[arg(long)]
    pub planes: Option<usize>,
    #[arg(long)]
    pub plane_spacing: Option<f64>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub aperture_radius: Option<f64>,
    #[arg(long)]
    pub aperture_spacing: Option<f64>,
    #[arg(long)]
    pub detector_radius: Option<f64>,
    #[arg(long, value_enum)]
    pub output_modes: Option<OutputModes>,
    #[arg(long, value_enum)]
    pub intended: Option<Intended>,
    /// Stack file to evaluate.
    #[arg(long)]
    pub stack: Option<PathBuf>,
    /// Skip the PGM mask images.
    #[arg(long)]
    pub no_pgm: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long, value_enum)]
    pub family: Option<SimFamily>,
    #[arg(long = "Eu", alias = "eu")]
    pub uniform_error: Option<f64>,
    #[arg(long = "Eb", alias = "eb")]
    pub block_error: Option<f64>,
    #[arg(long)]
    pub pair_rate: Option<f64>,
    #[arg(long)]
    pub accidental_rate: Option<f64>,
    #[arg(long)]
    pub integration_time: Option<f64>,
    #[arg(long)]
    pub coincidence_window: Option<f64>,
    #[arg(long)]
    pub rounds: Option<usize>,
}

#[derive(Debug, Args)]
pub struct KeyrateArgs {
    #[arg(long)]
    pub d: Option<usize>,
    /// depolarizing, two-mub-uniform or two-mub-block.
    #[arg(long)]
    pub bound: Option<Bound>,
    #[arg(long = "E", alias = "e")]
    pub error: Option<f64>,
    #[arg(long = "Eu", alias = "eu")]
    pub uniform_error: Option<f64>,
    #[arg(long = "Eb", alias = "eb")]
    pub block_error: Option<f64>,
    /// Count table CSV (with its JSON sidecar) written by `simulate`.
    #[arg(long)]
    pub counts: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub curve: Option<CurveKind>,
    /// Inclusive range for `--curve thresholds`, e.g. 2:32.
    #[arg(long)]
    pub d_range: Option<String>,
    /// uniform, experiment, all-block or a block fraction in [0, 1].
    #[arg(long)]
    pub profile: Option<String>,
    #[arg(long)]
    pub points: Option<usize>,
}
