//! Command-line workflows over the `hdqkd` library. Each subcommand reads a
//! resolved parameter set, writes its outputs plus `resolved_config.toml`
//! into the output directory, and maps failures to exit codes
//! (0 success, 1 computation failure, 2 usage or configuration error).

pub mod args;
mod commands;
pub mod config;
pub mod exit;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Parser;

pub use commands::keyrate::{cmd_keyrate, merge_keyrate, KeyrateOutput, SettingDecomposition, ThresholdRow};
pub use commands::mub::{cmd_mub_check, cmd_mub_gen, merge_mub, MubCheckReport};
pub use commands::optics::{cmd_optics, merge_optics, OpticsMode, OpticsOutput};
pub use commands::simulate::{cmd_simulate, merge_simulate, SessionSummary, SimulateOutput};

use args::{Cli, Command, MubCommand, OpticsCommand};
use config::{RunConfig, CONFIG_VERSION, DEFAULT_OUT_DIR, RESOLVED_CONFIG_FILE};
use exit::{exit_code, EXIT_OK, EXIT_USAGE};

/// Where a command writes, which seed it uses and whether it reports progress.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub out: PathBuf,
    pub seed: u64,
    pub quiet: bool,
}

impl RunContext {
    pub fn new(out: impl Into<PathBuf>, seed: u64, quiet: bool) -> Self {
        Self {
            out: out.into(),
            seed,
            quiet,
        }
    }

    pub fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }

    pub fn warn(&self, msg: impl AsRef<str>) {
        eprintln!("warning: {}", msg.as_ref());
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    pub fn prepare(&self) -> anyhow::Result<()> {
        std::fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))
    }

    /// Writes `resolved_config.toml` holding `sections`, the seed and the
    /// output directory.
    pub fn write_resolved(&self, command: &str, sections: RunConfig) -> anyhow::Result<PathBuf> {
        let cfg = RunConfig {
            version: Some(CONFIG_VERSION),
            command: Some(command.into()),
            seed: Some(self.seed),
            out: Some(self.out.clone()),
            ..sections
        };
        let path = self.path(RESOLVED_CONFIG_FILE);
        std::fs::write(&path, cfg.to_toml()?).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

fn fresh_seed() -> u64 {
    let nanos = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_nanos())
        .unwrap_or(0);
    (nanos as u64) ^ ((nanos >> 64) as u64) ^ u64::from(std::process::id()).rotate_left(32)
}

/// Resolves flags, environment and configuration into a context.
pub fn context_for(cli: &Cli, cfg: &RunConfig) -> RunContext {
    let out = cli
        .out
        .clone()
        .or_else(Cli::out_env)
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    let seed = cli.seed.or(cfg.seed).unwrap_or_else(fresh_seed);
    RunContext::new(out, seed, cli.quiet)
}

pub fn run(cli: &Cli) -> anyhow::Result<()> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let ctx = context_for(cli, &cfg);
    match &cli.command {
        Command::Mub(MubCommand::Gen(a)) => {
            let params = merge_mub(cfg.mub.clone(), a);
            cmd_mub_gen(&ctx, &params).map(|_| ())
        }
        Command::Mub(MubCommand::Check(a)) => cmd_mub_check(&ctx, &a.files, a.tol).map(|_| ()),
        Command::Optics(OpticsCommand::Design(a)) => {
            let params = merge_optics(cfg.optics.clone(), a)?;
            cmd_optics(&ctx, OpticsMode::Design, &params).map(|_| ())
        }
        Command::Optics(OpticsCommand::Eval(a)) => {
            let params = merge_optics(cfg.optics.clone(), a)?;
            cmd_optics(&ctx, OpticsMode::Eval, &params).map(|_| ())
        }
        Command::Simulate(a) => {
            let params = merge_simulate(cfg.simulate.clone(), a);
            cmd_simulate(&ctx, &params).map(|_| ())
        }
        Command::Keyrate(a) => {
            let params = merge_keyrate(cfg.keyrate.clone(), a);
            cmd_keyrate(&ctx, &params).map(|_| ())
        }
    }
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}

pub(crate) fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
