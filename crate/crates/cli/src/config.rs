//! Versioned TOML run configuration.
//!
//! ```toml
//! version = 1
//! seed = 7
//! out = "runs/d25"
//!
//! [simulate]
//! d = 25
//! uniform_error = 0.073
//! block_error = 0.248
//! ```
//!
//! Each command reads its own section; missing keys take the defaults below
//! and command-line flags override both. Every run writes the fully resolved
//! configuration to `resolved_config.toml` in its output directory, which can
//! be passed back with `--config` to repeat the run.

use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::ValueEnum;
use hdqkd::keyrate::Bound;
use hdqkd::optics::{
    Arrangement, DEFAULT_APERTURE_RADIUS, DEFAULT_APERTURE_SPACING, DEFAULT_DETECTOR_RADIUS, DEFAULT_ITERATIONS,
    DEFAULT_PLANES, DEFAULT_PLANE_SPACING, DEFAULT_WAVELENGTH,
};
use serde::{Deserialize, Serialize};

use crate::exit::usage;

pub const CONFIG_VERSION: u32 = 1;
pub const RESOLVED_CONFIG_FILE: &str = "resolved_config.toml";
/// Overrides the default output directory when `--out` is not given.
pub const OUT_DIR_ENV: &str = "HDQKD_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "out";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: Option<u32>,
    /// Informational; set in resolved snapshots.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mub: Option<MubParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optics: Option<OpticsParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keyrate: Option<KeyrateParams>,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let cfg: RunConfig = toml::from_str(text)?;
        match cfg.version {
            Some(CONFIG_VERSION) => Ok(cfg),
            Some(v) => Err(usage(format!(
                "unsupported config version {v}; this build reads version {CONFIG_VERSION}"
            ))),
            None => Err(usage(format!("config must declare `version = {CONFIG_VERSION}`"))),
        }
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string(self)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum MubFamily {
    /// Computational basis plus the `d` Wootters-Fields bases (prime `d`).
    WhAll,
    /// Row-DFT and column-DFT bases (perfect-square `d`).
    SqrtPair,
    Dft,
    Computational,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MubParams {
    pub d: usize,
    pub family: MubFamily,
}

impl Default for MubParams {
    fn default() -> Self {
        Self {
            d: 5,
            family: MubFamily::WhAll,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum OutputModes {
    /// Detector disks of `detector_radius` at the aperture centres.
    Spots,
    /// The input aperture modes themselves.
    Inputs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Intended {
    /// Sort the chosen basis: state `k` to port `k`.
    Basis,
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OpticsParams {
    pub d: usize,
    /// `dft`, `computational`, `row-dft`, `column-dft` or `wh:<r>`.
    pub basis: String,
    /// `square` or `line`; defaults to `square` for perfect squares.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub arrangement: Option<Arrangement>,
    pub nx: usize,
    pub ny: usize,
    pub pitch: f64,
    pub wavelength: f64,
    pub planes: usize,
    pub plane_spacing: f64,
    pub iterations: usize,
    pub aperture_radius: f64,
    pub aperture_spacing: f64,
    pub detector_radius: f64,
    pub output_modes: OutputModes,
    pub intended: Intended,
    /// Stack to evaluate; `eval` uses an all-zero stack when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stack: Option<PathBuf>,
    /// Also write each mask as a 16-bit PGM image.
    pub pgm: bool,
}

impl Default for OpticsParams {
    fn default() -> Self {
        Self {
            d: 5,
            basis: "dft".into(),
            arrangement: None,
            nx: 256,
            ny: 256,
            pitch: 10e-6,
            wavelength: DEFAULT_WAVELENGTH,
            planes: DEFAULT_PLANES,
            plane_spacing: DEFAULT_PLANE_SPACING,
            iterations: DEFAULT_ITERATIONS,
            aperture_radius: DEFAULT_APERTURE_RADIUS,
            aperture_spacing: DEFAULT_APERTURE_SPACING,
            detector_radius: DEFAULT_DETECTOR_RADIUS,
            output_modes: OutputModes::Spots,
            intended: Intended::Basis,
            stack: None,
            pgm: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SimFamily {
    SqrtPair,
    WhAll,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateParams {
    pub d: usize,
    pub family: SimFamily,
    pub uniform_error: f64,
    pub block_error: f64,
    /// Detected pairs per second.
    pub pair_rate: f64,
    pub accidental_rate: f64,
    /// Seconds per basis setting.
    pub integration_time: f64,
    pub coincidence_window: f64,
    /// Rounds in the simulated session; 0 skips the session.
    pub rounds: usize,
    /// Basis choice weights; empty means uniform.
    pub weights: Vec<f64>,
}

impl Default for SimulateParams {
    fn default() -> Self {
        Self {
            d: 25,
            family: SimFamily::SqrtPair,
            uniform_error: 0.0,
            block_error: 0.0,
            pair_rate: 1e5,
            accidental_rate: 0.0,
            integration_time: 10.0,
            coincidence_window: 1e-9,
            rounds: 100_000,
            weights: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CurveKind {
    /// Rate against total error for the chosen bound and split.
    Rate,
    /// Threshold error against dimension.
    Thresholds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KeyrateParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<Bound>,
    #[serde(rename = "E", skip_serializing_if = "Option::is_none")]
    pub error: Option<f64>,
    #[serde(rename = "E_u", skip_serializing_if = "Option::is_none")]
    pub uniform_error: Option<f64>,
    #[serde(rename = "E_b", skip_serializing_if = "Option::is_none")]
    pub block_error: Option<f64>,
    /// Count table to read instead of explicit errors.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counts: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curve: Option<CurveKind>,
    /// Inclusive `lo:hi` dimension range for the threshold sweep.
    pub d_range: String,
    /// Split profile for rate curves: `uniform`, `experiment`, `all-block` or a block fraction.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profile: Option<String>,
    pub points: usize,
}

impl Default for KeyrateParams {
    fn default() -> Self {
        Self {
            d: None,
            bound: None,
            error: None,
            uniform_error: None,
            block_error: None,
            counts: None,
            curve: None,
            d_range: "2:32".into(),
            profile: None,
            points: 201,
        }
    }
}
