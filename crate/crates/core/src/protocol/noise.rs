use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::table::{snap_to_zero, ProbabilityTable};
use crate::error::{Error, Result};
use crate::mub::{exact_sqrt, GridIndex};

/// Which modes share a block with a given outcome on the `sqrt(d) x sqrt(d)`
/// grid. Row-DFT measurements interfere the modes of one grid row; column-DFT
/// measurements those of one grid column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlockAlignment {
    Row,
    Column,
}

impl BlockAlignment {
    /// Whether outcomes `x` and `y` (1-based flat indices) share a block.
    pub fn same_block(self, grid: &GridIndex, x: usize, y: usize) -> bool {
        let (rx, cx) = grid.coords(x);
        let (ry, cy) = grid.coords(y);
        match self {
            BlockAlignment::Row => rx == ry,
            BlockAlignment::Column => cx == cy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoiseKind {
    Uniform,
    BlockBiased {
        /// Share of the total error that stays inside the block.
        block_fraction: f64,
        /// One alignment per matched basis, or a single entry used for all.
        alignments: Vec<BlockAlignment>,
    },
}

/// Error channel acting on Bob's outcome in matched-basis settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub total_error: f64,
    #[serde(flatten)]
    pub kind: NoiseKind,
}

impl NoiseModel {
    pub fn uniform(total_error: f64) -> Result<Self> {
        let m = Self {
            total_error,
            kind: NoiseKind::Uniform,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn block_biased(total_error: f64, block_fraction: f64, alignments: Vec<BlockAlignment>) -> Result<Self> {
        let m = Self {
            total_error,
            kind: NoiseKind::BlockBiased {
                block_fraction,
                alignments,
            },
        };
        m.validate()?;
        Ok(m)
    }

    /// Builds the model from the uniform and block error masses.
    pub fn from_components(uniform_error: f64, block_error: f64, alignments: Vec<BlockAlignment>) -> Result<Self> {
        if uniform_error < 0.0 || block_error < 0.0 {
            return Err(Error::InvalidNoise("error components must be non-negative".into()));
        }
        let total = uniform_error + block_error;
        if block_error == 0.0 {
            return Self::uniform(total);
        }
        Self::block_biased(total, block_error / total, alignments)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.total_error) {
            return Err(Error::InvalidNoise(format!(
                "total error must lie in [0, 1), got {}",
                self.total_error
            )));
        }
        if let NoiseKind::BlockBiased {
            block_fraction,
            alignments,
        } = &self.kind
        {
            if !(0.0..=1.0).contains(block_fraction) {
                return Err(Error::InvalidNoise(format!(
                    "block fraction must lie in [0, 1], got {block_fraction}"
                )));
            }
            if alignments.is_empty() {
                return Err(Error::InvalidNoise("block-biased noise needs a block alignment".into()));
            }
        }
        Ok(())
    }

    pub fn block_fraction(&self) -> f64 {
        match &self.kind {
            NoiseKind::Uniform => 0.0,
            NoiseKind::BlockBiased { block_fraction, .. } => *block_fraction,
        }
    }

    /// `E_u`.
    pub fn uniform_error(&self) -> f64 {
        self.total_error - self.block_error()
    }

    /// `E_b`.
    pub fn block_error(&self) -> f64 {
        self.total_error * self.block_fraction()
    }

    fn alignment_for(&self, setting: usize, settings: usize) -> Result<Option<BlockAlignment>> {
        match &self.kind {
            NoiseKind::Uniform => Ok(None),
            NoiseKind::BlockBiased { alignments, .. } => match alignments.len() {
                1 => Ok(Some(alignments[0])),
                n if n == settings => Ok(Some(alignments[setting])),
                n => Err(Error::InvalidNoise(format!(
                    "{n} block alignments given for {settings} matched settings"
                ))),
            },
        }
    }
}

/// Column-stochastic channel `N[a][a']` on Bob's outcome.
fn channel(d: usize, model: &NoiseModel, alignment: Option<BlockAlignment>) -> Result<Array2<f64>> {
    let e_t = model.total_error;
    let e_u = model.uniform_error();
    let e_b = model.block_error();
    let grid = match alignment {
        Some(_) => {
            let g = GridIndex::new(d)?;
            if g.side() < 2 {
                return Err(Error::InvalidDimension(format!(
                    "block-biased noise needs d >= 4, got {d}"
                )));
            }
            Some(g)
        }
        None => None,
    };
    if d == 1 {
        return Ok(Array2::from_elem((1, 1), 1.0));
    }
    let per_uniform = e_u / (d - 1) as f64;
    let per_block = match grid {
        Some(g) => e_b / (g.side() - 1) as f64,
        None => 0.0,
    };
    Ok(Array2::from_shape_fn((d, d), |(a, src)| {
        if a == src {
            1.0 - e_t
        } else {
            let in_block = match (grid, alignment) {
                (Some(g), Some(al)) => al.same_block(&g, a + 1, src + 1),
                _ => false,
            };
            per_uniform + if in_block { per_block } else { 0.0 }
        }
    }))
}

/// Passes Bob's outcome through the noise channel in every matched setting
/// `(k, k)`; mismatched settings are returned unchanged.
///
/// For a perfectly correlated input the matched conditional becomes
/// `1 - E_t` on the correct outcome, `E_u / (d - 1)` on each out-of-block
/// outcome and `E_u / (d - 1) + E_b / (sqrt(d) - 1)` on each in-block one.
pub fn apply_noise(table: &ProbabilityTable, model: &NoiseModel) -> Result<ProbabilityTable> {
    model.validate()?;
    let d = table.dim();
    if d == 1 && model.total_error > 0.0 {
        return Err(Error::InvalidNoise(
            "a one-dimensional system has no wrong outcome".into(),
        ));
    }
    if matches!(model.kind, NoiseKind::BlockBiased { .. }) && exact_sqrt(d).is_none() {
        return Err(Error::InvalidDimension(format!(
            "block-biased noise needs a perfect-square dimension, got {d}"
        )));
    }
    let matched = table.alice_bases().min(table.bob_bases());
    let mut out = table.clone();
    for k in 0..matched {
        let n = channel(d, model, model.alignment_for(k, matched)?)?;
        let block = table.setting(k + 1, k + 1).to_owned();
        let noisy = n.dot(&block);
        out.values_mut().slice_mut(ndarray::s![k, k, .., ..]).assign(&noisy);
    }
    Ok(out)
}

/// Observed error split of one matched setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseDecomposition {
    pub total_error: f64,
    pub uniform_error: f64,
    pub block_error: f64,
    /// Set when the rescaled out-of-block error exceeded the total error. The
    /// reported split is then `E_u = E_t`, `E_b = 0`, and `raw_block_error`
    /// keeps the negative value.
    pub block_clamped: bool,
    pub raw_block_error: f64,
}

/// Splits the error of matched setting `(k, k)` (1-based) into uniform and
/// block parts. Sent states are weighted uniformly.
///
/// `E_t = 1 - mean_b p(b|b)`; `E_u` is the mean out-of-block error mass
/// scaled by `(d - 1) / (d - sqrt(d))`; `E_b = E_t - E_u`.
pub fn decompose_errors(table: &ProbabilityTable, k: usize, alignment: BlockAlignment) -> Result<NoiseDecomposition> {
    let d = table.dim();
    let grid = GridIndex::new(d)?;
    let s = grid.side();
    if s < 2 {
        return Err(Error::InvalidDimension(format!("decomposition needs d >= 4, got {d}")));
    }
    if k == 0 || k > table.alice_bases().min(table.bob_bases()) {
        return Err(Error::InvalidInput(format!("no matched setting k={k}")));
    }
    let mut correct = 0.0;
    let mut outside = 0.0;
    for b in 1..=d {
        correct += table.conditional(b, b, k, k);
        for a in 1..=d {
            if a != b && !alignment.same_block(&grid, a, b) {
                outside += table.conditional(a, b, k, k);
            }
        }
    }
    let total_error = snap_to_zero(1.0 - correct / d as f64);
    let uniform_raw = outside / d as f64 * (d - 1) as f64 / (d - s) as f64;
    let raw_block_error = total_error - uniform_raw;
    // Exact tables can leave a few ulps of negative block error.
    let clamped = raw_block_error < -1e-12;
    let (uniform_error, block_error) = if clamped {
        (total_error, 0.0)
    } else {
        (snap_to_zero(uniform_raw), snap_to_zero(raw_block_error))
    };
    Ok(NoiseDecomposition {
        total_error,
        uniform_error,
        block_error,
        block_clamped: clamped,
        raw_block_error,
    })
}
