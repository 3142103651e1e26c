use ndarray::{Array4, ArrayView2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::mub::Basis;

/// Allowed deviation of each setting's total probability from one.
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// Error rates computed as `1 - sum` can come out a few ulps below zero.
pub(crate) fn snap_to_zero(x: f64) -> f64 {
    if x < 0.0 && x > -NORMALIZATION_TOL {
        0.0
    } else {
        x
    }
}

/// Joint outcome probabilities `p(a, b | k, l)` for every basis setting,
/// stored on axes `(k, l, a, b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityTable {
    values: Array4<f64>,
}

impl ProbabilityTable {
    /// Checks non-negativity and per-setting normalisation.
    pub fn new(values: Array4<f64>) -> Result<Self> {
        let (k, l, d, d2) = values.dim();
        if d == 0 || d != d2 || k == 0 || l == 0 {
            return Err(Error::InvalidInput(format!(
                "probability table axes (k, l, a, b) = {:?} are not valid",
                values.dim()
            )));
        }
        let table = Self { values };
        table.validate()?;
        Ok(table)
    }

    fn validate(&self) -> Result<()> {
        if let Some(v) = self.values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidInput(format!(
                "probability {v} is negative or not finite"
            )));
        }
        for k in 0..self.alice_bases() {
            for l in 0..self.bob_bases() {
                let s = self.setting(k + 1, l + 1).sum();
                if (s - 1.0).abs() > NORMALIZATION_TOL {
                    return Err(Error::InvalidInput(format!(
                        "setting (k={}, l={}) sums to {s}, not 1",
                        k + 1,
                        l + 1
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.values.dim().2
    }

    pub fn alice_bases(&self) -> usize {
        self.values.dim().0
    }

    pub fn bob_bases(&self) -> usize {
        self.values.dim().1
    }

    /// `p(a, b | k, l)`, all indices 1-based.
    pub fn get(&self, a: usize, b: usize, k: usize, l: usize) -> f64 {
        self.values[[k - 1, l - 1, a - 1, b - 1]]
    }

    /// The `d x d` block `[a][b]` (0-based) of setting `(k, l)` (1-based).
    pub fn setting(&self, k: usize, l: usize) -> ArrayView2<'_, f64> {
        use ndarray::s;
        self.values.slice(s![k - 1, l - 1, .., ..])
    }

    pub fn values(&self) -> &Array4<f64> {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut Array4<f64> {
        &mut self.values
    }

    /// `p(a | b, k, l)`: Bob's outcome distribution for sent state `b`.
    pub fn conditional(&self, a: usize, b: usize, k: usize, l: usize) -> f64 {
        let block = self.setting(k, l);
        let sent: f64 = block.column(b - 1).sum();
        if sent > 0.0 {
            block[[a - 1, b - 1]] / sent
        } else {
            0.0
        }
    }
}

/// Raw coincidence counts `c(a, b | k, l)`, axes `(k, l, a, b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CountTable {
    pub counts: Array4<u64>,
    /// Seconds per basis setting.
    pub integration_time: f64,
    /// Seconds.
    pub coincidence_window: f64,
    pub seed: Option<u64>,
    pub generator: Option<String>,
}

impl CountTable {
    pub fn dim(&self) -> usize {
        self.counts.dim().2
    }

    pub fn alice_bases(&self) -> usize {
        self.counts.dim().0
    }

    pub fn bob_bases(&self) -> usize {
        self.counts.dim().1
    }

    pub fn get(&self, a: usize, b: usize, k: usize, l: usize) -> u64 {
        self.counts[[k - 1, l - 1, a - 1, b - 1]]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Statistics of the maximally entangled state `sum_n |n>|n> / sqrt(d)`:
/// `p(a, b | k, l) = |sum_n conj(A_k[n][b]) conj(B_l[n][a])|^2 / d`.
///
/// With Bob's bases the entry-wise conjugates of Alice's, matched settings
/// are perfectly correlated.
pub fn ideal_prob_table(alice: &[Basis], bob: &[Basis]) -> Result<ProbabilityTable> {
    let Some(first) = alice.first().or(bob.first()) else {
        return Err(Error::InvalidInput("no bases given".into()));
    };
    if alice.is_empty() || bob.is_empty() {
        return Err(Error::InvalidInput("both parties need at least one basis".into()));
    }
    let d = first.dim();
    if alice.iter().chain(bob).any(|b| b.dim() != d) {
        return Err(Error::InvalidInput("all bases must share one dimension".into()));
    }
    let mut values = Array4::zeros((alice.len(), bob.len(), d, d));
    for (k, ak) in alice.iter().enumerate() {
        let am = ak.amplitudes();
        for (l, bl) in bob.iter().enumerate() {
            let bm = bl.amplitudes();
            for a in 0..d {
                for b in 0..d {
                    let amp: Complex64 = (0..d).map(|n| am[[n, b]].conj() * bm[[n, a]].conj()).sum();
                    values[[k, l, a, b]] = amp.norm_sqr() / d as f64;
                }
            }
        }
    }
    // Rounding can leave sums a few ulps away from one; the check is still enforced.
    ProbabilityTable::new(values)
}

/// Normalises counts per sent state and applies a uniform prior over sent
/// states: `p(a, b | k, l) = c(a, b | k, l) / (d * sum_a' c(a', b | k, l))`.
pub fn normalize_counts(counts: &CountTable) -> Result<ProbabilityTable> {
    let (kk, ll, d, _) = counts.counts.dim();
    let mut values = Array4::zeros((kk, ll, d, d));
    for k in 0..kk {
        for l in 0..ll {
            for b in 0..d {
                let sent: u64 = (0..d).map(|a| counts.counts[[k, l, a, b]]).sum();
                if sent == 0 {
                    return Err(Error::InsufficientData {
                        b: b + 1,
                        k: k + 1,
                        l: l + 1,
                    });
                }
                for a in 0..d {
                    values[[k, l, a, b]] = counts.counts[[k, l, a, b]] as f64 / (sent as f64 * d as f64);
                }
            }
        }
    }
    ProbabilityTable::new(values)
}
