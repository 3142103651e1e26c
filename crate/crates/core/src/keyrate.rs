//! Analytic secure-key-rate lower bounds for `d`-dimensional QKD, the
//! block-biased error entropy, error thresholds and the data-subset
//! statistics of a probability table.
//!
//! All entropies are in bits and use the `0 log 0 = 0` convention, so every
//! function is finite on the closed edges of its domain.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::{Array2, Array3, Array4};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mub::exact_sqrt;
use crate::protocol::table::snap_to_zero;
use crate::protocol::ProbabilityTable;

/// Lower end of the threshold search bracket.
pub const THRESHOLD_LOWER: f64 = 1e-12;
/// Upper end of the threshold search bracket.
pub const THRESHOLD_UPPER: f64 = 1.0 - 1e-6;
/// `|rate|` accepted at a root.
pub const THRESHOLD_RATE_TOL: f64 = 1e-9;
pub const THRESHOLD_MAX_BISECTIONS: usize = 200;
const THRESHOLD_SCAN_POINTS: usize = 4000;

/// `p log2 p` with `0 log 0 = 0`.
fn plog2(p: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else {
        p * p.log2()
    }
}

/// `h_d(x) = -x log2(x / (d - 1)) - (1 - x) log2(1 - x)`.
pub fn shannon_hd(x: f64, d: usize) -> Result<f64> {
    if d < 2 {
        return Err(Error::Domain(format!("h_d needs d >= 2, got {d}")));
    }
    if !(0.0..1.0).contains(&x) {
        return Err(Error::Domain(format!("h_d needs 0 <= x < 1, got {x}")));
    }
    Ok(-(plog2(x) - x * ((d - 1) as f64).log2()) - plog2(1.0 - x))
}

/// Entropy of the block-biased error distribution: the correct outcome with
/// `1 - E_t`, `d - sqrt(d)` out-of-block outcomes with `E_u / (d - 1)` each,
/// and `sqrt(d) - 1` in-block outcomes with `E_b / (sqrt(d) - 1) + E_u / (d - 1)`.
pub fn entropy_block_biased(d: usize, uniform_error: f64, block_error: f64) -> Result<f64> {
    let s = exact_sqrt(d)
        .filter(|s| *s >= 2)
        .ok_or_else(|| Error::InvalidDimension(format!("{d} is not a perfect square >= 4")))?;
    check_split(uniform_error, block_error)?;
    let e_t = uniform_error + block_error;
    let per_uniform = uniform_error / (d - 1) as f64;
    let per_block = block_error / (s - 1) as f64 + per_uniform;
    Ok(-plog2(1.0 - e_t) - (d - s) as f64 * plog2(per_uniform) - (s - 1) as f64 * plog2(per_block))
}

fn check_split(uniform_error: f64, block_error: f64) -> Result<()> {
    if !(uniform_error >= 0.0 && block_error >= 0.0) {
        return Err(Error::Domain(format!(
            "error components must be non-negative, got E_u={uniform_error}, E_b={block_error}"
        )));
    }
    if uniform_error + block_error >= 1.0 {
        return Err(Error::Domain(format!(
            "total error E_u + E_b = {} must be below 1",
            uniform_error + block_error
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bound {
    /// Identical depolarising channels in all `d + 1` bases.
    #[serde(alias = "depolarizing")]
    DepolarizingAllMubs,
    /// Two bases, uniformly distributed errors.
    TwoMubUniform,
    /// Two bases, block-biased errors.
    TwoMubBlock,
}

impl Bound {
    pub fn id(&self) -> &'static str {
        match self {
            Bound::DepolarizingAllMubs => "depolarizing-all-mubs",
            Bound::TwoMubUniform => "two-mub-uniform",
            Bound::TwoMubBlock => "two-mub-block",
        }
    }
}

impl std::str::FromStr for Bound {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "depolarizing" | "depolarizing-all-mubs" => Ok(Bound::DepolarizingAllMubs),
            "two-mub-uniform" | "two-mub" => Ok(Bound::TwoMubUniform),
            "two-mub-block" => Ok(Bound::TwoMubBlock),
            other => Err(Error::InvalidInput(format!("unknown bound '{other}'"))),
        }
    }
}

/// How a total error `E` splits into `E_b = f E` and `E_u = (1 - f) E`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitProfile {
    pub block_fraction: f64,
}

impl SplitProfile {
    pub const UNIFORM: Self = Self { block_fraction: 0.0 };
    /// Split observed in the 25-dimensional experiment (`E_b ~ 0.77 E_t`).
    pub const EXPERIMENT: Self = Self { block_fraction: 0.77 };
    pub const ALL_BLOCK: Self = Self { block_fraction: 1.0 };

    pub fn new(block_fraction: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&block_fraction) {
            return Err(Error::InvalidInput(format!(
                "block fraction must lie in [0, 1], got {block_fraction}"
            )));
        }
        Ok(Self { block_fraction })
    }

    pub fn split(&self, total: f64) -> (f64, f64) {
        let block = self.block_fraction * total;
        (total - block, block)
    }

    pub fn name(&self) -> String {
        match self.block_fraction {
            0.0 => "uniform".into(),
            1.0 => "all-block".into(),
            f => format!("block-fraction={f}"),
        }
    }
}

impl std::str::FromStr for SplitProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Self::UNIFORM),
            "experiment" | "experimental" => Ok(Self::EXPERIMENT),
            "all-block" => Ok(Self::ALL_BLOCK),
            other => other
                .parse::<f64>()
                .map_err(|_| Error::InvalidInput(format!("unknown split profile '{other}'")))
                .and_then(Self::new),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateInputs {
    pub total_error: f64,
    pub uniform_error: f64,
    pub block_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyRateReport {
    pub bound: Bound,
    pub dim: usize,
    pub inputs: RateInputs,
    /// Bits per sifted photon.
    pub rate: f64,
    /// Total error at which the same bound, with the same split, reaches zero.
    pub threshold: Option<f64>,
}

/// `R = log2 d - h_d((d+1)E/d) - ((d+1)/d) E log2(d+1)`, with `E` the mean
/// error over all `d + 1` bases.
pub fn rate_depolarizing(d: usize, error: f64) -> Result<KeyRateReport> {
    let rate = depolarizing_value(d, error)?;
    Ok(KeyRateReport {
        bound: Bound::DepolarizingAllMubs,
        dim: d,
        inputs: RateInputs {
            total_error: error,
            uniform_error: error,
            block_error: 0.0,
        },
        rate,
        threshold: threshold(Bound::DepolarizingAllMubs, SplitProfile::UNIFORM, d)
            .ok()
            .map(|t| t.threshold),
    })
}

fn depolarizing_value(d: usize, error: f64) -> Result<f64> {
    if d < 2 {
        return Err(Error::Domain(format!("need d >= 2, got {d}")));
    }
    if error < 0.0 {
        return Err(Error::Domain(format!("error must be non-negative, got {error}")));
    }
    let q = (d + 1) as f64 * error / d as f64;
    if q >= 1.0 {
        return Err(Error::Domain(format!("(d+1)E/d = {q} must be below 1")));
    }
    Ok((d as f64).log2() - shannon_hd(q, d)? - q * ((d + 1) as f64).log2())
}

/// `R = log2 d - 2 h_d(E_u, E_b)`; with `E_b = 0` this is the uniform
/// two-basis bound and any `d >= 2` is accepted.
pub fn rate_two_mub(d: usize, uniform_error: f64, block_error: f64) -> Result<KeyRateReport> {
    let rate = two_mub_value(d, uniform_error, block_error)?;
    let total = uniform_error + block_error;
    let (bound, profile) = if block_error == 0.0 {
        (Bound::TwoMubUniform, SplitProfile::UNIFORM)
    } else {
        (Bound::TwoMubBlock, SplitProfile::new(block_error / total)?)
    };
    Ok(KeyRateReport {
        bound,
        dim: d,
        inputs: RateInputs {
            total_error: total,
            uniform_error,
            block_error,
        },
        rate,
        threshold: threshold(bound, profile, d).ok().map(|t| t.threshold),
    })
}

fn two_mub_value(d: usize, uniform_error: f64, block_error: f64) -> Result<f64> {
    check_split(uniform_error, block_error)?;
    let h = if block_error == 0.0 {
        shannon_hd(uniform_error, d)?
    } else {
        entropy_block_biased(d, uniform_error, block_error)?
    };
    Ok((d as f64).log2() - 2.0 * h)
}

/// Rate of `bound` at total error `total` split by `profile`.
pub fn rate_at(bound: Bound, profile: SplitProfile, d: usize, total: f64) -> Result<f64> {
    match bound {
        Bound::DepolarizingAllMubs => {
            if profile.block_fraction != 0.0 {
                return Err(Error::InvalidInput(
                    "the depolarising bound only admits the uniform profile".into(),
                ));
            }
            depolarizing_value(d, total)
        }
        Bound::TwoMubUniform => {
            if profile.block_fraction != 0.0 {
                return Err(Error::InvalidInput(
                    "the uniform two-basis bound only admits the uniform profile".into(),
                ));
            }
            two_mub_value(d, total, 0.0)
        }
        Bound::TwoMubBlock => {
            let (u, b) = profile.split(total);
            two_mub_value(d, u, b)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub threshold: f64,
    /// Rate at the returned point.
    pub residual: f64,
    /// Whether the rate was non-increasing from the bracket start to the root.
    pub monotone: bool,
    /// The rate touches zero without changing sign (a double root).
    pub tangential: bool,
}

/// Smallest total error in `[1e-12, 1 - 1e-6]` at which the rate of `bound`
/// along `profile` reaches zero.
///
/// The bracket is scanned for the first non-positive rate and the crossing
/// refined by bisection. When the rate only touches zero (the all-block
/// profile reaches exactly `log2 d` of entropy at `E = 1 - 1/sqrt(d)`), the
/// minimum is located by golden-section search and accepted if its rate is
/// within [`THRESHOLD_RATE_TOL`] of zero.
pub fn threshold(bound: Bound, profile: SplitProfile, d: usize) -> Result<Threshold> {
    let mut hi = THRESHOLD_UPPER;
    if bound == Bound::DepolarizingAllMubs {
        hi = hi.min(d as f64 / (d + 1) as f64 * (1.0 - 1e-12));
    }
    let lo = THRESHOLD_LOWER;
    let f = |e: f64| rate_at(bound, profile, d, e);
    if f(lo)? <= 0.0 {
        return Err(Error::NoThreshold(format!(
            "{} rate is not positive at zero error for d={d}",
            bound.id()
        )));
    }
    let n = THRESHOLD_SCAN_POINTS;
    let xs: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
    let ys = xs.iter().map(|&x| f(x)).collect::<Result<Vec<f64>>>()?;

    let monotone_to = |end: usize| ys[..=end].windows(2).all(|w| w[1] <= w[0] + 1e-12);

    if let Some(i) = ys.iter().position(|&y| y <= 0.0) {
        let (mut a, mut b) = (xs[i - 1], xs[i]);
        let mut mid = b;
        let mut residual = ys[i];
        for _ in 0..THRESHOLD_MAX_BISECTIONS {
            mid = 0.5 * (a + b);
            residual = f(mid)?;
            if residual > 0.0 {
                a = mid;
            } else {
                b = mid;
            }
            if b - a < 1e-15 {
                break;
            }
        }
        if residual.abs() >= THRESHOLD_RATE_TOL {
            return Err(Error::NoThreshold(format!(
                "bisection stalled at E={mid} with rate {residual}"
            )));
        }
        return Ok(Threshold {
            threshold: mid,
            residual,
            monotone: monotone_to(i),
            tangential: false,
        });
    }

    let (imin, _) = ys
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))
        .expect("non-empty scan");
    let (mut a, mut b) = (xs[imin.saturating_sub(1)], xs[(imin + 1).min(n)]);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..THRESHOLD_MAX_BISECTIONS {
        let c = b - phi * (b - a);
        let e = a + phi * (b - a);
        if f(c)? < f(e)? {
            b = e;
        } else {
            a = c;
        }
        if b - a < 1e-12 {
            break;
        }
    }
    let x = 0.5 * (a + b);
    let residual = f(x)?;
    if residual.abs() < THRESHOLD_RATE_TOL {
        Ok(Threshold {
            threshold: x,
            residual,
            monotone: monotone_to(imin),
            tangential: true,
        })
    } else {
        Err(Error::NoThreshold(format!(
            "{} rate stays positive on the bracket for d={d} (minimum {residual:.3e} at E={x:.6})",
            bound.id()
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub total_error: f64,
    pub uniform_error: f64,
    pub block_error: f64,
    pub rate: f64,
}

/// Rate along `errors` (total error values), evaluated in parallel and
/// returned in input order.
pub fn rate_curve(bound: Bound, d: usize, errors: &[f64], profile: SplitProfile) -> Result<Vec<CurvePoint>> {
    errors
        .par_iter()
        .map(|&e| {
            let (uniform_error, block_error) = match bound {
                Bound::TwoMubBlock => profile.split(e),
                _ => (e, 0.0),
            };
            Ok(CurvePoint {
                total_error: e,
                uniform_error,
                block_error,
                rate: rate_at(bound, profile, d, e)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSidecar {
    pub bound: Bound,
    pub dim: usize,
    pub profile: SplitProfile,
    pub threshold_rate_tol: f64,
    pub threshold_bracket: [f64; 2],
}

/// Writes `E,rate` (depolarising) or `E_u,E_b,rate` (two-basis) rows plus a
/// JSON sidecar next to `path`.
pub fn write_curve(path: &Path, bound: Bound, d: usize, profile: SplitProfile, points: &[CurvePoint]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    match bound {
        Bound::DepolarizingAllMubs => {
            writeln!(w, "E,rate")?;
            for p in points {
                writeln!(w, "{},{}", p.total_error, p.rate)?;
            }
        }
        _ => {
            writeln!(w, "E_u,E_b,rate")?;
            for p in points {
                writeln!(w, "{},{},{}", p.uniform_error, p.block_error, p.rate)?;
            }
        }
    }
    w.flush()?;
    let meta = CurveSidecar {
        bound,
        dim: d,
        profile,
        threshold_rate_tol: THRESHOLD_RATE_TOL,
        threshold_bracket: [THRESHOLD_LOWER, THRESHOLD_UPPER],
    };
    let mut s = BufWriter::new(File::create(path.with_extension("json"))?);
    serde_json::to_writer_pretty(&mut s, &meta)?;
    s.write_all(b"\n")?;
    Ok(s.flush()?)
}

/// The five nested data subsets of a table with matched basis indexing.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetStats {
    /// `E = 1 - (1/K) sum_k sum_a p(a, a | k, k)`.
    pub mean_error: f64,
    /// `E_k = 1 - sum_a p(a, a | k, k)`.
    pub basis_error: Vec<f64>,
    /// `E_{k,l} = 1 - sum_a p(a, a | k, l)`, axes `(k, l)`.
    pub pair_error: Array2<f64>,
    /// `p(a, b | k, k)`, axes `(k, a, b)`.
    pub matched_probs: Array3<f64>,
    /// `p(a, b | k, l)`, axes `(k, l, a, b)`.
    pub all_probs: Array4<f64>,
}

pub fn subset_stats(table: &ProbabilityTable) -> Result<SubsetStats> {
    let (kk, ll, d) = (table.alice_bases(), table.bob_bases(), table.dim());
    if kk != ll {
        return Err(Error::InvalidInput(format!(
            "subset statistics need matched basis lists, got K={kk}, L={ll}"
        )));
    }
    for k in 1..=kk {
        for l in 1..=ll {
            let s = table.setting(k, l).sum();
            if (s - 1.0).abs() > crate::protocol::NORMALIZATION_TOL {
                return Err(Error::InvalidInput(format!("setting ({k}, {l}) sums to {s}")));
            }
        }
    }
    let pair_error = Array2::from_shape_fn((kk, ll), |(k, l)| {
        snap_to_zero(1.0 - (1..=d).map(|a| table.get(a, a, k + 1, l + 1)).sum::<f64>())
    });
    let basis_error: Vec<f64> = (0..kk).map(|k| pair_error[[k, k]]).collect();
    let correct: f64 = (1..=kk)
        .flat_map(|k| (1..=d).map(move |a| (a, k)))
        .map(|(a, k)| table.get(a, a, k, k))
        .sum();
    let mean_error = snap_to_zero(1.0 - correct / kk as f64);
    let matched_probs = Array3::from_shape_fn((kk, d, d), |(k, a, b)| table.get(a + 1, b + 1, k + 1, k + 1));
    Ok(SubsetStats {
        mean_error,
        basis_error,
        pair_error,
        matched_probs,
        all_probs: table.values().clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shannon_edges() {
        assert_eq!(shannon_hd(0.0, 5).unwrap(), 0.0);
        assert!((shannon_hd(0.5, 2).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(shannon_hd(1.0, 5), Err(Error::Domain(_))));
        assert!(matches!(shannon_hd(-0.1, 5), Err(Error::Domain(_))));
        assert!(matches!(shannon_hd(0.1, 1), Err(Error::Domain(_))));
    }

    #[test]
    fn rate_at_zero_error_is_log_d() {
        for d in [2usize, 3, 5, 7, 25] {
            let r = rate_depolarizing(d, 0.0).unwrap();
            assert!((r.rate - (d as f64).log2()).abs() < 1e-12);
            assert!((rate_two_mub(d, 0.0, 0.0).unwrap().rate - (d as f64).log2()).abs() < 1e-12);
        }
        assert_eq!(rate_two_mub(2, 0.0, 0.0).unwrap().rate, 1.0);
    }

    #[test]
    fn block_entropy_edges() {
        assert_eq!(entropy_block_biased(25, 0.0, 0.0).unwrap(), 0.0);
        for d in [4usize, 9, 25] {
            for e in [0.01, 0.2, 0.6] {
                let a = entropy_block_biased(d, e, 0.0).unwrap();
                let b = shannon_hd(e, d).unwrap();
                assert!((a - b).abs() < 1e-12);
            }
        }
        assert!(matches!(
            entropy_block_biased(24, 0.1, 0.1),
            Err(Error::InvalidDimension(_))
        ));
        assert!(matches!(
            entropy_block_biased(1, 0.0, 0.0),
            Err(Error::InvalidDimension(_))
        ));
        assert!(matches!(entropy_block_biased(25, 0.5, 0.5), Err(Error::Domain(_))));
        assert!(matches!(rate_two_mub(24, 0.1, 0.1), Err(Error::InvalidDimension(_))));
    }

    #[test]
    fn depolarizing_domain() {
        assert!(matches!(rate_depolarizing(5, 0.9), Err(Error::Domain(_))));
        assert!(matches!(rate_depolarizing(5, -0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn report_threshold_uses_same_split() {
        let r = rate_two_mub(25, 0.073, 0.248).unwrap();
        assert_eq!(r.bound, Bound::TwoMubBlock);
        let t = r.threshold.unwrap();
        let (u, b) = SplitProfile::new(0.248 / 0.321).unwrap().split(t);
        assert!(rate_two_mub(25, u, b).unwrap().rate.abs() < 1e-9);
    }

    #[test]
    fn threshold_profile_mismatch() {
        assert!(rate_at(Bound::DepolarizingAllMubs, SplitProfile::ALL_BLOCK, 5, 0.1).is_err());
        assert!(threshold(Bound::TwoMubUniform, SplitProfile::EXPERIMENT, 25).is_err());
    }

    #[test]
    fn all_block_threshold_is_tangential() {
        let t = threshold(Bound::TwoMubBlock, SplitProfile::ALL_BLOCK, 25).unwrap();
        assert!(t.tangential);
        assert!((t.threshold - 0.8).abs() < 1e-4, "{t:?}");
    }

    #[test]
    fn profile_parsing() {
        assert_eq!("uniform".parse::<SplitProfile>().unwrap(), SplitProfile::UNIFORM);
        assert_eq!("experiment".parse::<SplitProfile>().unwrap(), SplitProfile::EXPERIMENT);
        assert_eq!("0.5".parse::<SplitProfile>().unwrap().block_fraction, 0.5);
        assert!("1.5".parse::<SplitProfile>().is_err());
        assert_eq!("depolarizing".parse::<Bound>().unwrap(), Bound::DepolarizingAllMubs);
    }

    #[test]
    fn curve_starts_at_log_d() {
        let pts = rate_curve(Bound::TwoMubBlock, 25, &[0.0, 0.1, 0.321], SplitProfile::EXPERIMENT).unwrap();
        assert!((pts[0].rate - 25f64.log2()).abs() < 1e-12);
        assert!(pts[1].rate > pts[2].rate);
    }
}
