//! Poisson coincidence counts and round-by-round sessions.
//!
//! Randomness comes from ChaCha20 keyed by `seed_from_u64(seed)`. Every basis
//! setting (for counts) and every block of [`ROUNDS_PER_STREAM`] rounds (for
//! sessions) draws from its own ChaCha stream, so results do not depend on
//! how the work is split across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use ndarray::Array4;

use super::noise::{apply_noise, NoiseModel};
use super::table::{ideal_prob_table, CountTable, ProbabilityTable};
use crate::error::{Error, Result};
use crate::mub::Basis;

pub const COUNT_GENERATOR_ID: &str = "chacha20:seed_from_u64:stream=k*L+l";
pub const SESSION_GENERATOR_ID: &str = "chacha20:seed_from_u64:stream=2^63+round/4096";

const ROUNDS_PER_STREAM: usize = 4096;
const SESSION_STREAM_BASE: u64 = 1 << 63;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountSettings {
    /// Detected pairs per second.
    pub pair_rate: f64,
    /// Accidental coincidences per second, spread evenly over all `(a, b)`.
    pub accidental_rate: f64,
    /// Seconds per basis setting.
    pub integration_time: f64,
    /// Seconds; carried as metadata.
    pub coincidence_window: f64,
}

impl CountSettings {
    pub fn validate(&self) -> Result<()> {
        let ok = self.pair_rate.is_finite()
            && self.pair_rate >= 0.0
            && self.accidental_rate.is_finite()
            && self.accidental_rate >= 0.0
            && self.integration_time.is_finite()
            && self.integration_time > 0.0
            && self.coincidence_window >= 0.0;
        if !ok {
            return Err(Error::InvalidInput(format!(
                "rates must be >= 0 and integration time > 0, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Draws `c(a, b | k, l) ~ Poisson(T (R p(a, b | k, l) + R_acc / d^2))`.
pub fn sample_counts(table: &ProbabilityTable, settings: &CountSettings, seed: u64) -> Result<CountTable> {
    settings.validate()?;
    let (kk, ll, d) = (table.alice_bases(), table.bob_bases(), table.dim());
    let floor = settings.accidental_rate / (d * d) as f64;
    let blocks: Vec<Vec<u64>> = (0..kk * ll)
        .into_par_iter()
        .map(|idx| {
            let (k, l) = (idx / ll, idx % ll);
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(idx as u64);
            let block = table.setting(k + 1, l + 1);
            let mut out = Vec::with_capacity(d * d);
            for a in 0..d {
                for b in 0..d {
                    let mean = settings.integration_time * (settings.pair_rate * block[[a, b]] + floor);
                    out.push(poisson(&mut rng, mean));
                }
            }
            out
        })
        .collect();
    let mut counts = Array4::zeros((kk, ll, d, d));
    for (idx, block) in blocks.into_iter().enumerate() {
        let (k, l) = (idx / ll, idx % ll);
        for (i, c) in block.into_iter().enumerate() {
            counts[[k, l, i / d, i % d]] = c;
        }
    }
    Ok(CountTable {
        counts,
        integration_time: settings.integration_time,
        coincidence_window: settings.coincidence_window,
        seed: Some(seed),
        generator: Some(COUNT_GENERATOR_ID.to_string()),
    })
}

fn poisson(rng: &mut ChaCha20Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let sample: f64 = Poisson::new(mean).expect("positive finite mean").sample(rng);
    sample as u64
}

#[derive(Debug, Clone)]
pub struct SessionConfig {
    /// Alice's bases; Bob measures their conjugates.
    pub bases: Vec<Basis>,
    /// Basis choice weights shared by both parties; empty means uniform.
    pub weights: Vec<f64>,
    pub rounds: usize,
    pub noise: Option<NoiseModel>,
    pub seed: u64,
}

/// One detected pair. Bases and outcomes are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Round {
    pub round: u64,
    pub alice_basis: u32,
    pub bob_basis: u32,
    pub alice: u32,
    pub bob: u32,
    pub sifted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub dim: usize,
    pub seed: u64,
    pub generator: String,
    pub rounds: Vec<Round>,
    pub sifted: usize,
    pub sifted_errors: usize,
    /// `None` when no round was sifted.
    pub observed_qber: Option<f64>,
}

impl SessionRecord {
    pub fn sifted_fraction(&self) -> f64 {
        self.sifted as f64 / self.rounds.len() as f64
    }

    /// One JSON object per round, newline separated.
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::with_capacity(self.rounds.len() * 80);
        for r in &self.rounds {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn rounds_from_jsonl(text: &str) -> Result<Vec<Round>> {
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| Ok(serde_json::from_str(l)?))
            .collect()
    }
}

/// Index into a cumulative distribution for a uniform draw in `[0, 1)`.
fn pick(cumulative: &[f64], u: f64) -> usize {
    let target = u * cumulative.last().copied().unwrap_or(1.0);
    cumulative.partition_point(|&c| c <= target).min(cumulative.len() - 1)
}

fn cumulative(values: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    values
        .into_iter()
        .map(|v| {
            acc += v;
            acc
        })
        .collect()
}

/// Simulates `rounds` detected pairs: both parties pick bases independently
/// from `weights`, and the outcome pair is drawn from the (noisy) joint table.
pub fn simulate_session(config: &SessionConfig) -> Result<SessionRecord> {
    if config.bases.is_empty() {
        return Err(Error::InvalidConfig("session needs at least one basis".into()));
    }
    if config.rounds == 0 {
        return Err(Error::InvalidConfig("session needs at least one round".into()));
    }
    let nb = config.bases.len();
    let weights = if config.weights.is_empty() {
        vec![1.0; nb]
    } else {
        config.weights.clone()
    };
    if weights.len() != nb
        || weights.iter().any(|w| !(w.is_finite() && *w >= 0.0))
        || weights.iter().sum::<f64>() <= 0.0
    {
        return Err(Error::InvalidConfig(format!(
            "need {nb} non-negative basis weights with a positive sum, got {weights:?}"
        )));
    }
    let bob: Vec<Basis> = config.bases.iter().map(Basis::conjugate).collect();
    let mut table = ideal_prob_table(&config.bases, &bob)?;
    if let Some(noise) = &config.noise {
        table = apply_noise(&table, noise)?;
    }
    let d = table.dim();
    let basis_cdf = cumulative(weights.iter().copied());
    let outcome_cdf: Vec<Vec<f64>> = (0..nb * nb)
        .map(|idx| cumulative(table.setting(idx / nb + 1, idx % nb + 1).iter().copied()))
        .collect();

    let streams = config.rounds.div_ceil(ROUNDS_PER_STREAM);
    let chunks: Vec<Vec<Round>> = (0..streams)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
            rng.set_stream(SESSION_STREAM_BASE + s as u64);
            let start = s * ROUNDS_PER_STREAM;
            let end = (start + ROUNDS_PER_STREAM).min(config.rounds);
            (start..end)
                .map(|i| {
                    let k = pick(&basis_cdf, rng.random::<f64>());
                    let l = pick(&basis_cdf, rng.random::<f64>());
                    // Setting block is [a][b] row-major: a = Bob, b = Alice.
                    let cell = pick(&outcome_cdf[k * nb + l], rng.random::<f64>());
                    Round {
                        round: i as u64,
                        alice_basis: (k + 1) as u32,
                        bob_basis: (l + 1) as u32,
                        alice: (cell % d + 1) as u32,
                        bob: (cell / d + 1) as u32,
                        sifted: k == l,
                    }
                })
                .collect()
        })
        .collect();
    let rounds: Vec<Round> = chunks.into_iter().flatten().collect();
    let sifted = rounds.iter().filter(|r| r.sifted).count();
    let sifted_errors = rounds.iter().filter(|r| r.sifted && r.alice != r.bob).count();
    Ok(SessionRecord {
        dim: d,
        seed: config.seed,
        generator: SESSION_GENERATOR_ID.to_string(),
        rounds,
        sifted,
        sifted_errors,
        observed_qber: (sifted > 0).then(|| sifted_errors as f64 / sifted as f64),
    })
}
