use hdqkd::mub::{full_mub_set, sqrt_mub_pair, Basis};
use hdqkd::protocol::{
    apply_noise, ideal_prob_table, sample_counts, simulate_session, write_count_table, write_probability_table,
    BlockAlignment, CountSettings, NoiseModel, SessionConfig, TableSidecar,
};
use serde::Serialize;
use std::path::PathBuf;

use anyhow::Context;

use crate::args::SimulateArgs;
use crate::config::{RunConfig, SimFamily, SimulateParams};
use crate::exit::usage;
use crate::{write_json, RunContext};

pub fn merge_simulate(cfg: Option<SimulateParams>, a: &SimulateArgs) -> SimulateParams {
    let mut p = cfg.unwrap_or_default();
    macro_rules! set {
        ($($field:ident),*) => { $( if let Some(v) = a.$field { p.$field = v; } )* };
    }
    set!(
        d,
        family,
        uniform_error,
        block_error,
        pair_rate,
        accidental_rate,
        integration_time,
        coincidence_window,
        rounds
    );
    p
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionSummary {
    pub dim: usize,
    pub seed: u64,
    pub generator: String,
    pub rounds: usize,
    pub sifted: usize,
    pub sifted_errors: usize,
    pub observed_qber: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SimulateOutput {
    pub counts_path: PathBuf,
    pub probabilities_path: PathBuf,
    pub session_path: Option<PathBuf>,
    pub session: Option<SessionSummary>,
    pub total_counts: u64,
}

/// Writes `counts.csv`, `probabilities.csv` (each with a JSON sidecar) and,
/// when `rounds > 0`, `session.jsonl` plus `session.json`.
pub fn cmd_simulate(ctx: &RunContext, params: &SimulateParams) -> anyhow::Result<SimulateOutput> {
    let (bases, alignments): (Vec<Basis>, Vec<BlockAlignment>) = match params.family {
        SimFamily::SqrtPair => {
            let (r, c) = sqrt_mub_pair(params.d)?;
            (vec![r, c], vec![BlockAlignment::Row, BlockAlignment::Column])
        }
        SimFamily::WhAll => {
            if params.block_error != 0.0 {
                return Err(usage("block-biased noise needs the sqrt-pair family"));
            }
            (full_mub_set(params.d)?.into_bases(), Vec::new())
        }
    };
    let noise = NoiseModel::from_components(params.uniform_error, params.block_error, alignments.clone())?;
    let settings = CountSettings {
        pair_rate: params.pair_rate,
        accidental_rate: params.accidental_rate,
        integration_time: params.integration_time,
        coincidence_window: params.coincidence_window,
    };
    settings.validate()?;
    if params.pair_rate == 0.0 && params.accidental_rate == 0.0 {
        ctx.warn("pair and accidental rates are both zero; every count will be zero");
    }

    let bob: Vec<Basis> = bases.iter().map(Basis::conjugate).collect();
    let table = apply_noise(&ideal_prob_table(&bases, &bob)?, &noise)?;
    let counts = sample_counts(&table, &settings, ctx.seed)?;

    ctx.prepare()?;
    let labels: Vec<String> = bases.iter().map(|b| b.label().to_string()).collect();
    let probabilities_path = ctx.path("probabilities.csv");
    let extra = TableSidecar {
        basis_labels: labels.clone(),
        block_alignment: alignments.clone(),
        ..TableSidecar::for_probability(&table)
    };
    write_probability_table(&probabilities_path, &table, Some(&extra))?;
    let counts_path = ctx.path("counts.csv");
    let extra = TableSidecar {
        basis_labels: labels,
        block_alignment: alignments,
        ..TableSidecar::for_counts(&counts)
    };
    write_count_table(&counts_path, &counts, Some(&extra))?;
    ctx.say(format!("{} ({} coincidences)", counts_path.display(), counts.total()));

    let (session_path, session) = if params.rounds > 0 {
        let rec = simulate_session(&SessionConfig {
            bases,
            weights: params.weights.clone(),
            rounds: params.rounds,
            noise: Some(noise),
            seed: ctx.seed,
        })?;
        let path = ctx.path("session.jsonl");
        std::fs::write(&path, rec.to_jsonl()?).with_context(|| format!("writing {}", path.display()))?;
        let summary = SessionSummary {
            dim: rec.dim,
            seed: rec.seed,
            generator: rec.generator.clone(),
            rounds: rec.rounds.len(),
            sifted: rec.sifted,
            sifted_errors: rec.sifted_errors,
            observed_qber: rec.observed_qber,
        };
        write_json(&ctx.path("session.json"), &summary)?;
        match summary.observed_qber {
            Some(q) => ctx.say(format!(
                "{} ({} rounds, {} sifted, QBER {q:.4})",
                path.display(),
                summary.rounds,
                summary.sifted
            )),
            None => ctx.say(format!("{} ({} rounds, none sifted)", path.display(), summary.rounds)),
        }
        (Some(path), Some(summary))
    } else {
        (None, None)
    };
    ctx.write_resolved(
        "simulate",
        RunConfig {
            simulate: Some(params.clone()),
            ..Default::default()
        },
    )?;
    Ok(SimulateOutput {
        counts_path,
        probabilities_path,
        session_path,
        session,
        total_counts: counts.total(),
    })
}
