use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::Context;
use hdqkd::keyrate::{
    rate_curve, rate_depolarizing, rate_two_mub, subset_stats, threshold, write_curve, Bound, KeyRateReport,
    SplitProfile, THRESHOLD_UPPER,
};
use hdqkd::mub::exact_sqrt;
use hdqkd::protocol::{decompose_errors, normalize_counts, read_count_table, BlockAlignment, NoiseDecomposition};
use serde::Serialize;

use crate::args::KeyrateArgs;
use crate::config::{CurveKind, KeyrateParams, RunConfig};
use crate::exit::usage;
use crate::{write_json, RunContext};

pub fn merge_keyrate(cfg: Option<KeyrateParams>, a: &KeyrateArgs) -> KeyrateParams {
    let mut p = cfg.unwrap_or_default();
    macro_rules! set_opt {
        ($($field:ident),*) => { $( if a.$field.is_some() { p.$field = a.$field.clone(); } )* };
    }
    set_opt!(d, bound, error, uniform_error, block_error, counts, curve, profile);
    if let Some(r) = &a.d_range {
        p.d_range = r.clone();
    }
    if let Some(n) = a.points {
        p.points = n;
    }
    p
}

#[derive(Debug, Clone, Serialize)]
pub struct SettingDecomposition {
    /// Matched setting `(k, k)`, 1-based.
    pub k: usize,
    pub alignment: BlockAlignment,
    #[serde(flatten)]
    pub decomposition: NoiseDecomposition,
}

#[derive(Debug, Clone, Serialize)]
pub struct ThresholdRow {
    pub d: usize,
    pub two_mub_uniform: Option<f64>,
    pub two_mub_experiment: Option<f64>,
    pub two_mub_all_block: Option<f64>,
    pub depolarizing_all_mubs: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct KeyrateOutput {
    /// `"explicit"` or the count table path.
    pub source: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<KeyRateReport>,
    /// Mean error over matched settings, for count input.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_error: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub decompositions: Vec<SettingDecomposition>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curve_path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub thresholds: Vec<ThresholdRow>,
}

fn parse_range(s: &str) -> anyhow::Result<(usize, usize)> {
    let parsed = s
        .split_once(':')
        .and_then(|(a, b)| Some((a.trim().parse::<usize>().ok()?, b.trim().parse::<usize>().ok()?)));
    match parsed {
        Some((lo, hi)) if lo >= 2 && lo <= hi => Ok((lo, hi)),
        _ => Err(usage(format!("--d-range must be lo:hi with 2 <= lo <= hi, got '{s}'"))),
    }
}

fn parse_profile(s: &str) -> anyhow::Result<SplitProfile> {
    s.parse::<SplitProfile>().map_err(|e| usage(e.to_string()))
}

pub fn threshold_sweep(lo: usize, hi: usize) -> Vec<ThresholdRow> {
    let at = |b, p, d| threshold(b, p, d).ok().map(|t| t.threshold);
    (lo..=hi)
        .map(|d| {
            let square = exact_sqrt(d).is_some_and(|s| s >= 2);
            ThresholdRow {
                d,
                two_mub_uniform: at(Bound::TwoMubUniform, SplitProfile::UNIFORM, d),
                two_mub_experiment: square
                    .then(|| at(Bound::TwoMubBlock, SplitProfile::EXPERIMENT, d))
                    .flatten(),
                two_mub_all_block: square
                    .then(|| at(Bound::TwoMubBlock, SplitProfile::ALL_BLOCK, d))
                    .flatten(),
                depolarizing_all_mubs: at(Bound::DepolarizingAllMubs, SplitProfile::UNIFORM, d),
            }
        })
        .collect()
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Rate from explicit error values.
fn explicit_report(p: &KeyrateParams) -> anyhow::Result<KeyRateReport> {
    let d = p.d.ok_or_else(|| usage("--d is required with explicit error values"))?;
    let bound = p.bound.unwrap_or(if p.block_error.is_some() {
        Bound::TwoMubBlock
    } else {
        Bound::TwoMubUniform
    });
    let report = match bound {
        Bound::DepolarizingAllMubs => {
            let e = p.error.ok_or_else(|| usage("the depolarizing bound needs --E"))?;
            rate_depolarizing(d, e)?
        }
        Bound::TwoMubUniform => {
            if p.block_error.is_some_and(|b| b != 0.0) {
                return Err(usage("the uniform two-basis bound takes no --Eb; use two-mub-block"));
            }
            let e = p
                .error
                .or(p.uniform_error)
                .ok_or_else(|| usage("the uniform two-basis bound needs --E"))?;
            rate_two_mub(d, e, 0.0)?
        }
        Bound::TwoMubBlock => match (p.uniform_error, p.block_error, p.error) {
            (Some(u), Some(b), _) => rate_two_mub(d, u, b)?,
            (None, None, Some(e)) => {
                let profile = parse_profile(
                    p.profile
                        .as_deref()
                        .ok_or_else(|| usage("two-mub-block with --E also needs --profile"))?,
                )?;
                let (u, b) = profile.split(e);
                rate_two_mub(d, u, b)?
            }
            _ => return Err(usage("the block-biased bound needs --Eu and --Eb")),
        },
    };
    Ok(report)
}

struct CountAnalysis {
    report: KeyRateReport,
    mean_error: f64,
    decompositions: Vec<SettingDecomposition>,
}

/// normalize -> decompose each matched setting -> average -> rate.
fn counts_report(p: &KeyrateParams, path: &std::path::Path) -> anyhow::Result<CountAnalysis> {
    let (counts, meta) = read_count_table(path).with_context(|| format!("reading {}", path.display()))?;
    let d = counts.dim();
    if let Some(want) = p.d {
        if want != d {
            return Err(usage(format!(
                "--d {want} does not match the count table dimension {d}"
            )));
        }
    }
    let table = normalize_counts(&counts).with_context(|| format!("normalising {}", path.display()))?;
    let stats = subset_stats(&table)?;
    let matched = table.alice_bases();
    let alignments: Vec<BlockAlignment> = match meta.block_alignment.len() {
        0 => Vec::new(),
        1 => vec![meta.block_alignment[0]; matched],
        n if n == matched => meta.block_alignment.clone(),
        n => {
            return Err(usage(format!(
                "sidecar lists {n} block alignments for {matched} matched settings"
            )))
        }
    };
    let square = exact_sqrt(d).is_some_and(|s| s >= 2);
    let bound = p.bound.unwrap_or(if !alignments.is_empty() && square {
        Bound::TwoMubBlock
    } else if matched == d + 1 {
        Bound::DepolarizingAllMubs
    } else {
        Bound::TwoMubUniform
    });
    let mut decompositions = Vec::new();
    if square && !alignments.is_empty() {
        for (k, al) in alignments.iter().enumerate() {
            decompositions.push(SettingDecomposition {
                k: k + 1,
                alignment: *al,
                decomposition: decompose_errors(&table, k + 1, *al)?,
            });
        }
    }
    let report = match bound {
        Bound::DepolarizingAllMubs => rate_depolarizing(d, stats.mean_error)?,
        Bound::TwoMubUniform => rate_two_mub(d, stats.mean_error, 0.0)?,
        Bound::TwoMubBlock => {
            if decompositions.is_empty() {
                return Err(usage(
                    "the block-biased bound needs a perfect-square table whose sidecar lists block alignments",
                ));
            }
            let n = decompositions.len() as f64;
            let u = decompositions
                .iter()
                .map(|s| s.decomposition.uniform_error)
                .sum::<f64>()
                / n;
            let b = decompositions.iter().map(|s| s.decomposition.block_error).sum::<f64>() / n;
            rate_two_mub(d, u, b)?
        }
    };
    Ok(CountAnalysis {
        report,
        mean_error: stats.mean_error,
        decompositions,
    })
}

/// Computes the rate for explicit errors or a count table, and optionally a
/// rate curve (`rate_curve.csv`) or threshold sweep (`thresholds.csv`).
pub fn cmd_keyrate(ctx: &RunContext, params: &KeyrateParams) -> anyhow::Result<KeyrateOutput> {
    let has_inputs = params.counts.is_some()
        || params.error.is_some()
        || params.uniform_error.is_some()
        || params.block_error.is_some();
    if !has_inputs && params.curve.is_none() {
        return Err(usage("give --counts, --E, or --Eu/--Eb (or --curve)"));
    }
    if params.points < 2 {
        return Err(usage("--points must be at least 2"));
    }
    let sweep_range = match params.curve {
        Some(CurveKind::Thresholds) => Some(parse_range(&params.d_range)?),
        _ => None,
    };
    let mut out = KeyrateOutput {
        source: "explicit".into(),
        report: None,
        mean_error: None,
        decompositions: Vec::new(),
        curve_path: None,
        thresholds: Vec::new(),
    };
    if has_inputs {
        let report = match &params.counts {
            Some(path) => {
                let a = counts_report(params, path)?;
                out.source = path.display().to_string();
                out.mean_error = Some(a.mean_error);
                out.decompositions = a.decompositions;
                a.report
            }
            None => explicit_report(params)?,
        };
        let thr = report
            .threshold
            .map(|t| format!("{t:.4}"))
            .unwrap_or_else(|| "none".into());
        let errors = match report.bound {
            Bound::TwoMubBlock => format!(
                "E_u={:.4}, E_b={:.4}",
                report.inputs.uniform_error, report.inputs.block_error
            ),
            _ => format!("E={:.4}", report.inputs.total_error),
        };
        ctx.say(format!(
            "R = {:.4} bits per sifted photon ({}, d={}, {errors}); threshold E = {thr}",
            report.rate,
            report.bound.id(),
            report.dim
        ));
        out.report = Some(report);
    }
    ctx.prepare()?;
    if params.curve == Some(CurveKind::Rate) {
        let (bound, dim) = match &out.report {
            Some(r) => (r.bound, r.dim),
            None => (
                params
                    .bound
                    .ok_or_else(|| usage("--curve rate without error values needs --bound"))?,
                params
                    .d
                    .ok_or_else(|| usage("--curve rate without error values needs --d"))?,
            ),
        };
        let profile = match (&params.profile, &out.report) {
            (Some(s), _) => parse_profile(s)?,
            (None, Some(r)) if bound == Bound::TwoMubBlock && r.inputs.total_error > 0.0 => {
                SplitProfile::new(r.inputs.block_error / r.inputs.total_error)?
            }
            (None, _) if bound == Bound::TwoMubBlock => {
                return Err(usage("--curve rate for two-mub-block needs --profile or error values"))
            }
            (None, _) => SplitProfile::UNIFORM,
        };
        let upper = match bound {
            Bound::DepolarizingAllMubs => dim as f64 / (dim + 1) as f64 * (1.0 - 1e-9),
            _ => THRESHOLD_UPPER,
        };
        let grid: Vec<f64> = (0..params.points)
            .map(|i| upper * i as f64 / (params.points - 1) as f64)
            .collect();
        let pts = rate_curve(bound, dim, &grid, profile)?;
        let path = ctx.path("rate_curve.csv");
        write_curve(&path, bound, dim, profile, &pts)?;
        ctx.say(format!("{} ({} points, {})", path.display(), pts.len(), profile.name()));
        out.curve_path = Some(path);
    }
    if let Some((lo, hi)) = sweep_range {
        out.thresholds = threshold_sweep(lo, hi);
        let mut text = String::from("d,two_mub_uniform,two_mub_experiment,two_mub_all_block,depolarizing_all_mubs\n");
        for r in &out.thresholds {
            writeln!(
                text,
                "{},{},{},{},{}",
                r.d,
                cell(r.two_mub_uniform),
                cell(r.two_mub_experiment),
                cell(r.two_mub_all_block),
                cell(r.depolarizing_all_mubs)
            )?;
        }
        let path = ctx.path("thresholds.csv");
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        ctx.say(format!("{} (d = {lo}..{hi})", path.display()));
        out.curve_path = Some(path);
    }
    write_json(&ctx.path("keyrate.json"), &out)?;
    ctx.write_resolved(
        "keyrate",
        RunConfig {
            keyrate: Some(params.clone()),
            ..Default::default()
        },
    )?;
    Ok(out)
}
