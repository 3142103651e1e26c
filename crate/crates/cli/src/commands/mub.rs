use std::path::{Path, PathBuf};

use anyhow::Context;
use hdqkd::mub::{check_mub_pair, dft_basis, full_mub_set, sqrt_mub_pair, Basis, BasisDocument, UNITARITY_TOL};
use serde::Serialize;

use crate::args::MubGenArgs;
use crate::config::{MubFamily, MubParams, RunConfig};
use crate::exit::{usage, CheckFailed};
use crate::{write_json, RunContext};

pub fn merge_mub(cfg: Option<MubParams>, args: &MubGenArgs) -> MubParams {
    let mut p = cfg.unwrap_or_default();
    if let Some(d) = args.d {
        p.d = d;
    }
    if let Some(f) = args.family {
        p.family = f;
    }
    p
}

fn family_bases(p: &MubParams) -> hdqkd::Result<Vec<Basis>> {
    match p.family {
        MubFamily::WhAll => Ok(full_mub_set(p.d)?.into_bases()),
        MubFamily::SqrtPair => {
            let (r, c) = sqrt_mub_pair(p.d)?;
            Ok(vec![r, c])
        }
        MubFamily::Dft => Ok(vec![dft_basis(p.d)?]),
        MubFamily::Computational => Ok(vec![Basis::computational(p.d)?]),
    }
}

/// Writes `basis_01.json`, `basis_02.json`, ... and returns their paths.
pub fn cmd_mub_gen(ctx: &RunContext, params: &MubParams) -> anyhow::Result<Vec<PathBuf>> {
    let bases = family_bases(params)?;
    ctx.prepare()?;
    let mut paths = Vec::with_capacity(bases.len());
    for (i, b) in bases.iter().enumerate() {
        let path = ctx.path(&format!("basis_{:02}.json", i + 1));
        write_json(&path, &b.to_document())?;
        ctx.say(format!("{} ({})", path.display(), b.label()));
        paths.push(path);
    }
    ctx.write_resolved(
        "mub gen",
        RunConfig {
            mub: Some(params.clone()),
            ..Default::default()
        },
    )?;
    Ok(paths)
}

#[derive(Debug, Clone, Serialize)]
pub struct FileCheck {
    pub path: PathBuf,
    pub label: String,
    pub unitarity_deviation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PairDeviation {
    pub first: usize,
    pub second: usize,
    pub max_deviation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MubCheckReport {
    pub dim: usize,
    pub files: Vec<FileCheck>,
    pub pairs: Vec<PairDeviation>,
    pub max_unitarity_deviation: f64,
    pub max_unbiasedness_deviation: f64,
    pub unitarity_tol: f64,
    pub unbiasedness_tol: f64,
    pub passed: bool,
}

fn expand(files: &[PathBuf]) -> anyhow::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for f in files {
        if f.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(f)
                .with_context(|| format!("listing {}", f.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "json") && !p.ends_with("mub_check.json"))
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(f.clone());
        }
    }
    if out.is_empty() {
        return Err(usage("no basis files to check"));
    }
    Ok(out)
}

fn load_unchecked(path: &Path) -> anyhow::Result<Basis> {
    let text = std::fs::read_to_string(path)
        .map_err(hdqkd::Error::from)
        .with_context(|| format!("reading {}", path.display()))?;
    let doc: BasisDocument = serde_json::from_str(&text)
        .map_err(hdqkd::Error::from)
        .with_context(|| format!("parsing {}", path.display()))?;
    doc.into_unchecked()
        .with_context(|| format!("loading {}", path.display()))
}

/// Reports each file's unitarity deviation and the unbiasedness deviation of
/// every pair; fails (exit 1) when either exceeds its tolerance.
pub fn cmd_mub_check(ctx: &RunContext, files: &[PathBuf], tol: f64) -> anyhow::Result<MubCheckReport> {
    let paths = expand(files)?;
    let bases = paths
        .iter()
        .map(|p| load_unchecked(p))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let dim = bases[0].dim();
    if let Some((p, b)) = paths.iter().zip(&bases).find(|(_, b)| b.dim() != dim) {
        return Err(usage(format!(
            "{} has dimension {}, expected {dim}",
            p.display(),
            b.dim()
        )));
    }
    let files: Vec<FileCheck> = paths
        .iter()
        .zip(&bases)
        .map(|(p, b)| FileCheck {
            path: p.clone(),
            label: b.label().to_string(),
            unitarity_deviation: b.unitarity_deviation(),
        })
        .collect();
    let mut pairs = Vec::new();
    for i in 0..bases.len() {
        for j in i + 1..bases.len() {
            pairs.push(PairDeviation {
                first: i + 1,
                second: j + 1,
                max_deviation: check_mub_pair(&bases[i], &bases[j], tol)?.max_deviation,
            });
        }
    }
    let max_u = files.iter().map(|f| f.unitarity_deviation).fold(0.0, f64::max);
    let max_b = pairs.iter().map(|p| p.max_deviation).fold(0.0, f64::max);
    let passed = max_u <= UNITARITY_TOL && max_b <= tol;
    let report = MubCheckReport {
        dim,
        files,
        pairs,
        max_unitarity_deviation: max_u,
        max_unbiasedness_deviation: max_b,
        unitarity_tol: UNITARITY_TOL,
        unbiasedness_tol: tol,
        passed,
    };
    for f in &report.files {
        ctx.say(format!(
            "{}: unitarity deviation {:.3e}",
            f.path.display(),
            f.unitarity_deviation
        ));
    }
    ctx.say(format!(
        "max unitarity deviation    {max_u:.3e} (tol {UNITARITY_TOL:.0e})"
    ));
    if !report.pairs.is_empty() {
        ctx.say(format!("max unbiasedness deviation {max_b:.3e} (tol {tol:.0e})"));
    }
    ctx.prepare()?;
    write_json(&ctx.path("mub_check.json"), &report)?;
    ctx.write_resolved("mub check", RunConfig::default())?;
    if !passed {
        return Err(CheckFailed(format!(
            "deviation above tolerance: unitarity {max_u:.3e}, unbiasedness {max_b:.3e}"
        ))
        .into());
    }
    Ok(report)
}
