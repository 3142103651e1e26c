use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::PathBuf;

use anyhow::Context;
use hdqkd::mub::{dft_basis, sqrt_mub_pair, wh_basis, Basis};
use hdqkd::optics::{
    disk_modes_at, make_aperture_modes, read_stack, superpose_modes, transfer_matrix, wavefront_match, write_pgm,
    write_stack, ApertureLayout, Arrangement, GridSpec, OpticalField, PhaseMaskStack, SorterMetrics,
    WavefrontMatchConfig, MEASURED_LOSS_DB_D25, MEASURED_LOSS_DB_D5,
};
use ndarray::Array2;
use num_complex::Complex64;
use serde::Serialize;

use crate::args::OpticsArgs;
use crate::config::{Intended, OpticsParams, OutputModes, RunConfig};
use crate::exit::usage;
use crate::{write_json, RunContext};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpticsMode {
    Design,
    Eval,
}

fn parse_arrangement(s: &str) -> anyhow::Result<Arrangement> {
    match s {
        "square" => Ok(Arrangement::Square),
        "line" => Ok(Arrangement::Line),
        other => Err(usage(format!("unknown arrangement '{other}' (square or line)"))),
    }
}

pub fn merge_optics(cfg: Option<OpticsParams>, a: &OpticsArgs) -> anyhow::Result<OpticsParams> {
    let mut p = cfg.unwrap_or_default();
    macro_rules! set {
        ($($field:ident),*) => { $( if let Some(v) = a.$field.clone() { p.$field = v; } )* };
    }
    set!(
        d,
        basis,
        pitch,
        wavelength,
        planes,
        plane_spacing,
        iterations,
        aperture_radius,
        aperture_spacing,
        detector_radius,
        output_modes,
        intended
    );
    if let Some(n) = a.grid {
        p.nx = n;
        p.ny = n;
    }
    if let Some(s) = &a.arrangement {
        p.arrangement = Some(parse_arrangement(s)?);
    }
    if a.stack.is_some() {
        p.stack = a.stack.clone();
    }
    if a.no_pgm {
        p.pgm = false;
    }
    Ok(p)
}

fn sorter_basis(d: usize, spec: &str) -> anyhow::Result<Basis> {
    Ok(match spec {
        "dft" => dft_basis(d)?,
        "computational" => Basis::computational(d)?,
        "row-dft" => sqrt_mub_pair(d)?.0,
        "column-dft" => sqrt_mub_pair(d)?.1,
        s => match s.strip_prefix("wh:").map(str::parse::<usize>) {
            Some(Ok(r)) => wh_basis(d, r)?,
            _ => {
                return Err(usage(format!(
                    "unknown basis '{s}' (dft, computational, row-dft, column-dft or wh:<r>)"
                )))
            }
        },
    })
}

/// `U[k][n] = conj(B[n][k])`: basis state `k` leaves through port `k`.
fn intended_unitary(d: usize, p: &OpticsParams) -> anyhow::Result<Array2<Complex64>> {
    match p.intended {
        Intended::Identity => Ok(Array2::from_shape_fn((d, d), |(i, j)| {
            Complex64::new(if i == j { 1.0 } else { 0.0 }, 0.0)
        })),
        Intended::Basis => {
            let b = sorter_basis(d, &p.basis)?;
            Ok(b.amplitudes().t().mapv(|z| z.conj()))
        }
    }
}

fn reference_loss(d: usize) -> Option<f64> {
    match d {
        5 => Some(MEASURED_LOSS_DB_D5),
        25 => Some(MEASURED_LOSS_DB_D25),
        _ => None,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OpticsOutput {
    pub mode: &'static str,
    pub metrics: SorterMetrics,
    /// Mean mode fidelity of the all-zero stack, then after every sweep.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub history: Vec<f64>,
    pub transfer_re: Vec<Vec<f64>>,
    pub transfer_im: Vec<Vec<f64>>,
    pub stack_path: Option<PathBuf>,
}

/// `design` runs wavefront matching and writes the stack; `eval` scores a
/// stack read from `params.stack`, or an all-zero stack.
pub fn cmd_optics(ctx: &RunContext, mode: OpticsMode, params: &OpticsParams) -> anyhow::Result<OpticsOutput> {
    let mut params = params.clone();
    let d = params.d;
    if d < 2 {
        return Err(usage(format!("optics needs d >= 2, got {d}")));
    }
    let loaded = match (mode, &params.stack) {
        (OpticsMode::Eval, Some(path)) => {
            let f = File::open(path)
                .map_err(hdqkd::Error::from)
                .with_context(|| format!("opening {}", path.display()))?;
            let stack = read_stack(&mut BufReader::new(f)).with_context(|| format!("reading {}", path.display()))?;
            let g = *stack.grid();
            params.nx = g.nx;
            params.ny = g.ny;
            params.pitch = g.pitch;
            params.wavelength = g.wavelength;
            params.planes = stack.planes();
            params.plane_spacing = stack.plane_spacing();
            Some(stack)
        }
        _ => None,
    };
    let grid = GridSpec::new(params.nx, params.ny, params.pitch, params.wavelength)?;
    let arrangement = params.arrangement.unwrap_or(if hdqkd::mub::exact_sqrt(d).is_some() {
        Arrangement::Square
    } else {
        Arrangement::Line
    });
    params.arrangement = Some(arrangement);
    let layout = ApertureLayout {
        count: d,
        radius: params.aperture_radius,
        spacing: params.aperture_spacing,
        arrangement,
    };
    let inputs = make_aperture_modes(&layout, &grid)?;
    let outputs: Vec<OpticalField> = match params.output_modes {
        OutputModes::Spots => disk_modes_at(&grid, &layout.centres()?, params.detector_radius)?,
        OutputModes::Inputs => inputs.clone(),
    };
    let u = intended_unitary(d, &params)?;

    ctx.prepare()?;
    let (stack, history, stack_path) = match (mode, loaded) {
        (OpticsMode::Eval, Some(stack)) => (stack, Vec::new(), params.stack.clone()),
        (OpticsMode::Eval, None) => (
            PhaseMaskStack::zeros(grid, params.planes, params.plane_spacing)?,
            Vec::new(),
            None,
        ),
        (OpticsMode::Design, _) => {
            let targets = (0..d)
                .map(|n| superpose_modes(&outputs, &u.column(n).to_vec()))
                .collect::<hdqkd::Result<Vec<_>>>()?;
            ctx.say(format!(
                "designing {} planes on a {}x{} grid, {} iterations",
                params.planes, params.nx, params.ny, params.iterations
            ));
            let wm = wavefront_match(
                &inputs,
                &targets,
                &WavefrontMatchConfig {
                    planes: params.planes,
                    plane_spacing: params.plane_spacing,
                    iterations: params.iterations,
                },
            )?;
            let path = ctx.path("stack.mplc");
            let mut w = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
            write_stack(&mut w, &wm.stack)?;
            w.flush()?;
            if params.pgm {
                for (i, m) in wm.stack.masks().iter().enumerate() {
                    let p = ctx.path(&format!("mask_{:02}.pgm", i + 1));
                    let mut w = BufWriter::new(File::create(&p)?);
                    write_pgm(&mut w, m)?;
                    w.flush()?;
                }
            }
            (wm.stack, wm.history, Some(path))
        }
    };
    let t = transfer_matrix(&stack, &inputs, &outputs)?;
    let mut metrics = SorterMetrics::evaluate(&t, &u)?;
    if let Some(l) = reference_loss(d) {
        metrics = metrics.with_reference_loss(l);
    }
    let out = OpticsOutput {
        mode: match mode {
            OpticsMode::Design => "design",
            OpticsMode::Eval => "eval",
        },
        metrics,
        history,
        transfer_re: t.rows().into_iter().map(|r| r.iter().map(|z| z.re).collect()).collect(),
        transfer_im: t.rows().into_iter().map(|r| r.iter().map(|z| z.im).collect()).collect(),
        stack_path,
    };
    write_json(&ctx.path("metrics.json"), &out)?;
    ctx.say(format!(
        "fidelity {:.4}  crosstalk {:.4}  insertion loss {:.2} dB",
        out.metrics.fidelity, out.metrics.mean_crosstalk, out.metrics.insertion_loss_db
    ));
    ctx.write_resolved(
        match mode {
            OpticsMode::Design => "optics design",
            OpticsMode::Eval => "optics eval",
        },
        RunConfig {
            optics: Some(params),
            ..Default::default()
        },
    )?;
    Ok(out)
}
