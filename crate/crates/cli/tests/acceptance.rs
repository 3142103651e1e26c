//! Acceptance criteria, one PASS/FAIL line each. Exits nonzero if any fails.

use std::time::{Duration, Instant};

use hdqkd::keyrate::{
    entropy_block_biased, rate_depolarizing, rate_two_mub, shannon_hd, subset_stats, threshold, Bound, SplitProfile,
};
use hdqkd::mub::{check_mub_pair, full_mub_set, sqrt_mub_pair, Basis};
use hdqkd::optics::{
    disk_modes_at, make_aperture_modes, mean_fidelity, superpose_modes, transfer_matrix, wavefront_match,
    ApertureLayout, Arrangement, GridSpec, OpticalField, PhaseMaskStack, Propagator, SorterMetrics,
    WavefrontMatchConfig, DEFAULT_APERTURE_RADIUS, DEFAULT_APERTURE_SPACING, DEFAULT_DETECTOR_RADIUS,
    DEFAULT_PLANE_SPACING, DEFAULT_WAVELENGTH,
};
use hdqkd::protocol::{
    apply_noise, decompose_errors, ideal_prob_table, normalize_counts, sample_counts, BlockAlignment, CountSettings,
    NoiseModel, ProbabilityTable,
};
use hdqkd_cli::config::{KeyrateParams, SimulateParams};
use hdqkd_cli::{cmd_keyrate, cmd_simulate, RunContext};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Mean crosstalk of the first desk-scale design run (1.667e-4), rounded up.
const DESK_CROSSTALK_BASELINE: f64 = 1.67e-4;

type Outcome = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn timed(limit: Duration, f: impl FnOnce() -> Outcome) -> Outcome {
    let t = Instant::now();
    let r = f();
    let el = t.elapsed();
    match r {
        Ok(d) if el <= limit => Ok(format!("{d} [{:.2} s]", el.as_secs_f64())),
        Ok(d) => Err(format!(
            "{d} but took {:.2} s > {:.0} s",
            el.as_secs_f64(),
            limit.as_secs_f64()
        )),
        Err(d) => Err(format!("{d} [{:.2} s]", el.as_secs_f64())),
    }
}

fn mub_correctness() -> Outcome {
    let set = full_mub_set(5).map_err(|e| e.to_string())?;
    let b = set.bases();
    let mut worst5: f64 = 0.0;
    let mut pairs = 0;
    for i in 0..b.len() {
        for j in i + 1..b.len() {
            worst5 = worst5.max(check_mub_pair(&b[i], &b[j], 1e-10).unwrap().max_deviation);
            pairs += 1;
        }
    }
    let mut ok = pairs == 15 && worst5 < 1e-10;
    let mut worst_sqrt: f64 = 0.0;
    for d in [4usize, 9, 25] {
        let (r, c) = sqrt_mub_pair(d).map_err(|e| e.to_string())?;
        worst_sqrt = worst_sqrt.max(check_mub_pair(&r, &c, 1e-10).unwrap().max_deviation);
        let s = (d as f64).sqrt() as usize;
        for basis in [&r, &c] {
            ok &= (1..=d).all(|k| basis.state(k).iter().filter(|z| z.norm() > 1e-12).count() == s);
        }
    }
    ok &= worst_sqrt < 1e-10;
    check(
        ok,
        format!("{pairs} pairs at d=5, max dev {worst5:.1e}; sqrt pairs max dev {worst_sqrt:.1e}, support sqrt(d)"),
    )
}

fn depolarizing_rate() -> Outcome {
    let r = rate_depolarizing(5, 0.11).map_err(|e| e.to_string())?.rate;
    check(
        (r - 1.1537).abs() <= 0.01 && (r - 1.15).abs() <= 0.05,
        format!("R(d=5, E=0.11) = {r:.4}"),
    )
}

fn block_rate() -> Outcome {
    let r = rate_two_mub(25, 0.073, 0.248).map_err(|e| e.to_string())?.rate;
    let h = entropy_block_biased(25, 0.073, 0.248).map_err(|e| e.to_string())?;
    check(
        (r - 0.816).abs() <= 0.002 && (r - 0.8).abs() <= 0.07 && (h - 1.914).abs() <= 0.001,
        format!("R = {r:.4}, h = {h:.4}"),
    )
}

fn thresholds() -> Outcome {
    let t = |b, p, d| threshold(b, p, d).map(|t| t.threshold).map_err(|e| e.to_string());
    let t2 = t(Bound::TwoMubUniform, SplitProfile::UNIFORM, 2)?;
    let u = t(Bound::TwoMubUniform, SplitProfile::UNIFORM, 25)?;
    let x = t(Bound::TwoMubBlock, SplitProfile::EXPERIMENT, 25)?;
    let a = t(Bound::TwoMubBlock, SplitProfile::ALL_BLOCK, 25)?;
    check(
        (t2 - 0.11).abs() <= 0.0005 && u < x && x < a,
        format!("d=2 uniform {t2:.4}; d=25 uniform {u:.4} < 0.77 split {x:.4} < all-block {a:.4}"),
    )
}

fn entropy_dominance() -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    let mut worst_equality: f64 = 0.0;
    for d in [4usize, 25] {
        for e_t in [0.05, 0.15, 0.3, 0.5, 0.7] {
            let h = shannon_hd(e_t, d).unwrap();
            for i in 0..50 {
                for j in 0..50 {
                    // 50 x 50 grid of splits: E_b = f E_t with f on a 2500-point lattice.
                    let f = (i * 50 + j) as f64 / 2499.0;
                    let hb = entropy_block_biased(d, e_t * (1.0 - f), e_t * f).unwrap();
                    worst = worst.max(hb - h);
                }
            }
            worst_equality = worst_equality.max((entropy_block_biased(d, e_t, 0.0).unwrap() - h).abs());
        }
    }
    check(
        worst <= 1e-12 && worst_equality <= 1e-12,
        format!("max(h_block - h_d) = {worst:.2e}; uniform split gap {worst_equality:.1e}"),
    )
}

fn sqrt_table(d: usize) -> ProbabilityTable {
    let (r, c) = sqrt_mub_pair(d).unwrap();
    let a = vec![r, c];
    let b: Vec<Basis> = a.iter().map(Basis::conjugate).collect();
    ideal_prob_table(&a, &b).unwrap()
}

fn statistics_round_trip() -> Outcome {
    let al = [BlockAlignment::Row, BlockAlignment::Column];
    let mut exact: f64 = 0.0;
    for d in [4usize, 9, 25] {
        let t = sqrt_table(d);
        for (e_u, e_b) in [(0.073, 0.248), (0.1, 0.0), (0.0, 0.2), (0.2, 0.3)] {
            let m = NoiseModel::from_components(e_u, e_b, al.to_vec()).unwrap();
            let noisy = apply_noise(&t, &m).unwrap();
            for (k, alignment) in al.iter().enumerate() {
                let dec = decompose_errors(&noisy, k + 1, *alignment).unwrap();
                exact = exact
                    .max((dec.total_error - e_u - e_b).abs())
                    .max((dec.uniform_error - e_u).abs())
                    .max((dec.block_error - e_b).abs());
            }
        }
    }
    let settings = CountSettings {
        pair_rate: 1e6,
        accidental_rate: 0.0,
        integration_time: 1.0,
        coincidence_window: 1e-9,
    };
    let mut worst_sigma: f64 = 0.0;
    for (d, seed) in [(4usize, 11u64), (9, 12), (25, 13)] {
        let m = NoiseModel::from_components(0.073, 0.248, al.to_vec()).unwrap();
        let noisy = apply_noise(&sqrt_table(d), &m).unwrap();
        let c = sample_counts(&noisy, &settings, seed).unwrap();
        let p = normalize_counts(&c).unwrap();
        let s = (d as f64).sqrt();
        for (k, alignment) in al.iter().enumerate() {
            let n: u64 = (1..=d)
                .flat_map(|a| (1..=d).map(move |b| (a, b)))
                .map(|(a, b)| c.get(a, b, k + 1, k + 1))
                .sum();
            let n = n as f64;
            let dec = decompose_errors(&p, k + 1, *alignment).unwrap();
            let s_t = (0.321 * 0.679 / n).sqrt();
            let o = 0.073 * (d as f64 - s) / (d as f64 - 1.0);
            let s_u = (d as f64 - 1.0) / (d as f64 - s) * (o * (1.0 - o) / n).sqrt();
            worst_sigma = worst_sigma
                .max((dec.total_error - 0.321).abs() / s_t)
                .max((dec.uniform_error - 0.073).abs() / s_u)
                .max((dec.block_error - 0.248).abs() / (s_t + s_u));
        }
    }
    check(
        exact < 1e-9 && worst_sigma < 3.0,
        format!("exact max error {exact:.1e}; sampled worst deviation {worst_sigma:.2} sigma"),
    )
}

fn end_to_end() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let ctx = RunContext::new(dir.path(), 2024, true);
    let sim = SimulateParams {
        d: 25,
        uniform_error: 0.073,
        block_error: 0.248,
        pair_rate: 1e6,
        integration_time: 1.0,
        rounds: 0,
        ..Default::default()
    };
    let out = cmd_simulate(&ctx, &sim).map_err(|e| format!("{e:#}"))?;
    let kr = KeyrateParams {
        counts: Some(out.counts_path.clone()),
        ..Default::default()
    };
    let report = cmd_keyrate(&ctx, &kr).map_err(|e| format!("{e:#}"))?;
    let r = report.report.ok_or("no report")?;
    check(
        (r.rate - 0.816).abs() <= 0.05,
        format!(
            "R from sampled counts = {:.4} (E_u {:.4}, E_b {:.4}, {} coincidences)",
            r.rate, r.inputs.uniform_error, r.inputs.block_error, out.total_counts
        ),
    )
}

fn smooth_field(grid: GridSpec, seed: u64) -> OpticalField {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let lobes: Vec<(f64, f64, f64, Complex64)> = (0..4)
        .map(|_| {
            (
                rng.random_range(-150e-6..150e-6),
                rng.random_range(-150e-6..150e-6),
                rng.random_range(60e-6..120e-6),
                Complex64::from_polar(rng.random_range(0.2..1.0), rng.random_range(0.0..std::f64::consts::TAU)),
            )
        })
        .collect();
    OpticalField::from_fn(grid, |x, y| {
        lobes
            .iter()
            .map(|&(cx, cy, w, c)| c * (-((x - cx).powi(2) + (y - cy).powi(2)) / (w * w)).exp())
            .sum()
    })
    .normalized()
    .unwrap()
}

fn rel(a: &OpticalField, b: &OpticalField) -> f64 {
    let num: f64 = a
        .amplitude()
        .iter()
        .zip(b.amplitude())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum();
    let den: f64 = b.amplitude().iter().map(|y| y.norm_sqr()).sum();
    (num / den).sqrt()
}

fn optics_properties() -> Outcome {
    let small = GridSpec::new(128, 128, 10e-6, DEFAULT_WAVELENGTH).unwrap();
    let p = Propagator::new(small).unwrap();
    let (mut power, mut semi, mut inv): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for seed in 0..5 {
        let f = smooth_field(small, seed);
        let a = p.propagate(&f, 2e-3).unwrap();
        let b = p.propagate(&a, 3e-3).unwrap();
        power = power.max((a.power() - 1.0).abs()).max((b.power() - 1.0).abs());
        semi = semi.max(rel(&b, &p.propagate(&f, 5e-3).unwrap()));
        inv = inv.max(rel(&p.propagate(&a, -2e-3).unwrap(), &f));
    }

    let grid = GridSpec::new(256, 256, 10e-6, DEFAULT_WAVELENGTH).unwrap();
    let d = 5;
    let layout = ApertureLayout {
        count: d,
        radius: DEFAULT_APERTURE_RADIUS,
        spacing: DEFAULT_APERTURE_SPACING,
        arrangement: Arrangement::Line,
    };
    let inputs = make_aperture_modes(&layout, &grid).unwrap();
    let spots = disk_modes_at(&grid, &layout.centres().unwrap(), DEFAULT_DETECTOR_RADIUS).unwrap();
    let basis = hdqkd::mub::dft_basis(d).unwrap();
    let u = basis.amplitudes().t().mapv(|z| z.conj());
    let targets: Vec<OpticalField> = (0..d)
        .map(|n| superpose_modes(&spots, &u.column(n).to_vec()).unwrap())
        .collect();
    let cfg = WavefrontMatchConfig {
        planes: 10,
        plane_spacing: DEFAULT_PLANE_SPACING,
        iterations: 30,
    };
    let first = wavefront_match(&inputs, &targets, &cfg).map_err(|e| e.to_string())?;
    let second = wavefront_match(&inputs, &targets, &cfg).map_err(|e| e.to_string())?;
    let zero = PhaseMaskStack::zeros(grid, 10, DEFAULT_PLANE_SPACING).unwrap();
    let baseline = mean_fidelity(&zero, &inputs, &targets).unwrap();
    let achieved = mean_fidelity(&first.stack, &inputs, &targets).unwrap();
    let metrics = SorterMetrics::evaluate(&transfer_matrix(&first.stack, &inputs, &spots).unwrap(), &u).unwrap();
    let deterministic = first.stack == second.stack && first.history == second.history;
    check(
        power < 1e-8
            && semi < 1e-8
            && inv < 1e-8
            && achieved >= baseline
            && metrics.mean_crosstalk < DESK_CROSSTALK_BASELINE
            && deterministic,
        format!(
            "power {power:.1e}, semigroup {semi:.1e}, inverse {inv:.1e}; mean fidelity {achieved:.4} vs zero-stack \
             {baseline:.4}; crosstalk {:.3e} < {DESK_CROSSTALK_BASELINE:.3e}; deterministic {deterministic}",
            metrics.mean_crosstalk
        ),
    )
}

fn not_reproducible() -> Outcome {
    let set = full_mub_set(5).unwrap();
    let bob: Vec<Basis> = set.bases().iter().map(Basis::conjugate).collect();
    let t = apply_noise(
        &ideal_prob_table(set.bases(), &bob).unwrap(),
        &NoiseModel::uniform(0.11).unwrap(),
    )
    .unwrap();
    let s = subset_stats(&t).unwrap();
    let mut worst: f64 = (s.mean_error - 0.11).abs();
    for k in 1..=6 {
        for l in 1..=6 {
            let direct = 1.0 - (1..=5).map(|a| t.get(a, a, k, l)).sum::<f64>();
            worst = worst.max((s.pair_error[[k - 1, l - 1]] - direct).abs());
        }
        worst = worst.max((s.basis_error[k - 1] - s.pair_error[[k - 1, k - 1]]).abs());
    }
    check(
        worst < 1e-12,
        format!(
            "subset statistics agree to {worst:.1e}; semidefinite-programming rates (1.3881-1.5733) and the \
             measured error rates (11%, 32.1%) need external optimisation and hardware and are not reproduced"
        ),
    )
}

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("MUB correctness", Duration::from_secs(1), mub_correctness),
        ("depolarizing rate d=5", Duration::from_secs(1), depolarizing_rate),
        ("block-biased rate d=25", Duration::from_secs(1), block_rate),
        ("threshold sanity and ordering", Duration::from_secs(1), thresholds),
        ("entropy dominance", Duration::from_secs(1), entropy_dominance),
        ("statistics round trip", Duration::from_secs(10), statistics_round_trip),
        ("end-to-end pipeline", Duration::from_secs(30), end_to_end),
        ("optics properties", Duration::from_secs(180), optics_properties),
        ("analytic-only scope", Duration::from_secs(1), not_reproducible),
    ];
    let mut failed = 0;
    for (i, (name, limit, f)) in criteria.into_iter().enumerate() {
        match timed(limit, f) {
            Ok(d) => println!("PASS criterion {}: {name}: {d}", i + 1),
            Err(d) => {
                failed += 1;
                println!("FAIL criterion {}: {name}: {d}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
