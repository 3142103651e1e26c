use hdqkd::keyrate::*;
use hdqkd::mub::{full_mub_set, sqrt_mub_pair, Basis};
use hdqkd::protocol::{apply_noise, ideal_prob_table, NoiseModel, ProbabilityTable};
use ndarray::Array4;

// Oracles evaluated independently at 30 significant digits.
const H5_0132: f64 = 0.826_897_791_144_963;
const DEP_5_011: f64 = 1.153_815_253_647_207;
const HB_25: f64 = 1.913_560_478_621_618;
const R_25: f64 = 0.816_735_232_531_488;
const THR_2_UNIFORM: f64 = 0.110_027_864_438_360;
const THR_25_UNIFORM: f64 = 0.311_293_173_149_864;
const THR_25_EXPERIMENT: f64 = 0.424_854_402_120_769;
const THR_5_DEP: f64 = 0.259_410_977_624_887;

#[test]
fn frozen_values() {
    assert!((shannon_hd(0.132, 5).unwrap() - H5_0132).abs() < 1e-12);
    assert!((rate_depolarizing(5, 0.11).unwrap().rate - DEP_5_011).abs() < 1e-12);
    assert!((entropy_block_biased(25, 0.073, 0.248).unwrap() - HB_25).abs() < 1e-12);
    let r = rate_two_mub(25, 0.073, 0.248).unwrap();
    assert!((r.rate - R_25).abs() < 1e-12);
    assert!((r.inputs.total_error - 0.321).abs() < 1e-15);
}

#[test]
fn rates_sit_inside_reported_intervals() {
    assert!((rate_depolarizing(5, 0.11).unwrap().rate - 1.15).abs() <= 0.05);
    assert!((rate_two_mub(25, 0.073, 0.248).unwrap().rate - 0.8).abs() <= 0.07);
}

#[test]
fn frozen_thresholds() {
    let cases = [
        (Bound::TwoMubUniform, SplitProfile::UNIFORM, 2, THR_2_UNIFORM),
        (Bound::TwoMubUniform, SplitProfile::UNIFORM, 25, THR_25_UNIFORM),
        (Bound::TwoMubBlock, SplitProfile::EXPERIMENT, 25, THR_25_EXPERIMENT),
        (Bound::DepolarizingAllMubs, SplitProfile::UNIFORM, 5, THR_5_DEP),
    ];
    for (bound, profile, d, want) in cases {
        let t = threshold(bound, profile, d).unwrap();
        assert!((t.threshold - want).abs() < 1e-9, "{bound:?} d={d}: {t:?}");
        assert!(t.residual.abs() < THRESHOLD_RATE_TOL);
        assert!(t.monotone && !t.tangential);
    }
}

#[test]
fn threshold_ordering_d25() {
    let u = threshold(Bound::TwoMubUniform, SplitProfile::UNIFORM, 25)
        .unwrap()
        .threshold;
    let x = threshold(Bound::TwoMubBlock, SplitProfile::EXPERIMENT, 25)
        .unwrap()
        .threshold;
    let a = threshold(Bound::TwoMubBlock, SplitProfile::ALL_BLOCK, 25).unwrap();
    assert!(u < x && x < a.threshold);
    assert!(a.tangential);
    assert!((a.threshold - 0.8).abs() < 1e-4);
}

#[test]
fn thresholds_grow_with_dimension() {
    let mut last = 0.0;
    for d in 2..=32 {
        let t = threshold(Bound::TwoMubUniform, SplitProfile::UNIFORM, d)
            .unwrap()
            .threshold;
        assert!(t > last, "d={d}: {t} <= {last}");
        last = t;
    }
    let mut last = 0.0;
    for d in 2..=32 {
        let t = threshold(Bound::DepolarizingAllMubs, SplitProfile::UNIFORM, d)
            .unwrap()
            .threshold;
        assert!(t > last, "d={d}: {t} <= {last}");
        last = t;
    }
}

#[test]
fn rate_decreases_below_threshold() {
    for d in [2usize, 5, 25] {
        let t = threshold(Bound::TwoMubUniform, SplitProfile::UNIFORM, d)
            .unwrap()
            .threshold;
        let grid: Vec<f64> = (0..=200).map(|i| t * i as f64 / 200.0).collect();
        let pts = rate_curve(Bound::TwoMubUniform, d, &grid, SplitProfile::UNIFORM).unwrap();
        assert!(pts.windows(2).all(|w| w[1].rate < w[0].rate));
    }
}

#[test]
fn block_entropy_never_exceeds_uniform_entropy() {
    for d in [4usize, 25] {
        for e_t in [0.01, 0.1, 0.3, 0.5, 0.7] {
            let h = shannon_hd(e_t, d).unwrap();
            for i in 0..50 {
                let e_b = e_t * i as f64 / 49.0;
                let hb = entropy_block_biased(d, e_t - e_b, e_b).unwrap();
                assert!(hb <= h + 1e-12, "d={d} E_t={e_t} E_b={e_b}: {hb} > {h}");
            }
            let hu = entropy_block_biased(d, e_t, 0.0).unwrap();
            assert!((hu - h).abs() < 1e-12);
        }
    }
}

#[test]
fn curve_file_has_expected_columns() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("curve.csv");
    let pts = rate_curve(Bound::TwoMubBlock, 25, &[0.0, 0.1], SplitProfile::EXPERIMENT).unwrap();
    write_curve(&path, Bound::TwoMubBlock, 25, SplitProfile::EXPERIMENT, &pts).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("E_u,E_b,rate\n"));
    assert_eq!(text.lines().count(), 3);
    let meta: CurveSidecar =
        serde_json::from_str(&std::fs::read_to_string(path.with_extension("json")).unwrap()).unwrap();
    assert_eq!(meta.dim, 25);

    let path = dir.path().join("dep.csv");
    let pts = rate_curve(Bound::DepolarizingAllMubs, 5, &[0.0, 0.1], SplitProfile::UNIFORM).unwrap();
    write_curve(&path, Bound::DepolarizingAllMubs, 5, SplitProfile::UNIFORM, &pts).unwrap();
    assert!(std::fs::read_to_string(&path).unwrap().starts_with("E,rate\n"));
}

fn noisy_six_mub_table() -> ProbabilityTable {
    let set = full_mub_set(5).unwrap();
    let bob: Vec<Basis> = set.bases().iter().map(Basis::conjugate).collect();
    let t = ideal_prob_table(set.bases(), &bob).unwrap();
    apply_noise(&t, &NoiseModel::uniform(0.11).unwrap()).unwrap()
}

#[test]
fn subset_stats_match_definitions() {
    let t = noisy_six_mub_table();
    let s = subset_stats(&t).unwrap();
    assert!((s.mean_error - 0.11).abs() < 1e-12);
    for k in 0..6 {
        assert!((s.basis_error[k] - 0.11).abs() < 1e-12);
        for l in 0..6 {
            let direct = 1.0 - (1..=5).map(|a| t.get(a, a, k + 1, l + 1)).sum::<f64>();
            assert!((s.pair_error[[k, l]] - direct).abs() < 1e-12);
            if k != l {
                assert!((s.pair_error[[k, l]] - 0.8).abs() < 1e-12);
            }
        }
        for a in 0..5 {
            for b in 0..5 {
                assert_eq!(s.matched_probs[[k, a, b]], t.get(a + 1, b + 1, k + 1, k + 1));
            }
        }
    }
    assert_eq!(&s.all_probs, t.values());
}

#[test]
fn subset_stats_reject_unmatched_lists() {
    let (r, c) = sqrt_mub_pair(4).unwrap();
    let t = ideal_prob_table(&[r.clone(), c], &[r.conjugate()]).unwrap();
    assert!(subset_stats(&t).is_err());
    assert!(ProbabilityTable::new(Array4::from_elem((1, 1, 2, 2), 0.3)).is_err());
}
