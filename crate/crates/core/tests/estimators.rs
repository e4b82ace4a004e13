use adsim::estim::{
    check_schema, difference_in_means, pehe, s_learner, seq_t_learner, t_learner, CateEstimate, EstimError,
    FeatureView, Observational, OracleTruth, RnnOptions, SequenceView, ViewOptions,
};
use adsim::reference::{default_graph, shipped_reference_bank};
use adsim::sim::{sample_dataset, Dataset, SimConfig};
use adsim::CausalGraph;
use proptest::prelude::*;

fn simulate(config: SimConfig) -> (Dataset, CausalGraph) {
    let graph = default_graph();
    let ds = sample_dataset(&config, &shipped_reference_bank(), &graph).unwrap();
    (ds, graph)
}

fn noiseless(n: usize, gamma: f64, seed: u64) -> SimConfig {
    SimConfig { n_patients: n, horizon: 1, gamma, epsilon: 1.0, seed, outcome_noise_scale: 0.0, ..SimConfig::default() }
}

fn oracle(units: usize, k: usize, seed: u64) -> OracleTruth {
    let mut x = seed;
    let mut next = || {
        x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (x >> 11) as f64 / (1u64 << 53) as f64 * 6.0 - 3.0
    };
    OracleTruth { units: (0..units).collect(), delta: (0..units).map(|_| (0..k).map(|a| if a == 0 { 0.0 } else { next() }).collect()).collect() }
}

fn exact(o: &OracleTruth) -> CateEstimate {
    let k = o.delta[0].len();
    CateEstimate {
        units: o.units.clone(),
        n_actions: k,
        arms: (1..k).collect(),
        tau_hat: (1..k).map(|a| o.delta.iter().map(|d| d[a]).collect()).collect(),
        skipped: vec![],
    }
}

proptest! {
    #[test]
    fn pehe_zero_iff_pointwise_equal(units in 1usize..40, k in 2usize..6, seed in any::<u64>(), i in 0usize..40, bump in 1e-3f64..5.0) {
        let o = oracle(units, k, seed);
        let mut e = exact(&o);
        prop_assert!(pehe(&e, &o).unwrap().per_arm.iter().all(|(_, v)| *v == 0.0));
        let i = i % units;
        e.tau_hat[0][i] += bump;
        let p = pehe(&e, &o).unwrap();
        prop_assert!(p.per_arm[0].1 > 0.0);
        prop_assert!(p.per_arm.iter().all(|(_, v)| *v >= 0.0));
    }

    #[test]
    fn pehe_ignores_unit_order(units in 2usize..40, seed in any::<u64>(), shift in -3.0f64..3.0, rot in 0usize..40) {
        let o = oracle(units, 4, seed);
        let mut e = exact(&o);
        e.tau_hat.iter_mut().flatten().for_each(|v| *v += shift * 0.5);
        e.tau_hat[1][0] -= shift;
        let base = pehe(&e, &o).unwrap();
        let r = rot % units;
        let mut rotated = e.clone();
        rotated.units.rotate_left(r);
        rotated.tau_hat.iter_mut().for_each(|v| v.rotate_left(r));
        let p = pehe(&rotated, &o).unwrap();
        for (a, b) in base.per_arm.iter().zip(&p.per_arm) {
            prop_assert!((a.1 - b.1).abs() <= 1e-12 * a.1.max(1.0));
        }
    }

    #[test]
    fn constant_shift_gives_that_pehe(units in 1usize..30, seed in any::<u64>(), c in -4.0f64..4.0) {
        let o = oracle(units, 3, seed);
        let mut e = exact(&o);
        e.tau_hat.iter_mut().flatten().for_each(|v| *v += c);
        for (_, v) in pehe(&e, &o).unwrap().per_arm {
            prop_assert!((v - c.abs()).abs() < 1e-9);
        }
    }

    #[test]
    fn indexed_oracle_columns_always_leak(k in 0usize..1000, prefix in prop::sample::select(vec!["y", "delta"])) {
        let col = format!("{prefix}{k}");
        let leaked = matches!(check_schema(&["patient_id", "y", col.as_str()]), Err(EstimError::Leakage(_)));
        prop_assert!(leaked);
    }
}

#[test]
fn s_learner_exact_without_heterogeneity() {
    let (ds, graph) = simulate(noiseless(3000, 1.0, 1));
    let obs = Observational::from_dataset(&ds, &graph);
    let view = FeatureView::build(&obs, &graph, ViewOptions::default()).unwrap();
    let est = s_learner(&view).unwrap();
    for (a, v) in est.arms.iter().zip(&est.tau_hat) {
        assert!((v[0] - ds.delta(*a, 0)).abs() < 1e-6, "arm {a}: {} vs {}", v[0], ds.delta(*a, 0));
    }
}

#[test]
fn s_learner_misses_heterogeneity() {
    let (ds, graph) = simulate(noiseless(3000, 4.0, 2));
    let obs = Observational::from_dataset(&ds, &graph);
    let view = FeatureView::build(&obs, &graph, ViewOptions::default()).unwrap();
    let o = OracleTruth::from_dataset(&ds);
    assert!(pehe(&s_learner(&view).unwrap(), &o).unwrap().macro_pehe > 0.5);
    assert!(pehe(&t_learner(&view).unwrap(), &o).unwrap().macro_pehe < 1e-6);
}

#[test]
fn t_learner_is_deterministic() {
    let (ds, graph) = simulate(SimConfig { n_patients: 800, horizon: 3, seed: 3, ..SimConfig::default() });
    let obs = Observational::from_dataset(&ds, &graph);
    let view = FeatureView::build(&obs, &graph, ViewOptions { t_s: 2, include_z: true }).unwrap();
    assert_eq!(t_learner(&view).unwrap(), t_learner(&view).unwrap());
}

#[test]
fn hiding_the_subtype_drops_the_feature() {
    let (ds, graph) = simulate(SimConfig { n_patients: 50, horizon: 2, seed: 4, ..SimConfig::default() });
    let obs = Observational::from_dataset(&ds, &graph);
    let with = FeatureView::build(&obs, &graph, ViewOptions { t_s: 1, include_z: true }).unwrap();
    let without = FeatureView::build(&obs, &graph, ViewOptions { t_s: 1, include_z: false }).unwrap();
    assert_eq!(with.names.len(), without.names.len() + 1);
    assert!(with.names.iter().any(|n| n == "Z=1"));
    assert!(!without.names.iter().any(|n| n == "Z=1"));
    assert_eq!(with.train_x.len(), 100);
    assert_eq!(with.eval_x.len(), 50);
}

#[test]
fn strict_policy_starves_the_control_arm() {
    let (ds, graph) = simulate(SimConfig { n_patients: 400, horizon: 2, epsilon: 0.0, seed: 5, ..SimConfig::default() });
    let obs = Observational::from_dataset(&ds, &graph);
    let view = FeatureView::build(&obs, &graph, ViewOptions { t_s: 1, include_z: true }).unwrap();
    assert!(matches!(t_learner(&view), Err(EstimError::ArmStarved(a)) if a == vec![0]));
}

#[test]
fn bad_step_is_reported() {
    let (ds, graph) = simulate(SimConfig { n_patients: 10, horizon: 2, seed: 6, ..SimConfig::default() });
    let obs = Observational::from_dataset(&ds, &graph);
    assert!(matches!(
        FeatureView::build(&obs, &graph, ViewOptions { t_s: 2, include_z: true }),
        Err(EstimError::BadStep { t_s: 2, horizon: 2 })
    ));
}

#[test]
fn difference_in_means_is_unbiased_under_randomization() {
    let config = SimConfig { n_patients: 10_000, horizon: 1, gamma: 1.0, epsilon: 1.0, seed: 7, ..SimConfig::default() };
    let (ds, graph) = simulate(config);
    let obs = Observational::from_dataset(&ds, &graph);
    let view = FeatureView::build(&obs, &graph, ViewOptions::default()).unwrap();
    for (a, d) in difference_in_means(&view).iter().enumerate().skip(1) {
        let d = d.unwrap();
        assert!((d.estimate - ds.effect.ate[a]).abs() < 3.0 * d.std_error, "arm {a}: {d:?}");
    }
}

#[test]
fn difference_in_means_is_confounded_by_the_covariate_policy() {
    // Action 0 lies outside every policy class, so the weakest overlap that
    // still observes it is a small positive epsilon.
    let err = |epsilon: f64, seed: u64| {
        let config = SimConfig { n_patients: 3000, horizon: 2, gamma: 1.0, epsilon, seed, ..SimConfig::default() };
        let (ds, graph) = simulate(config);
        let obs = Observational::from_dataset(&ds, &graph);
        let view = FeatureView::build(&obs, &graph, ViewOptions { t_s: 1, include_z: true }).unwrap();
        let dim = difference_in_means(&view);
        (1..8).filter_map(|a| dim[a].map(|d| (d.estimate - ds.effect.ate[a]).abs())).sum::<f64>() / 7.0
    };
    let (mut weak, mut full) = (0.0, 0.0);
    for seed in 0..20 {
        weak += err(0.05, seed);
        full += err(1.0, seed);
    }
    assert!(weak > full, "{weak} vs {full}");
}

#[test]
fn recurrent_learner_runs_and_is_seeded() {
    let (ds, graph) = simulate(SimConfig { n_patients: 300, horizon: 3, epsilon: 1.0, seed: 8, ..SimConfig::default() });
    let obs = Observational::from_dataset(&ds, &graph);
    let view = SequenceView::build(&obs, &graph, ViewOptions { t_s: 2, include_z: true }).unwrap();
    assert!(view.sequences.iter().all(|s| s.len() == 3));
    let opts = RnnOptions { epochs: 50, seed: 1, ..RnnOptions::default() };
    let a = seq_t_learner(&view, &opts).unwrap();
    let b = seq_t_learner(&view, &opts).unwrap();
    assert_eq!(a, b);
    assert!(a.tau_hat.iter().flatten().all(|v| v.is_finite()));
    let c = seq_t_learner(&view, &RnnOptions { seed: 2, ..opts }).unwrap();
    assert_ne!(a, c);
    pehe(&a, &OracleTruth::from_dataset(&ds)).unwrap();
}
