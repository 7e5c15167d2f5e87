//! End-to-end properties of the learner: structure/data separation across
//! neighboring datasets, ledger soundness under replay, and proptest
//! invariants for the supporting pieces.

use std::sync::Arc;

use proptest::prelude::*;
use sgbdt_core::data::{clamp_to_border, Dataset, FeatureSpec, Schema, Task};
use sgbdt_core::model::LossKind;
use sgbdt_core::rng::RunSeeds;
use sgbdt_core::params::{Hyperparameters, InitNoiseVariant};
use sgbdt_core::trainer::{train_sgbdt, SgbdtConfig};

fn schema() -> Arc<Schema> {
    Arc::new(Schema {
        task: Task::Regression,
        label: "y".into(),
        label_values: None,
        features: vec![
            FeatureSpec::numerical("a", 0.0, 1.0),
            FeatureSpec::numerical("b", -2.0, 2.0),
            FeatureSpec::categorical("c", &["p", "q", "r"]),
        ],
    })
}

fn synthetic(n: usize, seed: u64) -> Dataset {
    use rand::Rng;
    let mut rng = sgbdt_core::rng::derive_rng(seed, &[]);
    let mut features = Vec::with_capacity(3 * n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let a: f64 = rng.random_range(0.0..1.0);
        let b: f64 = rng.random_range(-2.0..2.0);
        let c: f64 = rng.random_range(0..3u32) as f64;
        features.extend_from_slice(&[a, b, c]);
        labels.push(3.0 * a - b + c + rng.random_range(-0.1..0.1));
    }
    Dataset::new(schema(), features, labels)
}

fn quick_hyper() -> Hyperparameters {
    Hyperparameters {
        g_star: 1.0,
        m_star: 5.0,
        lambda: 1.0,
        eta: 0.1,
        depth: 3,
        gamma: 0.4,
        t_regular: 6,
        t_extra: 4,
        eps_init: 0.05,
        eps_trees: 1.0,
        delta_trees: 1e-5,
        r1: 0.5,
        r2: 0.5,
        r_num: 1.0,
        alpha_max: 24,
        init_noise_variant: InitNoiseVariant::SampledScale,
    }
}

#[test]
fn tree_shapes_ignore_the_data_for_100_neighbor_trials() {
    use rand::Rng;
    let data = synthetic(80, 9);
    let mut rng = sgbdt_core::rng::derive_rng(10, &[]);
    for trial in 0..100u64 {
        let drop = rng.random_range(0..data.len());
        let keep: Vec<usize> = (0..data.len()).filter(|&i| i != drop).collect();
        let neighbor = data.subset(&keep);

        let cfg = SgbdtConfig::new(quick_hyper(), LossKind::Mse);
        let structure_seed = 5000 + trial;
        let a = train_sgbdt(&data, &cfg, RunSeeds::new(structure_seed, 1)).unwrap();
        let b = train_sgbdt(&neighbor, &cfg, RunSeeds::new(structure_seed, 2)).unwrap();
        assert_eq!(a.ensemble.trees.len(), b.ensemble.trees.len());
        for (ta, tb) in a.ensemble.trees.iter().zip(&b.ensemble.trees) {
            assert!(ta.same_shape(tb), "trial {trial}: shapes diverged");
        }
    }
}

#[test]
fn ledger_replay_is_exact_and_bounded() {
    let data = synthetic(150, 11);
    let mut cfg = SgbdtConfig::new(quick_hyper(), LossKind::Mse);
    cfg.keep_ledger_history = true;
    let model = train_sgbdt(&data, &cfg, RunSeeds::new(3, 4)).unwrap();
    assert!(model.ledger.replay_check());
    let history = model.ledger.history().unwrap();
    let budget = model.manifest.plan.rho_budget;
    for i in 0..data.len() {
        let replayed: f64 = history.iter().map(|round| round[i]).sum();
        assert_eq!(replayed, model.ledger.spent(i).unwrap());
        assert!(replayed <= budget);
    }
}

#[test]
fn leaf_count_is_always_two_to_the_depth() {
    let data = synthetic(40, 12);
    for depth in 1..=5u32 {
        let mut h = quick_hyper();
        h.depth = depth;
        h.t_regular = 2;
        h.t_extra = 0;
        let cfg = SgbdtConfig::new(h, LossKind::Mse);
        let model = train_sgbdt(&data, &cfg, RunSeeds::new(7, 8)).unwrap();
        for t in &model.ensemble.trees {
            assert_eq!(t.leaves.len(), 1 << depth);
            assert_eq!(t.splits.len(), (1 << depth) - 1);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn clamp_is_idempotent_and_contained(v in -1e6f64..1e6, lo in -10.0f64..0.0, width in 1e-6f64..20.0) {
        let hi = lo + width;
        let once = clamp_to_border(v, lo, hi);
        prop_assert_eq!(once, clamp_to_border(once, lo, hi));
        prop_assert!(once >= lo && once <= hi);
    }

    #[test]
    fn composition_is_the_plain_sum(parts in proptest::collection::vec(0.0f64..10.0, 0..20)) {
        let total = sgbdt_core::accountant::rdp_compose(&parts);
        let direct: f64 = parts.iter().sum();
        prop_assert!((total - direct).abs() <= 1e-12);
    }

    #[test]
    fn adp_round_trip_holds_for_random_inputs(
        alpha in 2u32..60,
        rho in 0.0f64..20.0,
        delta_exp in -12.0f64..-0.31,
    ) {
        let delta = 10f64.powf(delta_exp);
        let eps = sgbdt_core::accountant::rdp_to_adp(alpha, rho, delta).unwrap();
        let back = (rho - alpha as f64 * eps).exp();
        prop_assert!((back - delta).abs() <= 1e-12 * delta);
    }

    #[test]
    fn bucket_tiling_invariant(values in proptest::collection::vec(0.0f64..1.0, 0..40)) {
        use sgbdt_core::expmech::{build_buckets, NodeData, MseGainUtility};
        let schema = Arc::new(Schema {
            task: Task::Regression,
            label: "y".into(),
            label_values: None,
            features: vec![FeatureSpec::numerical("a", 0.0, 1.0)],
        });
        let n = values.len();
        let data = Dataset::new(schema, values, vec![0.0; n]);
        let rows: Vec<usize> = (0..n).collect();
        let grads = vec![0.5; n];
        let node = NodeData { dataset: &data, rows: &rows, gradients: &grads };
        let set = build_buckets(&node, data.schema.as_ref(), 2.0, &MseGainUtility { lambda: 1.0, g_star: 1.0 });
        // contiguous, non-overlapping, tiles [v_min, v_max] exactly
        let mut cursor = 0.0f64;
        for b in &set.buckets {
            prop_assert_eq!(b.lo, cursor);
            prop_assert!(b.hi >= b.lo);
            cursor = b.hi;
        }
        prop_assert_eq!(cursor, 1.0);
    }
}
