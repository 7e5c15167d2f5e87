//! The DP-GBDT learner: DP initial score, random complete trees, Poisson
//! subsampling, noised leaves, and the ensemble loop gated by the
//! individual Renyi filter.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::accountant::{
    initialize, init_score_noise_scale, init_score_pure_epsilon, tree_curve_slope,
    ChordLossTable, SubsampledLossTable,
};
use crate::data::{Dataset, FeatureKind, Schema};
use crate::error::TrainError;
use crate::filter::PrivacyLedger;
use crate::manifest::{config_hash, RunManifest};
use crate::model::{gradient, Ensemble, LossKind, Split, Tree, LEAF_SIGN};
use crate::params::Hyperparameters;
use crate::rng::{derive_rng, sample_gauss, sample_laplace, tag, RunSeeds};

/// Dynamic leaf noise scaling divides the noised sum by the noised support;
/// static leaf noising divides by the gamma-expected leaf support instead,
/// so the effective noise does not shrink with the data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LeafNoiseMode {
    #[default]
    Dynamic,
    Static,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitScoreMode {
    /// Laplace-noised clipped label mean (logit-transformed for logistic loss).
    #[default]
    DpMean,
    /// Constant zero; used by the distributed protocol.
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgbdtConfig {
    pub hyper: Hyperparameters,
    pub loss: LossKind,
    #[serde(default = "default_true")]
    pub filter_enabled: bool,
    #[serde(default)]
    pub leaf_noise: LeafNoiseMode,
    #[serde(default)]
    pub init_score: InitScoreMode,
    #[serde(default)]
    pub keep_ledger_history: bool,
}

fn default_true() -> bool {
    true
}

impl SgbdtConfig {
    pub fn new(hyper: Hyperparameters, loss: LossKind) -> Self {
        Self {
            hyper,
            loss,
            filter_enabled: true,
            leaf_noise: LeafNoiseMode::Dynamic,
            init_score: InitScoreMode::DpMean,
            keep_ledger_history: false,
        }
    }
}

pub struct TrainedModel {
    pub ensemble: Ensemble,
    pub manifest: RunManifest,
    pub ledger: PrivacyLedger,
}

/// Laplace-noised mean of labels clamped to [-m*, m*].
pub fn dp_init_score<R: rand::Rng>(
    labels: &[f64],
    m_star: f64,
    eps_init: f64,
    variant: crate::params::InitNoiseVariant,
    rng: &mut R,
) -> Result<f64, TrainError> {
    if labels.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let n = labels.len();
    let mean = labels
        .iter()
        .map(|y| y.clamp(-m_star, m_star))
        .sum::<f64>()
        / n as f64;
    let scale = init_score_noise_scale(variant, m_star, n, eps_init);
    Ok(mean + sample_laplace(rng, scale))
}

/// Sample a complete random tree: features drawn with weight `r_num` for
/// numerical and 1 for categorical features, numerical thresholds uniform
/// inside the static border, categorical values uniform over the value list.
/// Depends only on (schema, rng), never on data.
pub fn random_tree<R: rand::Rng>(schema: &Schema, depth: u32, r_num: f64, rng: &mut R) -> Tree {
    let weights: Vec<f64> = schema
        .features
        .iter()
        .map(|f| if f.is_numerical() { r_num } else { 1.0 })
        .collect();
    let total: f64 = weights.iter().sum();
    let internal = (1usize << depth) - 1;
    let mut splits = Vec::with_capacity(internal);
    for _ in 0..internal {
        let mut draw = rng.random::<f64>() * total;
        let mut feature = weights.len() - 1;
        for (j, w) in weights.iter().enumerate() {
            draw -= w;
            if draw <= 0.0 {
                feature = j;
                break;
            }
        }
        let split = match &schema.features[feature].kind {
            FeatureKind::Numerical { min, max } => Split::Numerical {
                feature,
                threshold: rng.random_range(*min..*max),
            },
            FeatureKind::Categorical { values } => Split::Categorical {
                feature,
                category: rng.random_range(0..values.len()) as u32,
            },
        };
        splits.push(split);
    }
    Tree::with_splits(depth, splits)
}

/// Independent Bernoulli(gamma) inclusion over `n` indices.
pub fn poisson_subsample<R: rand::Rng>(n: usize, gamma: f64, rng: &mut R) -> Vec<usize> {
    (0..n)
        .filter(|_| rng.random::<f64>() < gamma)
        .collect()
}

/// The pre-division pair released by the leaf mechanism: the noised support
/// before the lambda floor and the noised clipped-gradient sum.
pub fn dp_leaf_pair<R: rand::Rng>(
    support: usize,
    clipped_sum: f64,
    sigma2_leaf: f64,
    r1: f64,
    r2: f64,
    rng: &mut R,
) -> (f64, f64) {
    let n_noised = support as f64 + sample_gauss(rng, sigma2_leaf / (2.0 * r1));
    let s_noised = clipped_sum + sample_gauss(rng, sigma2_leaf / (2.0 * r2));
    (n_noised, s_noised)
}

struct LeafParams {
    sigma2_leaf: f64,
    r1: f64,
    r2: f64,
    lambda: f64,
    mode: LeafNoiseMode,
    /// Data-independent denominator for static leaf noising.
    expected_support: f64,
}

fn dp_leaf_from_acc<R: rand::Rng>(
    support: usize,
    clipped_sum: f64,
    p: &LeafParams,
    rng: &mut R,
) -> f64 {
    let (n_noised, s_noised) =
        dp_leaf_pair(support, clipped_sum, p.sigma2_leaf, p.r1, p.r2, rng);
    let denom = match p.mode {
        LeafNoiseMode::Dynamic => p.lambda.max(n_noised),
        LeafNoiseMode::Static => p.lambda.max(p.expected_support),
    };
    LEAF_SIGN * s_noised / denom
}

/// Differentially private leaf value for a gradient slice. Gradients are
/// clamped to [-g*, g*]; support and sum are Gaussian-noised with variances
/// sigma^2/(2 r1) and sigma^2/(2 r2); the sign convention of `LEAF_SIGN`
/// applies. An empty slice is valid: the lambda floor caps the division.
pub fn dp_leaf<R: rand::Rng>(
    gradients: &[f64],
    g_star: f64,
    sigma2_leaf: f64,
    r1: f64,
    r2: f64,
    lambda: f64,
    rng: &mut R,
) -> f64 {
    let clipped_sum: f64 = gradients.iter().map(|g| g.clamp(-g_star, g_star)).sum();
    let p = LeafParams {
        sigma2_leaf,
        r1,
        r2,
        lambda,
        mode: LeafNoiseMode::Dynamic,
        expected_support: 0.0,
    };
    dp_leaf_from_acc(gradients.len(), clipped_sum, &p, rng)
}

/// One subsampled, random-structure, noised-leaf training round.
///
/// Every one of the 2^d leaves runs the leaf mechanism, including empty
/// ones, so the output distribution never reveals occupancy.
#[allow(clippy::too_many_arguments)]
pub(crate) fn train_single_tree_inner(
    data: &Dataset,
    active: &[usize],
    preds: &[f64],
    cfg: &SgbdtConfig,
    sigma2_leaf: f64,
    structure: &mut impl rand::Rng,
    noise_seed: u64,
    round: u32,
) -> (Tree, usize) {
    let h = &cfg.hyper;
    let mut tree = random_tree(data.schema.as_ref(), h.depth, h.r_num, structure);

    let mut poisson_rng = derive_rng(noise_seed, &[tag::POISSON, round as u64]);
    let picked = poisson_subsample(active.len(), h.gamma, &mut poisson_rng);

    let leaves = Tree::num_leaves(h.depth);
    let mut support = vec![0usize; leaves];
    let mut sums = vec![0.0f64; leaves];
    for &k in &picked {
        let i = active[k];
        let row = data.row(i);
        let leaf = tree.leaf_index(row);
        let g = gradient(cfg.loss, data.label(i), preds[i]).clamp(-h.g_star, h.g_star);
        support[leaf] += 1;
        sums[leaf] += g;
    }

    let params = LeafParams {
        sigma2_leaf,
        r1: h.r1,
        r2: h.r2,
        lambda: h.lambda,
        mode: cfg.leaf_noise,
        expected_support: h.gamma * active.len() as f64 / leaves as f64,
    };
    for l in 0..leaves {
        let mut leaf_rng = derive_rng(noise_seed, &[tag::LEAF, round as u64, l as u64]);
        tree.leaves[l] = dp_leaf_from_acc(support[l], sums[l], &params, &mut leaf_rng);
    }
    (tree, picked.len())
}

/// Standalone single-tree trainer (the per-round step of the learner).
pub fn train_single_tree(
    data: &Dataset,
    ensemble: &Ensemble,
    cfg: &SgbdtConfig,
    sigma2_leaf: f64,
    seeds: RunSeeds,
    round: u32,
) -> (Tree, usize) {
    let preds: Vec<f64> = (0..data.len())
        .map(|i| ensemble.predict_raw(data.row(i)))
        .collect();
    let active: Vec<usize> = (0..data.len()).collect();
    let mut structure = derive_rng(seeds.structure, &[tag::STRUCTURE, round as u64]);
    train_single_tree_inner(
        data,
        &active,
        &preds,
        cfg,
        sigma2_leaf,
        &mut structure,
        seeds.noise,
        round,
    )
}

/// Train a DP-GBDT ensemble on `data`, optionally extending the dataset with
/// a late-arriving `stream_batch` after the regular rounds.
pub fn train_sgbdt_stream(
    data: &Dataset,
    stream_batch: Option<&Dataset>,
    cfg: &SgbdtConfig,
    seeds: RunSeeds,
) -> Result<TrainedModel, TrainError> {
    // Accounting feasibility comes first, before any data-dependent work.
    let plan = initialize(&cfg.hyper)?;
    if data.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let h = cfg.hyper.clone();

    let init_score = match cfg.init_score {
        InitScoreMode::Zero => 0.0,
        InitScoreMode::DpMean => {
            let mut rng = derive_rng(seeds.noise, &[tag::INIT_SCORE]);
            let mean = dp_init_score(
                data.labels(),
                h.m_star,
                h.eps_init,
                h.init_noise_variant,
                &mut rng,
            )?;
            match cfg.loss {
                LossKind::Mse => mean,
                // raw-score space: logit of the (clamped) DP label mean
                LossKind::Logistic => {
                    let p = mean.clamp(1e-3, 1.0 - 1e-3);
                    (p / (1.0 - p)).ln()
                }
            }
        }
    };
    let eps_init_effective = match cfg.init_score {
        InitScoreMode::Zero => 0.0,
        InitScoreMode::DpMean => init_score_pure_epsilon(h.init_noise_variant, h.eps_init),
    };

    let mut ensemble = Ensemble::new(init_score, h.eta, cfg.loss);
    let mut preds = vec![init_score; data.len()];
    let mut ledger = PrivacyLedger::new(
        plan.alpha_hat,
        plan.rho_budget,
        data.len(),
        cfg.keep_ledger_history,
    );
    let table = SubsampledLossTable::new(plan.alpha_hat, h.gamma)?;
    // charges go through the convex-chord table: exact at the endpoints,
    // a sound upper bound in between, O(1) per point
    let chord = ChordLossTable::new(
        &table,
        tree_curve_slope(h.r1, h.r2, 0.0, plan.sigma2_leaf),
        tree_curve_slope(h.r1, h.r2, h.g_star, plan.sigma2_leaf),
    );
    let worst_loss = chord.worst();

    // With the filter, extra rounds run on whatever individual budget is
    // left; without it, composition admits exactly the regular rounds.
    let rounds = if cfg.filter_enabled {
        h.t_regular + h.t_extra
    } else {
        h.t_regular
    };

    let mut working = data.clone();
    let mut per_round_active = Vec::with_capacity(rounds as usize);
    let mut per_round_subsampled = Vec::with_capacity(rounds as usize);

    for t in 1..=rounds {
        if t == h.t_regular + 1 {
            if let Some(batch) = stream_batch {
                working = concat(&working, batch);
                for i in data.len()..working.len() {
                    preds.push(ensemble.predict_raw(working.row(i)));
                }
                ledger.extend_points(batch.len());
            }
        }
        let n = working.len();
        let proposed: Vec<f64> = if cfg.filter_enabled {
            (0..n)
                .into_par_iter()
                .map(|i| {
                    let g = gradient(cfg.loss, working.label(i), preds[i])
                        .clamp(-h.g_star, h.g_star);
                    chord.charge(tree_curve_slope(h.r1, h.r2, g, plan.sigma2_leaf))
                })
                .collect()
        } else {
            vec![worst_loss; n]
        };
        let active_flags = ledger.filter_round(&proposed)?;
        let active: Vec<usize> = (0..n).filter(|&i| active_flags[i]).collect();
        per_round_active.push(active.len());

        let mut structure = derive_rng(seeds.structure, &[tag::STRUCTURE, t as u64]);
        let (tree, picked) = train_single_tree_inner(
            &working,
            &active,
            &preds,
            cfg,
            plan.sigma2_leaf,
            &mut structure,
            seeds.noise,
            t,
        );
        per_round_subsampled.push(picked);
        preds
            .par_iter_mut()
            .enumerate()
            .for_each(|(i, p)| *p += h.eta * tree.value(working.row(i)));
        ensemble.trees.push(tree);
    }

    debug_assert!(ledger.replay_check());
    let manifest = RunManifest {
        plan,
        ledger: ledger.summary(),
        per_round_active,
        per_round_subsampled,
        seeds,
        config_hash: config_hash(cfg),
        epsilon_init_effective: eps_init_effective,
        epsilon_total_reported: plan.epsilon_reported + eps_init_effective,
    };
    Ok(TrainedModel {
        ensemble,
        manifest,
        ledger,
    })
}

/// Train a DP-GBDT ensemble: accountant plan, DP init score, then
/// filter-gated subsampled rounds.
pub fn train_sgbdt(
    data: &Dataset,
    cfg: &SgbdtConfig,
    seeds: RunSeeds,
) -> Result<TrainedModel, TrainError> {
    train_sgbdt_stream(data, None, cfg, seeds)
}

fn concat(a: &Dataset, b: &Dataset) -> Dataset {
    let m = a.schema.num_features();
    let mut features = Vec::with_capacity((a.len() + b.len()) * m);
    let mut labels = Vec::with_capacity(a.len() + b.len());
    for i in 0..a.len() {
        features.extend_from_slice(a.row(i));
        labels.push(a.label(i));
    }
    for i in 0..b.len() {
        features.extend_from_slice(b.row(i));
        labels.push(b.label(i));
    }
    Dataset::new(a.schema.clone(), features, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{FeatureSpec, Task};
    use crate::params::InitNoiseVariant;
    use std::sync::Arc;

    fn schema(task: Task) -> Schema {
        Schema {
            task,
            label: "y".into(),
            label_values: None,
            features: vec![
                FeatureSpec::numerical("a", 0.0, 1.0),
                FeatureSpec::categorical("c", &["u", "v", "w"]),
            ],
        }
    }

    fn toy_dataset(n: usize) -> Dataset {
        let s = Arc::new(schema(Task::Regression));
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let x = i as f64 / n as f64;
            features.push(x);
            features.push((i % 3) as f64);
            labels.push(2.0 * x + 1.0);
        }
        Dataset::new(s, features, labels)
    }

    fn zero_noise_rng() -> impl rand::Rng {
        // not actually zero noise; tests that need noise-free paths pass
        // eps_init -> infinity or sigma -> 0 instead
        derive_rng(1, &[])
    }

    #[test]
    fn init_score_clamps_then_averages() {
        // forced zero noise via enormous eps_init
        let mut rng = zero_noise_rng();
        let v = dp_init_score(&[1.0, 2.0, 3.0], 5.0, 1e12, InitNoiseVariant::SampledScale, &mut rng)
            .unwrap();
        assert!((v - 2.0).abs() < 1e-9, "{v}");
        let mut rng = zero_noise_rng();
        let v = dp_init_score(&[10.0, 10.0], 1.0, 1e12, InitNoiseVariant::SampledScale, &mut rng)
            .unwrap();
        assert!((v - 1.0).abs() < 1e-9, "{v}");
    }

    #[test]
    fn init_score_concentrates_as_budget_grows() {
        let labels: Vec<f64> = (0..100).map(|i| (i % 7) as f64).collect();
        let clamped_mean = labels.iter().sum::<f64>() / 100.0;
        let mut spread_small = 0.0f64;
        for seed in 0..50 {
            let mut rng = derive_rng(seed, &[9]);
            let v = dp_init_score(&labels, 10.0, 1e6, InitNoiseVariant::SampledScale, &mut rng)
                .unwrap();
            spread_small = spread_small.max((v - clamped_mean).abs());
        }
        assert!(spread_small < 1e-3, "{spread_small}");
    }

    #[test]
    fn init_score_rejects_empty() {
        let mut rng = zero_noise_rng();
        assert!(dp_init_score(&[], 1.0, 1.0, InitNoiseVariant::SampledScale, &mut rng).is_err());
    }

    #[test]
    fn random_tree_depth_one_has_one_split() {
        let s = schema(Task::Regression);
        let mut rng = derive_rng(3, &[]);
        let t = random_tree(&s, 1, 1.0, &mut rng);
        assert_eq!(t.splits.len(), 1);
        assert_eq!(t.leaves.len(), 2);
    }

    #[test]
    fn random_tree_thresholds_stay_in_border() {
        let s = Schema {
            task: Task::Regression,
            label: "y".into(),
            label_values: None,
            features: vec![FeatureSpec::numerical("a", 0.0, 1.0)],
        };
        let mut rng = derive_rng(4, &[]);
        for _ in 0..50 {
            let t = random_tree(&s, 3, 1.0, &mut rng);
            for sp in &t.splits {
                match sp {
                    Split::Numerical { threshold, .. } => {
                        assert!((0.0..1.0).contains(threshold))
                    }
                    _ => panic!("only numerical features declared"),
                }
            }
        }
    }

    #[test]
    fn random_tree_feature_weighting_frequency() {
        // r = 2 with one numerical + one categorical: numerical picked with
        // probability 2/3; Monte-Carlo frequency over 1e5 draws
        let s = schema(Task::Regression);
        let mut rng = derive_rng(5, &[]);
        let mut numerical = 0usize;
        let total = 100_000;
        for _ in 0..total {
            let t = random_tree(&s, 1, 2.0, &mut rng);
            if matches!(t.splits[0], Split::Numerical { .. }) {
                numerical += 1;
            }
        }
        let freq = numerical as f64 / total as f64;
        assert!((freq - 2.0 / 3.0).abs() < 0.02, "freq {freq}");
    }

    #[test]
    fn poisson_edge_ratios() {
        let mut rng = derive_rng(6, &[]);
        assert!(poisson_subsample(100, 0.0, &mut rng).is_empty());
        assert_eq!(poisson_subsample(100, 1.0, &mut rng).len(), 100);
    }

    #[test]
    fn poisson_concentrates() {
        let n = 100_000;
        let gamma = 0.3;
        let mut rng = derive_rng(7, &[]);
        let size = poisson_subsample(n, gamma, &mut rng).len() as f64;
        let sigma = (n as f64 * gamma * (1.0 - gamma)).sqrt();
        assert!((size - n as f64 * gamma).abs() < 3.0 * sigma, "{size}");
    }

    #[test]
    fn dp_leaf_noise_free_values() {
        // sigma^2 -> 0 makes the Gaussians vanish
        let tiny = 1e-30;
        let mut rng = derive_rng(8, &[]);
        let grads = vec![-0.5; 10];
        let v = dp_leaf(&grads, 1.0, tiny, 0.5, 0.5, 1.0, &mut rng);
        assert!((v.abs() - 0.5).abs() < 1e-9, "{v}");
        // empty leaf: s = 0, floor lambda = 1 -> 0
        let v = dp_leaf(&[], 1.0, tiny, 0.5, 0.5, 1.0, &mut rng);
        assert!(v.abs() < 1e-9);
        // clamp to +-1 then sum: (2, -3) -> 1 - 1 = 0
        let v = dp_leaf(&[2.0, -3.0], 1.0, tiny, 0.5, 0.5, 0.1, &mut rng);
        assert!(v.abs() < 1e-9);
    }

    fn base_cfg() -> SgbdtConfig {
        let mut h = crate::params::tests_support::base_hyper();
        h.depth = 2;
        h.t_regular = 5;
        h.t_extra = 0;
        h.gamma = 0.5;
        h.eps_trees = 2.0;
        SgbdtConfig::new(h, LossKind::Mse)
    }

    #[test]
    fn identical_seeds_give_identical_models() {
        let data = toy_dataset(200);
        let cfg = base_cfg();
        let a = train_sgbdt(&data, &cfg, RunSeeds::new(1, 2)).unwrap();
        let b = train_sgbdt(&data, &cfg, RunSeeds::new(1, 2)).unwrap();
        assert_eq!(a.ensemble, b.ensemble);
        assert_eq!(a.manifest.per_round_active, b.manifest.per_round_active);
    }

    #[test]
    fn zero_rounds_is_init_only() {
        let data = toy_dataset(50);
        let mut cfg = base_cfg();
        cfg.hyper.t_regular = 0;
        cfg.hyper.t_extra = 0;
        let m = train_sgbdt(&data, &cfg, RunSeeds::new(1, 2)).unwrap();
        assert!(m.ensemble.trees.is_empty());
        let x = data.row(0);
        assert_eq!(m.ensemble.predict(x), m.ensemble.init_score);
    }

    #[test]
    fn gamma_zero_trees_are_pure_noise_and_empty_subsamples() {
        let data = toy_dataset(50);
        let mut cfg = base_cfg();
        // gamma = 0 is outside the hyperparameter domain; drive the
        // single-tree path directly instead
        cfg.hyper.gamma = 1e-12;
        let m = train_sgbdt(&data, &cfg, RunSeeds::new(3, 4)).unwrap();
        assert!(m.manifest.per_round_subsampled.iter().all(|&s| s == 0));
    }

    #[test]
    fn noise_free_limit_matches_nonprivate_leaf_formula() {
        // sigma^2 -> 0, gamma = 1, filter off: leaf values converge to the
        // floor-denominator nonprivate leaf on the same random structure
        let data = toy_dataset(64);
        let mut cfg = base_cfg();
        cfg.hyper.gamma = 1.0;
        cfg.hyper.t_regular = 1;
        cfg.filter_enabled = false;
        cfg.hyper.eps_trees = 1e9;
        cfg.hyper.alpha_max = 2;
        cfg.hyper.delta_trees = 0.5;
        cfg.init_score = InitScoreMode::Zero;
        // force the plan's sigma to the smallest grid point by requesting an
        // epsilon so large every candidate is inadmissible except... instead
        // drive the single-tree trainer directly with sigma = tiny.
        let ensemble = Ensemble::new(0.0, cfg.hyper.eta, LossKind::Mse);
        let (tree, _) = train_single_tree(&data, &ensemble, &cfg, 1e-30, RunSeeds::new(9, 10), 1);

        // oracle: replay the same structure, clamp gradients, use the
        // floor-only denominator
        let mut structure = derive_rng(9, &[tag::STRUCTURE, 1]);
        let shape = random_tree(data.schema.as_ref(), cfg.hyper.depth, cfg.hyper.r_num, &mut structure);
        assert!(shape.same_shape(&tree));
        let leaves = shape.leaves.len();
        let mut sums = vec![0.0; leaves];
        let mut counts = vec![0usize; leaves];
        for i in 0..data.len() {
            let l = shape.leaf_index(data.row(i));
            let g = gradient(LossKind::Mse, data.label(i), 0.0).clamp(-1.0, 1.0);
            sums[l] += g;
            counts[l] += 1;
        }
        for l in 0..leaves {
            let want = LEAF_SIGN * sums[l] / cfg.hyper.lambda.max(counts[l] as f64);
            assert!(
                (tree.leaves[l] - want).abs() < 1e-9,
                "leaf {l}: {} vs {want}",
                tree.leaves[l]
            );
        }
    }

    #[test]
    fn exhausted_budget_trains_on_empty_active_sets() {
        let data = toy_dataset(30);
        let cfg = base_cfg();
        // budget zero: nobody is ever admitted
        let mut ledger = PrivacyLedger::new(2, 0.0, data.len(), false);
        let active = ledger.filter_round(&vec![0.1; data.len()]).unwrap();
        assert!(active.iter().all(|a| !a));
    }

    #[test]
    fn structure_is_data_independent() {
        // fixed structural stream, neighboring datasets: identical shapes
        let data = toy_dataset(64);
        let neighbor = data.subset(&(0..63).collect::<Vec<_>>());
        let cfg = base_cfg();
        let a = train_sgbdt(&data, &cfg, RunSeeds::new(11, 1)).unwrap();
        let b = train_sgbdt(&neighbor, &cfg, RunSeeds::new(11, 7)).unwrap();
        for (ta, tb) in a.ensemble.trees.iter().zip(&b.ensemble.trees) {
            assert!(ta.same_shape(tb));
        }
    }

    #[test]
    fn ledger_never_exceeds_budget_end_to_end() {
        let data = toy_dataset(120);
        let mut cfg = base_cfg();
        cfg.hyper.t_regular = 8;
        cfg.hyper.t_extra = 12;
        cfg.keep_ledger_history = true;
        let m = train_sgbdt(&data, &cfg, RunSeeds::new(21, 22)).unwrap();
        assert!(m.ledger.replay_check());
        let budget = m.manifest.plan.rho_budget;
        assert!(m.manifest.ledger.max_spent <= budget);
        // extra rounds actually ran and the filter bit
        assert_eq!(m.ensemble.trees.len(), 20);
    }

    #[test]
    fn stream_batch_extends_training() {
        let data = toy_dataset(60);
        let batch = toy_dataset(20);
        let mut cfg = base_cfg();
        cfg.hyper.t_regular = 4;
        cfg.hyper.t_extra = 6;
        let with = train_sgbdt_stream(&data, Some(&batch), &cfg, RunSeeds::new(31, 32)).unwrap();
        assert_eq!(with.ledger.num_points(), 80);
        assert_eq!(with.ensemble.trees.len(), 10);
        // an empty batch with t_extra = 0 coincides with the filter-off run
        let empty = data.subset(&[]);
        let mut cfg0 = cfg.clone();
        cfg0.hyper.t_extra = 0;
        let a = train_sgbdt_stream(&data, Some(&empty), &cfg0, RunSeeds::new(31, 32)).unwrap();
        let mut cfg_off = cfg0.clone();
        cfg_off.filter_enabled = false;
        let b = train_sgbdt_stream(&data, None, &cfg_off, RunSeeds::new(31, 32)).unwrap();
        assert_eq!(a.ensemble, b.ensemble);
    }
}
