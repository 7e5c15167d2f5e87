//! Nonprivate reference learners: a greedy exact-split GBDT and the
//! DP-mean constant predictor.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureKind};
use crate::error::TrainError;
use crate::model::{gradient, Ensemble, LossKind, Split, Tree, LEAF_SIGN};
use crate::params::InitNoiseVariant;
use crate::rng::{derive_rng, tag, RunSeeds};
use crate::trainer::dp_init_score;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtConfig {
    pub loss: LossKind,
    pub trees: u32,
    pub depth: u32,
    pub eta: f64,
    pub lambda: f64,
}

/// Plain GBDT: exact greedy splits on the MSE gain, complete depth-d trees,
/// unnoised leaves. Deterministic.
pub fn train_nonprivate(data: &Dataset, cfg: &GbdtConfig) -> Result<Ensemble, TrainError> {
    if data.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let mean = data.labels().iter().sum::<f64>() / data.len() as f64;
    let init = match cfg.loss {
        LossKind::Mse => mean,
        LossKind::Logistic => {
            let p = mean.clamp(1e-3, 1.0 - 1e-3);
            (p / (1.0 - p)).ln()
        }
    };
    let mut ensemble = Ensemble::new(init, cfg.eta, cfg.loss);
    let mut preds = vec![init; data.len()];
    for _ in 0..cfg.trees {
        let grads: Vec<f64> = (0..data.len())
            .map(|i| gradient(cfg.loss, data.label(i), preds[i]))
            .collect();
        let rows: Vec<usize> = (0..data.len()).collect();
        let tree = greedy_tree(data, &rows, &grads, cfg.depth, cfg.lambda);
        for (i, p) in preds.iter_mut().enumerate() {
            *p += cfg.eta * tree.value(data.row(i));
        }
        ensemble.trees.push(tree);
    }
    Ok(ensemble)
}

/// Best exact split of `rows` by the regularized MSE gain; numerical
/// candidates are midpoints between consecutive distinct values,
/// categorical candidates are one-vs-rest per value.
fn best_split(data: &Dataset, rows: &[usize], grads: &[f64], lambda: f64) -> Split {
    let schema = data.schema.as_ref();
    let total_sum: f64 = grads.iter().sum();
    let total_n = rows.len();
    let mut best = (f64::NEG_INFINITY, fallback_split(data));
    for (feature, spec) in schema.features.iter().enumerate() {
        match &spec.kind {
            FeatureKind::Numerical { .. } => {
                let mut pairs: Vec<(f64, f64)> = rows
                    .iter()
                    .zip(grads)
                    .map(|(&r, &g)| (data.row(r)[feature], g))
                    .collect();
                pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite values"));
                let mut sum_left = 0.0;
                for i in 0..pairs.len().saturating_sub(1) {
                    sum_left += pairs[i].1;
                    if pairs[i].0 == pairs[i + 1].0 {
                        continue;
                    }
                    let gain = crate::expmech::mse_gain_from_sums(
                        sum_left,
                        i + 1,
                        total_sum - sum_left,
                        total_n - i - 1,
                        lambda,
                    );
                    if gain > best.0 {
                        best = (
                            gain,
                            Split::Numerical {
                                feature,
                                threshold: 0.5 * (pairs[i].0 + pairs[i + 1].0),
                            },
                        );
                    }
                }
            }
            FeatureKind::Categorical { values } => {
                let mut sums = vec![0.0f64; values.len()];
                let mut counts = vec![0usize; values.len()];
                for (&r, &g) in rows.iter().zip(grads) {
                    let code = data.row(r)[feature] as usize;
                    sums[code] += g;
                    counts[code] += 1;
                }
                for code in 0..values.len() {
                    if counts[code] == 0 || counts[code] == total_n {
                        continue;
                    }
                    let gain = crate::expmech::mse_gain_from_sums(
                        sums[code],
                        counts[code],
                        total_sum - sums[code],
                        total_n - counts[code],
                        lambda,
                    );
                    if gain > best.0 {
                        best = (
                            gain,
                            Split::Categorical {
                                feature,
                                category: code as u32,
                            },
                        );
                    }
                }
            }
        }
    }
    best.1
}

fn fallback_split(data: &Dataset) -> Split {
    // used for empty or constant nodes; any valid split works
    match &data.schema.features[0].kind {
        FeatureKind::Numerical { min, .. } => Split::Numerical {
            feature: 0,
            threshold: *min,
        },
        FeatureKind::Categorical { .. } => Split::Categorical {
            feature: 0,
            category: 0,
        },
    }
}

fn greedy_tree(data: &Dataset, rows: &[usize], grads: &[f64], depth: u32, lambda: f64) -> Tree {
    let internal = (1usize << depth) - 1;
    let mut node_rows: Vec<Vec<usize>> = vec![Vec::new(); 2 * internal + 1];
    let mut node_grads: Vec<Vec<f64>> = vec![Vec::new(); 2 * internal + 1];
    node_rows[0] = rows.to_vec();
    node_grads[0] = grads.to_vec();
    let mut splits = Vec::with_capacity(internal);
    for node in 0..internal {
        let split = best_split(data, &node_rows[node], &node_grads[node], lambda);
        let (mut lr, mut rr) = (Vec::new(), Vec::new());
        let (mut lg, mut rg) = (Vec::new(), Vec::new());
        for (&r, &g) in node_rows[node].iter().zip(&node_grads[node]) {
            if split.goes_left(data.row(r)) {
                lr.push(r);
                lg.push(g);
            } else {
                rr.push(r);
                rg.push(g);
            }
        }
        node_rows[2 * node + 1] = lr;
        node_grads[2 * node + 1] = lg;
        node_rows[2 * node + 2] = rr;
        node_grads[2 * node + 2] = rg;
        splits.push(split);
    }
    let mut tree = Tree::with_splits(depth, splits);
    for l in 0..tree.leaves.len() {
        let node = internal + l;
        let sum: f64 = node_grads[node].iter().sum();
        tree.leaves[l] = LEAF_SIGN * sum / (node_rows[node].len() as f64 + lambda);
    }
    tree
}

/// The naive comparator: a DP-released constant label mean and nothing else.
pub fn train_dp_mean(
    data: &Dataset,
    loss: LossKind,
    m_star: f64,
    eps: f64,
    variant: InitNoiseVariant,
    seeds: RunSeeds,
) -> Result<Ensemble, TrainError> {
    let mut rng = derive_rng(seeds.noise, &[tag::INIT_SCORE]);
    let mean = dp_init_score(data.labels(), m_star, eps, variant, &mut rng)?;
    let init = match loss {
        LossKind::Mse => mean,
        LossKind::Logistic => {
            let p = mean.clamp(1e-3, 1.0 - 1e-3);
            (p / (1.0 - p)).ln()
        }
    };
    Ok(Ensemble::new(init, 1.0, loss))
}
