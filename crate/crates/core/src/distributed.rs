//! Simulated k-party training with jointly sampled random trees and
//! in-process secure aggregation of leaf vectors.
//!
//! Parties never read one another's rows. Per round, the only values that
//! cross a party boundary are the shared hyperparameters, the shared public
//! random draws that fix the tree structure, and the aggregated leaf vector
//! A; each party sets its replica's leaves to A[l] / k. The cryptographic
//! aggregation protocols themselves are out of scope; the simulation
//! reproduces their interface (fixed-point sum, nothing else revealed).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::accountant::{initialize, tree_curve_slope, ChordLossTable, SubsampledLossTable};
use crate::data::Dataset;
use crate::error::TrainError;
use crate::filter::{LedgerSummary, PrivacyLedger};
use crate::model::{gradient, Ensemble, Tree};
use crate::rng::{derive_rng, tag, RunSeeds};
use crate::trainer::{train_single_tree_inner, SgbdtConfig};

/// Uniform draw in [lo, hi) from a seed-shared stream: every party holding
/// the same rng state observes the same value.
pub fn public_uniform_sample<R: rand::Rng>(lo: f64, hi: f64, shared_rng: &mut R) -> f64 {
    assert!(lo < hi);
    shared_rng.random_range(lo..hi)
}

/// Default fixed-point resolution: values are quantized to 2^-32 steps.
pub const DEFAULT_SCALE_BITS: u32 = 32;

/// Elementwise fixed-point sum of equal-length vectors; the only output the
/// simulated protocol reveals.
pub fn secure_aggregate(vectors: &[Vec<f64>], scale_bits: u32) -> Result<Vec<f64>, TrainError> {
    let Some(first) = vectors.first() else {
        return Ok(Vec::new());
    };
    if vectors.iter().any(|v| v.len() != first.len()) {
        return Err(TrainError::LengthMismatch);
    }
    let scale = (1u64 << scale_bits) as f64;
    let k = vectors.len() as f64;
    let mut acc = vec![0i64; first.len()];
    for v in vectors {
        for (a, &x) in acc.iter_mut().zip(v) {
            let q = x * scale;
            if !q.is_finite() || q.abs() >= (i64::MAX as f64) / k {
                return Err(TrainError::FixedPointOverflow(x));
            }
            *a += q.round() as i64;
        }
    }
    Ok(acc.into_iter().map(|q| q as f64 / scale).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributedManifest {
    pub parties: usize,
    pub rounds: u32,
    pub party_ledgers: Vec<LedgerSummary>,
    pub per_round_active: Vec<Vec<usize>>,
}

pub struct DistributedOutcome {
    pub ensemble: Ensemble,
    pub manifest: DistributedManifest,
}

struct Party {
    data: Dataset,
    preds: Vec<f64>,
    ledger: PrivacyLedger,
}

/// Run the lockstep k-party protocol: shared plan, zero init score, shared
/// random tree per round, local filtering and leaf noising, and one secure
/// aggregation per round.
pub fn distributed_train(
    shards: &[Dataset],
    cfg: &SgbdtConfig,
    shared_structure_seed: u64,
    party_noise_seeds: &[u64],
    scale_bits: u32,
) -> Result<DistributedOutcome, TrainError> {
    if shards.is_empty() || shards.iter().any(|s| s.is_empty()) {
        return Err(TrainError::EmptyDataset);
    }
    if party_noise_seeds.len() != shards.len() {
        return Err(TrainError::LengthMismatch);
    }
    let k = shards.len();
    let h = &cfg.hyper;

    // every party runs the identical initialization; assert the replicas of
    // the plan agree
    let plan = initialize(h)?;
    for _ in 1..k {
        let replica = initialize(h)?;
        if replica != plan {
            return Err(TrainError::ReplicaDivergence(0));
        }
    }

    let table = SubsampledLossTable::new(plan.alpha_hat, h.gamma)?;
    let chord = ChordLossTable::new(
        &table,
        tree_curve_slope(h.r1, h.r2, 0.0, plan.sigma2_leaf),
        tree_curve_slope(h.r1, h.r2, h.g_star, plan.sigma2_leaf),
    );
    let worst_loss = chord.worst();

    // the distributed protocol starts from the zero classifier
    let init_score = 0.0;
    let mut parties: Vec<Party> = shards
        .iter()
        .map(|shard| Party {
            data: shard.clone(),
            preds: vec![init_score; shard.len()],
            ledger: PrivacyLedger::new(
                plan.alpha_hat,
                plan.rho_budget,
                shard.len(),
                cfg.keep_ledger_history,
            ),
        })
        .collect();

    let rounds = if cfg.filter_enabled {
        h.t_regular + h.t_extra
    } else {
        h.t_regular
    };
    let mut ensemble = Ensemble::new(init_score, h.eta, cfg.loss);
    let mut per_round_active = Vec::with_capacity(rounds as usize);

    for t in 1..=rounds {
        let mut round_active = Vec::with_capacity(k);
        let mut replica_trees: Vec<Tree> = Vec::with_capacity(k);
        let mut leaf_vectors: Vec<Vec<f64>> = Vec::with_capacity(k);

        for (u, party) in parties.iter_mut().enumerate() {
            let n = party.data.len();
            let proposed: Vec<f64> = if cfg.filter_enabled {
                (0..n)
                    .map(|i| {
                        let g = gradient(cfg.loss, party.data.label(i), party.preds[i])
                            .clamp(-h.g_star, h.g_star);
                        chord.charge(tree_curve_slope(h.r1, h.r2, g, plan.sigma2_leaf))
                    })
                    .collect()
            } else {
                vec![worst_loss; n]
            };
            let active_flags = party.ledger.filter_round(&proposed)?;
            let active: Vec<usize> = (0..n).filter(|&i| active_flags[i]).collect();
            round_active.push(active.len());

            // shared public sampling: the same structural stream at every party
            let mut structure = derive_rng(shared_structure_seed, &[tag::STRUCTURE, t as u64]);
            let (tree, _) = train_single_tree_inner(
                &party.data,
                &active,
                &party.preds,
                cfg,
                plan.sigma2_leaf,
                &mut structure,
                party_noise_seeds[u],
                t,
            );
            leaf_vectors.push(tree.leaves.clone());
            replica_trees.push(tree);
        }

        // all replicas must have sampled the identical structure
        for u in 1..k {
            if !replica_trees[u].same_shape(&replica_trees[0]) {
                return Err(TrainError::ReplicaDivergence(t as usize));
            }
        }

        let aggregated = secure_aggregate(&leaf_vectors, scale_bits)?;
        let mut tree = replica_trees.swap_remove(0);
        for (l, a) in aggregated.iter().enumerate() {
            tree.leaves[l] = a / k as f64;
        }

        for party in parties.iter_mut() {
            for i in 0..party.data.len() {
                party.preds[i] += h.eta * tree.value(party.data.row(i));
            }
        }
        ensemble.trees.push(tree);
        per_round_active.push(round_active);
    }

    let manifest = DistributedManifest {
        parties: k,
        rounds,
        party_ledgers: parties.iter().map(|p| p.ledger.summary()).collect(),
        per_round_active,
    };
    Ok(DistributedOutcome { ensemble, manifest })
}

/// Split a dataset into k uniform shards (round-robin after a seeded shuffle).
pub fn uniform_shards(data: &Dataset, k: usize, seeds: RunSeeds) -> Vec<Dataset> {
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut rng = derive_rng(seeds.noise, &[tag::PARTITION]);
    for i in (1..order.len()).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    (0..k)
        .map(|u| {
            let idx: Vec<usize> = order
                .iter()
                .enumerate()
                .filter_map(|(pos, &row)| (pos % k == u).then_some(row))
                .collect();
            data.subset(&idx)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;

    #[test]
    fn shared_seed_gives_identical_sequences() {
        let mut a = derive_rng(42, &[tag::STRUCTURE]);
        let mut b = derive_rng(42, &[tag::STRUCTURE]);
        let va: Vec<f64> = (0..100).map(|_| public_uniform_sample(0.0, 1.0, &mut a)).collect();
        let vb: Vec<f64> = (0..100).map(|_| public_uniform_sample(0.0, 1.0, &mut b)).collect();
        assert_eq!(va, vb);
        assert!(va.iter().all(|v| (0.0..1.0).contains(v)));
    }

    #[test]
    fn feature_index_mapping_is_near_uniform() {
        // ceil(s) for s in [0, m) covers 1..m; chi-square sanity over 1e5 draws
        let m = 8usize;
        let mut rng = derive_rng(7, &[]);
        let mut counts = vec![0usize; m + 1];
        let draws = 100_000;
        for _ in 0..draws {
            let s = public_uniform_sample(0.0, m as f64, &mut rng);
            counts[s.ceil() as usize] += 1;
        }
        // index 0 only occurs at s == 0.0 exactly
        assert!(counts[0] <= 1);
        let expected = draws as f64 / m as f64;
        let chi2: f64 = (1..=m)
            .map(|i| (counts[i] as f64 - expected).powi(2) / expected)
            .sum();
        // 7 degrees of freedom; 99.9th percentile ~ 24.3
        assert!(chi2 < 24.3, "chi2 = {chi2}");
    }

    #[test]
    fn aggregate_edge_cases() {
        let w1 = vec![0.25, -1.5, 3.0];
        let a = secure_aggregate(&[w1.clone()], DEFAULT_SCALE_BITS).unwrap();
        for (x, y) in a.iter().zip(&w1) {
            assert!((x - y).abs() <= 1.0 / 4.0e9);
        }
        let w2: Vec<f64> = w1.iter().map(|x| -x).collect();
        let zero = secure_aggregate(&[w1.clone(), w2], DEFAULT_SCALE_BITS).unwrap();
        assert!(zero.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn aggregate_matches_plain_sum_within_quantization() {
        let mut rng = derive_rng(9, &[]);
        let k = 3;
        let vecs: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..16).map(|_| rng.random_range(-5.0..5.0)).collect())
            .collect();
        let agg = secure_aggregate(&vecs, DEFAULT_SCALE_BITS).unwrap();
        let step = 1.0 / (1u64 << DEFAULT_SCALE_BITS) as f64;
        for i in 0..16 {
            let plain: f64 = vecs.iter().map(|v| v[i]).sum();
            assert!((agg[i] - plain).abs() <= step * k as f64, "element {i}");
        }
    }

    #[test]
    fn aggregate_rejects_ragged_and_overflow() {
        assert!(matches!(
            secure_aggregate(&[vec![1.0], vec![1.0, 2.0]], 32),
            Err(TrainError::LengthMismatch)
        ));
        assert!(matches!(
            secure_aggregate(&[vec![1e30]], 32),
            Err(TrainError::FixedPointOverflow(_))
        ));
    }
}
