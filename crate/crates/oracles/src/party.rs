//! Independent replay of one party's local leaf computations in the
//! multi-party protocol: same plan, filter decisions, subsample and noise
//! streams, with predictions advancing by the aggregated ensemble exactly
//! as a replica's do. Used to check that aggregated leaves equal the
//! average of the parties' local leaf vectors.

use sgbdt_core::accountant::{initialize, tree_curve_slope, ChordLossTable, SubsampledLossTable};
use sgbdt_core::data::Dataset;
use sgbdt_core::filter::PrivacyLedger;
use sgbdt_core::model::{gradient, Ensemble, LEAF_SIGN};
use sgbdt_core::rng::{derive_rng, tag};
use sgbdt_core::trainer::{dp_leaf_pair, poisson_subsample, random_tree, SgbdtConfig};

pub fn party_local_leaves(
    shard: &Dataset,
    cfg: &SgbdtConfig,
    shared_structure_seed: u64,
    noise_seed: u64,
    aggregated: &Ensemble,
) -> Vec<Vec<f64>> {
    let h = &cfg.hyper;
    let plan = initialize(h).unwrap();
    let table = SubsampledLossTable::new(plan.alpha_hat, h.gamma).unwrap();
    let chord = ChordLossTable::new(
        &table,
        tree_curve_slope(h.r1, h.r2, 0.0, plan.sigma2_leaf),
        tree_curve_slope(h.r1, h.r2, h.g_star, plan.sigma2_leaf),
    );
    let mut preds = vec![0.0f64; shard.len()];
    let mut ledger = PrivacyLedger::new(plan.alpha_hat, plan.rho_budget, shard.len(), false);
    let mut all = Vec::new();
    let rounds = if cfg.filter_enabled {
        h.t_regular + h.t_extra
    } else {
        h.t_regular
    };
    for t in 1..=rounds {
        let proposed: Vec<f64> = (0..shard.len())
            .map(|i| {
                let g = gradient(cfg.loss, shard.label(i), preds[i]).clamp(-h.g_star, h.g_star);
                chord.charge(tree_curve_slope(h.r1, h.r2, g, plan.sigma2_leaf))
            })
            .collect();
        let flags = ledger.filter_round(&proposed).unwrap();
        let active: Vec<usize> = (0..shard.len()).filter(|&i| flags[i]).collect();

        let mut structure = derive_rng(shared_structure_seed, &[tag::STRUCTURE, t as u64]);
        let tree = random_tree(shard.schema.as_ref(), h.depth, h.r_num, &mut structure);

        let mut poisson = derive_rng(noise_seed, &[tag::POISSON, t as u64]);
        let picked = poisson_subsample(active.len(), h.gamma, &mut poisson);
        let leaves = tree.leaves.len();
        let mut support = vec![0usize; leaves];
        let mut sums = vec![0.0f64; leaves];
        for &k in &picked {
            let i = active[k];
            let l = tree.leaf_index(shard.row(i));
            support[l] += 1;
            sums[l] += gradient(cfg.loss, shard.label(i), preds[i]).clamp(-h.g_star, h.g_star);
        }
        let mut local = Vec::with_capacity(leaves);
        for l in 0..leaves {
            let mut rng = derive_rng(noise_seed, &[tag::LEAF, t as u64, l as u64]);
            let (n_noised, s_noised) =
                dp_leaf_pair(support[l], sums[l], plan.sigma2_leaf, h.r1, h.r2, &mut rng);
            local.push(LEAF_SIGN * s_noised / h.lambda.max(n_noised));
        }
        all.push(local);
        let agg_tree = &aggregated.trees[t as usize - 1];
        for i in 0..shard.len() {
            preds[i] += h.eta * agg_tree.value(shard.row(i));
        }
    }
    all
}
