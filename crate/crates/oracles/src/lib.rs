//! Test-only oracles for the DP-GBDT workspace.
//!
//! Everything here recomputes a quantity through an independent route:
//! quadrature instead of closed forms, double-double arithmetic instead of
//! log-space f64, exhaustive enumeration instead of index arithmetic,
//! fine grids instead of bucket sampling. Production code must never
//! depend on this crate outside dev-dependencies.

pub mod dd;
pub mod gridref;
pub mod party;
pub mod quad;
pub mod renyi;

use sgbdt_core::model::{sigmoid, Tree};

/// Exhaustive-path tree evaluation: test every leaf's root-to-leaf
/// constraint set and return the unique leaf the row satisfies.
pub fn tree_walk_value(tree: &Tree, row: &[f64]) -> f64 {
    let leaves = tree.leaves.len();
    let internal = tree.splits.len();
    let mut matched = None;
    for leaf in 0..leaves {
        // reconstruct the path to this leaf from the root
        let mut node = leaf + internal; // node id in the implicit heap
        let mut path = Vec::new();
        while node > 0 {
            let parent = (node - 1) / 2;
            path.push((parent, node == 2 * parent + 1));
            node = parent;
        }
        path.reverse();
        let ok = path
            .iter()
            .all(|&(split, left)| tree.splits[split].goes_left(row) == left);
        if ok {
            assert!(matched.is_none(), "row matched two leaves");
            matched = Some(tree.leaves[leaf]);
        }
    }
    matched.expect("row matched no leaf")
}

/// Central finite difference of the logistic loss in the raw score.
pub fn logistic_loss_grad_fd(label: f64, raw: f64, h: f64) -> f64 {
    let loss = |z: f64| {
        let p = sigmoid(z);
        -(label * p.ln() + (1.0 - label) * (1.0 - p).ln())
    };
    (loss(raw + h) - loss(raw - h)) / (2.0 * h)
}
