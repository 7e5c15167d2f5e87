//! Grid-less exponential mechanism for eps-DP split selection.
//!
//! Split candidates are the data-induced value intervals (buckets) per
//! feature; a bucket is drawn with probability proportional to
//! w * |B| * exp(eps * u / (2 Delta_u)) and the split value is then uniform
//! inside the bucket (categorical buckets have unit width and return their
//! value). The MSE gain utility is evaluated at the bucket's lower endpoint,
//! the representative of its subset-closure.

use crate::data::{Dataset, FeatureKind, Schema};
use crate::model::Split;

/// One split-candidate interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Bucket {
    pub feature: usize,
    pub lo: f64,
    pub hi: f64,
    pub categorical: bool,
    /// Per-feature weight w: r / (v_max - v_min) for numerical, 1 for
    /// categorical.
    pub weight: f64,
    /// Cached utility u(B, D).
    pub utility: f64,
}

impl Bucket {
    /// |B|: interval width for numerical buckets, 1 for categorical.
    pub fn width(&self) -> f64 {
        if self.categorical {
            1.0
        } else {
            self.hi - self.lo
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BucketSet {
    pub buckets: Vec<Bucket>,
}

/// A node's view of the training data: row indices plus their gradients.
#[derive(Debug, Clone, Copy)]
pub struct NodeData<'a> {
    pub dataset: &'a Dataset,
    pub rows: &'a [usize],
    pub gradients: &'a [f64],
}

/// Split utility with bounded sensitivity, evaluated per bucket.
pub trait SplitUtility: Sync {
    fn sensitivity(&self) -> f64;
    /// Utilities for all buckets of one feature, in bucket order.
    fn bucket_utilities(&self, node: &NodeData, feature: usize, buckets: &[Bucket]) -> Vec<f64>;
}

/// MSE split gain G = (sum g_L)^2/(|L|+lambda) + (sum g_R)^2/(|R|+lambda).
pub fn mse_gain(left: &[f64], right: &[f64], lambda: f64) -> f64 {
    mse_gain_from_sums(
        left.iter().sum(),
        left.len(),
        right.iter().sum(),
        right.len(),
        lambda,
    )
}

#[inline]
pub fn mse_gain_from_sums(
    sum_left: f64,
    n_left: usize,
    sum_right: f64,
    n_right: usize,
    lambda: f64,
) -> f64 {
    sum_left * sum_left / (n_left as f64 + lambda)
        + sum_right * sum_right / (n_right as f64 + lambda)
}

/// The subset-closed MSE gain with sensitivity Delta_u = 3 (g*)^2.
/// `goes_left` semantics: numerical "value <= split", categorical
/// "value == split".
pub struct MseGainUtility {
    pub lambda: f64,
    pub g_star: f64,
}

impl MseGainUtility {
    pub fn sensitivity_bound(g_star: f64) -> f64 {
        3.0 * g_star * g_star
    }
}

impl SplitUtility for MseGainUtility {
    fn sensitivity(&self) -> f64 {
        Self::sensitivity_bound(self.g_star)
    }

    fn bucket_utilities(&self, node: &NodeData, feature: usize, buckets: &[Bucket]) -> Vec<f64> {
        let total_sum: f64 = node.gradients.iter().sum();
        let total_n = node.rows.len();
        if buckets.first().map(|b| b.categorical).unwrap_or(false) {
            // one pass: per-category gradient sums; left = matching rows
            let k = buckets.len();
            let mut sums = vec![0.0f64; k];
            let mut counts = vec![0usize; k];
            for (&row, &g) in node.rows.iter().zip(node.gradients) {
                let code = node.dataset.row(row)[feature] as usize;
                if code < k {
                    sums[code] += g;
                    counts[code] += 1;
                }
            }
            buckets
                .iter()
                .map(|b| {
                    let code = b.lo as usize;
                    mse_gain_from_sums(
                        sums[code],
                        counts[code],
                        total_sum - sums[code],
                        total_n - counts[code],
                        self.lambda,
                    )
                })
                .collect()
        } else {
            // sorted pass: prefix sums; left of bucket [lo, hi) = values <= lo
            let mut pairs: Vec<(f64, f64)> = node
                .rows
                .iter()
                .zip(node.gradients)
                .map(|(&row, &g)| (node.dataset.row(row)[feature], g))
                .collect();
            pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite feature values"));
            let mut out = Vec::with_capacity(buckets.len());
            let mut idx = 0usize;
            let mut sum_left = 0.0f64;
            for b in buckets {
                while idx < pairs.len() && pairs[idx].0 <= b.lo {
                    sum_left += pairs[idx].1;
                    idx += 1;
                }
                out.push(mse_gain_from_sums(
                    sum_left,
                    idx,
                    total_sum - sum_left,
                    total_n - idx,
                    self.lambda,
                ));
            }
            out
        }
    }
}

/// Build the split-candidate buckets for every feature and cache utilities.
///
/// Numerical features tile [v_min, v_max] with boundaries at the sorted
/// distinct data values; duplicate values would form zero-width buckets
/// with zero probability mass, so they are merged away. Categorical
/// features contribute one unit bucket per schema value.
pub fn build_buckets(
    node: &NodeData,
    schema: &Schema,
    r_num: f64,
    utility: &dyn SplitUtility,
) -> BucketSet {
    let mut set = BucketSet::default();
    for (feature, spec) in schema.features.iter().enumerate() {
        let mut buckets = Vec::new();
        match &spec.kind {
            FeatureKind::Numerical { min, max } => {
                let mut values: Vec<f64> = node
                    .rows
                    .iter()
                    .map(|&row| node.dataset.row(row)[feature])
                    .collect();
                values.sort_by(|a, b| a.partial_cmp(b).expect("finite feature values"));
                values.dedup();
                let weight = r_num / (max - min);
                let mut boundaries = Vec::with_capacity(values.len() + 2);
                boundaries.push(*min);
                for v in values {
                    if v > *boundaries.last().unwrap() {
                        boundaries.push(v);
                    }
                }
                if *max > *boundaries.last().unwrap() {
                    boundaries.push(*max);
                }
                if boundaries.len() == 1 {
                    // degenerate border: single zero-width bucket keeps the
                    // feature reachable with measure zero
                    boundaries.push(*min);
                }
                for w in boundaries.windows(2) {
                    buckets.push(Bucket {
                        feature,
                        lo: w[0],
                        hi: w[1],
                        categorical: false,
                        weight,
                        utility: 0.0,
                    });
                }
            }
            FeatureKind::Categorical { values } => {
                for (code, _) in values.iter().enumerate() {
                    buckets.push(Bucket {
                        feature,
                        lo: code as f64,
                        hi: code as f64 + 1.0,
                        categorical: true,
                        weight: 1.0,
                        utility: 0.0,
                    });
                }
            }
        }
        let utilities = utility.bucket_utilities(node, feature, &buckets);
        for (b, u) in buckets.iter_mut().zip(utilities) {
            b.utility = u;
        }
        set.buckets.extend(buckets);
    }
    set
}

/// Sample a split from the bucket set: bucket with probability proportional
/// to w * |B| * exp(eps * u / (2 Delta_u)), then a uniform value inside a
/// numerical bucket or the value itself for a categorical one.
pub fn gridless_exp_mech<R: rand::Rng>(
    set: &BucketSet,
    eps: f64,
    delta_u: f64,
    rng: &mut R,
) -> Split {
    assert!(delta_u > 0.0, "utility sensitivity must be positive");
    assert!(!set.buckets.is_empty(), "no split candidates");
    // log-space weights, shifted by the max to avoid overflow
    let log_weights: Vec<f64> = set
        .buckets
        .iter()
        .map(|b| {
            let width = b.width();
            if width == 0.0 {
                f64::NEG_INFINITY
            } else {
                (b.weight * width).ln() + eps * b.utility / (2.0 * delta_u)
            }
        })
        .collect();
    let max = log_weights
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = log_weights.iter().map(|lw| (lw - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut draw = rng.random::<f64>() * total;
    let mut chosen = set.buckets.len() - 1;
    for (i, w) in weights.iter().enumerate() {
        draw -= w;
        if draw <= 0.0 {
            chosen = i;
            break;
        }
    }
    let b = &set.buckets[chosen];
    if b.categorical {
        Split::Categorical {
            feature: b.feature,
            category: b.lo as u32,
        }
    } else {
        Split::Numerical {
            feature: b.feature,
            threshold: rng.random_range(b.lo..b.hi),
        }
    }
}
