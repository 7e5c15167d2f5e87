//! Shared training hyperparameters and their invariants.

use serde::{Deserialize, Serialize};

use crate::error::AccountantError;

/// Which Laplace scale the init-score mechanism samples.
///
/// The sampled-scale reading draws Laplace(2 m* / (n eps_init)); the
/// theorem-scale reading draws Laplace(m* / (n eps_init)). Accounting always
/// uses sensitivity 2 m* / n together with the scale actually sampled, so the
/// bound is sound for the implemented noise either way.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitNoiseVariant {
    #[default]
    SampledScale,
    TheoremScale,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    /// Gradient clip bound g*.
    pub g_star: f64,
    /// Label clip bound m* for the init score.
    pub m_star: f64,
    /// Leaf regularization / noised-support floor.
    pub lambda: f64,
    /// Learning rate.
    pub eta: f64,
    /// Tree depth d (complete trees, 2^d leaves).
    pub depth: u32,
    /// Poisson subsampling ratio.
    pub gamma: f64,
    pub t_regular: u32,
    pub t_extra: u32,
    pub eps_init: f64,
    pub eps_trees: f64,
    pub delta_trees: f64,
    /// Noise weight for the leaf support.
    pub r1: f64,
    /// Noise weight for the leaf gradient sum.
    pub r2: f64,
    /// Numerical-feature weight for random/exponential split selection.
    pub r_num: f64,
    /// Largest Renyi order probed by the accountant.
    pub alpha_max: u32,
    #[serde(default)]
    pub init_noise_variant: InitNoiseVariant,
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<(), AccountantError> {
        let bad = |msg: String| Err(AccountantError::BadHyperparameters(msg));
        if !(self.r1 > 0.0 && self.r2 > 0.0) {
            return bad(format!("r1, r2 must be positive, got ({}, {})", self.r1, self.r2));
        }
        if ((self.r1 + self.r2) - 1.0).abs() > 1e-12 {
            return bad(format!("r1 + r2 must equal 1, got {}", self.r1 + self.r2));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad(format!("gamma must lie in (0, 1], got {}", self.gamma));
        }
        if !(self.g_star > 0.0) {
            return bad(format!("g* must be positive, got {}", self.g_star));
        }
        if !(self.m_star > 0.0) {
            return bad(format!("m* must be positive, got {}", self.m_star));
        }
        if self.alpha_max < 2 || self.alpha_max > 512 {
            return bad(format!("alpha_max must lie in [2, 512], got {}", self.alpha_max));
        }
        if !(self.eps_trees > 0.0) {
            return bad(format!("eps_trees must be positive, got {}", self.eps_trees));
        }
        if !(self.delta_trees > 0.0 && self.delta_trees < 1.0) {
            return bad(format!("delta_trees must lie in (0,1), got {}", self.delta_trees));
        }
        if !(self.lambda > 0.0) {
            return bad(format!("lambda must be positive, got {}", self.lambda));
        }
        if self.depth == 0 || self.depth > 16 {
            return bad(format!("depth must lie in [1, 16], got {}", self.depth));
        }
        Ok(())
    }
}
