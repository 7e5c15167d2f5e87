//! Per-data-point privacy ledger and the individual Renyi filter.
//!
//! A point stays in training for a round only while its cumulative
//! individual loss plus the round's proposed loss fits the budget
//! rho(alpha^). Points skipped in a round record a zero loss for it.

use serde::{Deserialize, Serialize};

use crate::accountant::SubsampledLossTable;
use crate::error::TrainError;

/// Cumulative individual privacy spending at a fixed order alpha^.
#[derive(Debug, Clone)]
pub struct PrivacyLedger {
    alpha_hat: u32,
    budget: f64,
    spent: Vec<f64>,
    /// Optional per-round record of charged losses, for replay checks.
    history: Option<Vec<Vec<f64>>>,
}

/// Compact ledger facts that travel in the run manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerSummary {
    pub alpha_hat: u32,
    pub budget_rho: f64,
    pub max_spent: f64,
    pub mean_spent: f64,
    pub exhausted_points: usize,
    pub num_points: usize,
}

impl PrivacyLedger {
    pub fn new(alpha_hat: u32, budget: f64, num_points: usize, keep_history: bool) -> Self {
        Self {
            alpha_hat,
            budget,
            spent: vec![0.0; num_points],
            history: keep_history.then(Vec::new),
        }
    }

    pub fn alpha_hat(&self) -> u32 {
        self.alpha_hat
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn num_points(&self) -> usize {
        self.spent.len()
    }

    pub fn spent(&self, i: usize) -> Result<f64, TrainError> {
        self.spent
            .get(i)
            .copied()
            .ok_or(TrainError::UnknownIndex(i))
    }

    pub fn spent_all(&self) -> &[f64] {
        &self.spent
    }

    /// Points that arrive mid-run (stream scenario) start with zero spend.
    pub fn extend_points(&mut self, additional: usize) {
        self.spent.extend(std::iter::repeat(0.0).take(additional));
    }

    /// One filter round: point i is active iff spent[i] + proposed[i] fits
    /// the budget. Active points are charged, inactive points record zero.
    ///
    /// Returns the active flags for this round.
    pub fn filter_round(&mut self, proposed: &[f64]) -> Result<Vec<bool>, TrainError> {
        if proposed.len() != self.spent.len() {
            return Err(TrainError::UnknownIndex(proposed.len().saturating_sub(1)));
        }
        debug_assert!(proposed.iter().all(|&p| p >= 0.0));
        let mut active = vec![false; proposed.len()];
        let mut charged = vec![0.0; proposed.len()];
        for i in 0..proposed.len() {
            if self.spent[i] + proposed[i] <= self.budget {
                active[i] = true;
                self.spent[i] += proposed[i];
                charged[i] = proposed[i];
            }
        }
        if let Some(h) = &mut self.history {
            h.push(charged);
        }
        Ok(active)
    }

    /// Replay the stored history: per point, the sum of charged losses must
    /// reproduce `spent` exactly and never exceed the budget.
    pub fn replay_check(&self) -> bool {
        let Some(history) = &self.history else {
            return true;
        };
        let mut acc = vec![0.0; self.spent.len()];
        for round in history {
            for (a, &c) in acc.iter_mut().zip(round) {
                *a += c;
            }
        }
        acc.iter().zip(&self.spent).all(|(a, s)| a == s)
            && self.spent.iter().all(|&s| s <= self.budget)
    }

    pub fn history(&self) -> Option<&[Vec<f64>]> {
        self.history.as_deref()
    }

    pub fn summary(&self) -> LedgerSummary {
        let n = self.spent.len();
        let max_spent = self.spent.iter().cloned().fold(0.0, f64::max);
        let mean_spent = if n == 0 {
            0.0
        } else {
            self.spent.iter().sum::<f64>() / n as f64
        };
        LedgerSummary {
            alpha_hat: self.alpha_hat,
            budget_rho: self.budget,
            max_spent,
            mean_spent,
            exhausted_points: self
                .spent
                .iter()
                .filter(|&&s| s >= self.budget * (1.0 - 1e-12))
                .count(),
            num_points: n,
        }
    }

    /// Dump per-point spending as CSV (index, spent, budget).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,rho_spent,rho_budget\n");
        for (i, s) in self.spent.iter().enumerate() {
            out.push_str(&format!("{i},{s},{}\n", self.budget));
        }
        out
    }
}

/// Individual per-round loss for a clipped gradient: the subsampled bound of
/// the non-spherical Gaussian leaf release with curve rho'(l) = l * c,
/// c = (r1 + r2 g^2) / sigma^2.
pub fn per_point_loss(
    table: &SubsampledLossTable,
    g_clipped: f64,
    g_star: f64,
    r1: f64,
    r2: f64,
    sigma2_leaf: f64,
) -> Result<f64, TrainError> {
    if g_clipped.abs() > g_star * (1.0 + 1e-12) {
        return Err(TrainError::UnclippedGradient(g_clipped));
    }
    let c = (r1 + r2 * g_clipped * g_clipped) / sigma2_leaf;
    Ok(table.loss(c))
}
