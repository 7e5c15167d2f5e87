//! Run manifests: the replayable record emitted next to every model.

use serde::{Deserialize, Serialize};

use crate::accountant::AccountantPlan;
use crate::filter::LedgerSummary;
use crate::rng::RunSeeds;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub plan: AccountantPlan,
    pub ledger: LedgerSummary,
    pub per_round_active: Vec<usize>,
    pub per_round_subsampled: Vec<usize>,
    pub seeds: RunSeeds,
    pub config_hash: String,
    /// Pure-DP epsilon actually spent on the init score (0 when disabled).
    pub epsilon_init_effective: f64,
    /// plan.epsilon_reported + epsilon_init_effective; never the requested value.
    pub epsilon_total_reported: f64,
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

/// FNV-1a over the canonical JSON of a config; stable across platforms.
pub fn config_hash<T: Serialize>(cfg: &T) -> String {
    let json = serde_json::to_string(cfg).expect("config serializes");
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in json.as_bytes() {
        hash ^= *b as u64;
        hash = hash.wrapping_mul(0x1000_0000_01b3);
    }
    format!("{hash:016x}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_stable_and_input_sensitive() {
        #[derive(Serialize)]
        struct C {
            a: u32,
        }
        let h1 = config_hash(&C { a: 1 });
        let h2 = config_hash(&C { a: 1 });
        let h3 = config_hash(&C { a: 2 });
        assert_eq!(h1, h2);
        assert_ne!(h1, h3);
        assert_eq!(h1.len(), 16);
    }
}
