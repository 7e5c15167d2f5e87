//! Differentially private gradient boosted decision trees.
//!
//! The library trains DP-GBDT ensembles with random complete tree structure,
//! noised leaves under a non-spherical Gaussian mechanism, Poisson-subsampled
//! rounds with Renyi-DP amplification accounting, and a per-data-point Renyi
//! filter. An enhanced exponential-mechanism baseline, a nonprivate GBDT, a
//! simulated multi-party trainer, and a cross-validation experiment harness
//! round out the crate.

pub mod accountant;
pub mod data;
pub mod distributed;
pub mod dpboost;
pub mod error;
pub mod expmech;
pub mod experiment;
pub mod filter;
pub mod gbdt;
pub mod manifest;
pub mod metrics;
pub mod model;
pub mod params;
pub mod rng;
pub mod trainer;
