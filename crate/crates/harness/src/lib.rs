//! Experiment runner for `gibbs-core`: configuration, seeded multi-chain
//! execution, manifests, estimator tables and analytic reference curves.

pub mod analyze;
pub mod config;
pub mod manifest;
pub mod reference;
pub mod run;
