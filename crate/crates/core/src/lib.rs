//! Transductive node classification with joint node-cluster supervision.
//!
//! The crate trains GCN, SGC and MLP encoders either with the usual
//! independent per-node cross-entropy or with a joint-cluster objective in
//! which every labeled node is paired with the mean embedding and mean label
//! of its graph cluster. The classifier then predicts a `c x c` joint table,
//! and node predictions are recovered by summing that table over the cluster
//! dimension.
//!
//! Layout:
//! - [`graph`]: graphs, datasets, adjacency normalization, sparse products, SBM generation
//! - [`partition`]: multilevel (METIS-style), k-means and random clusterings
//! - [`nn`]: encoders, analytic gradients, gradient checking, Adam
//! - [`jcloss`]: cluster statistics, joint tables, the joint-cluster and baseline losses
//! - [`trainer`]: the full-batch training loop and multi-seed aggregation
//! - [`metrics`]: accuracy, F1, calibration error and loss-gap curves
//! - [`attack`]: random edge injection and robustness sweeps

pub mod attack;
pub mod error;
pub mod graph;
pub mod jcloss;
pub mod metrics;
pub mod nn;
pub mod partition;
pub mod trainer;

pub use error::{Error, Result};
