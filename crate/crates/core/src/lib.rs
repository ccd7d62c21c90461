//! Root-cause analysis for anomalies observed at a leaf of a causal DAG whose
//! mechanisms carry noise on both nodes and edges.
//!
//! The pipeline: fit each node's weight posterior on normal data
//! ([`mechanism`]), infer the node and edge noise behind an anomalous batch
//! ([`noise`]), and attribute the target's outlier score ([`scoring`]) to
//! ancestor nodes and edges ([`attribution`]). [`scenarios`] generates
//! benchmark cases with known root causes and [`evaluation`] scores rankings
//! with NDCG@k and measures runtime scaling.

pub mod attribution;
pub mod dag;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod exec;
pub mod files;
pub mod mechanism;
pub mod noise;
pub mod scenarios;
pub mod scoring;

pub use attribution::{AttributionConfig, AttributionReport, Candidate, Method};
pub use dag::{Dag, EdgeId, NodeId};
pub use data::Dataset;
pub use error::{ErrorClass, RcaError, Result};
pub use exec::Execution;
pub use mechanism::{fit_posterior, Hyperparams, MechanismModel};
