//! Staged tree classifiers for categorical data.
//!
//! A staged tree classifier is an event tree over the class followed by the
//! features, whose same-depth vertices are grouped into stages sharing one
//! conditional distribution. The crate covers:
//!
//! - the model itself ([`tree`]), with fitting and scores ([`learn`]);
//! - conversion between Bayesian networks and staged trees ([`convert`]);
//! - Bayesian network classifier structure learners ([`bnc`]) and their
//!   refinement by backward hill-climbing ([`learn::backward_hill_climb`]);
//! - naive staged trees found by k-means ([`kmeans`]);
//! - MAP prediction and metrics ([`classify`]);
//! - simulated data ([`simgen`]), JSON documents ([`serial`]) and
//!   benchmark orchestration ([`harness`]).

pub mod bnc;
pub mod classify;
pub mod convert;
pub mod counts;
pub mod dag;
pub mod error;
pub mod harness;
pub mod kmeans;
pub mod learn;
pub mod schema;
pub mod serial;
pub mod simgen;
pub mod tree;

pub use classify::{metrics, predict, predict_dataset, Metrics, Prediction};
pub use dag::Dag;
pub use error::{Error, Result};
pub use schema::{CategoricalSchema, Dataset, Variable};
pub use tree::{FittedClassifier, StageId, StageParameters, StagedTree};
