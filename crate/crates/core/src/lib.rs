//! Timely tracking of infections: who to test, how often, and how stale the
//! resulting infection estimates are.
//!
//! Each person alternates between healthy and infected as a two-state
//! Markov chain (infection rate `λ`, recovery rate `μ`). Tests refresh a
//! binary estimate; the metrics measure how much of the time, or how much
//! accumulated age, the estimate spends wrong.

pub mod ctmc;
pub mod error;
pub mod experiments;
pub mod metrics;
pub mod model;
pub mod montecarlo;
pub mod optimize;
pub mod par;
pub mod validate;

pub use error::{Error, Result};
pub use experiments::{run_experiment, ExperimentConfig, ExperimentId, ResultTable};
pub use metrics::Theta;
pub use model::{ErrorModel, Estimate, PersonParams, Population, TestPolicy};
pub use par::Execution;
