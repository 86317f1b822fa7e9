//! Inference of causal protein-signaling networks from single-cell
//! interventional data.
//!
//! The pipeline: simulate or load per-condition activity matrices, fit a
//! Bayesian hierarchical errors-in-variables regression model by Gibbs
//! sampling (spike-and-slab variable selection over condition-level
//! coefficients), read associations off the overall inclusion probabilities,
//! read causal directions off the drops in condition-level inclusion
//! probabilities under interventions, and score the result against a
//! reference network.

pub mod error;
pub mod evaluation;
pub mod inference;
pub mod io;
pub mod model;
pub mod sampler;
pub mod simulator;
pub mod types;

pub mod cli;

pub use error::{Error, Result};
pub use model::{ChainState, Hyperparameters, ModelKind};
pub use sampler::{ChainTrace, PosteriorSummary, RunSummary, SamplerConfig};
pub use types::{Condition, Dataset, InterventionDesign, InterventionMode, ProteinPanel};
