//! Homophily-based test-time graph structure transformation.
//!
//! A fixed node classifier trained on one graph is applied to a test graph
//! whose structure is first reshaped: a homophily predictor scores every test
//! edge, edges are reweighted by those scores, and the most confidently
//! harmful edges are filtered out. The [`theory`] module checks the
//! contextual-stochastic-block-model analysis behind the method numerically.

pub mod csbm;
pub mod error;
pub mod experiments;
pub mod graph;
pub mod metrics;
pub mod models;
pub mod nn;
pub mod rng;
pub mod theory;
pub mod transform;

pub use error::{Error, Result};
