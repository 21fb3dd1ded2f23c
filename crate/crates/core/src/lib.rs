//! Causal abstraction analysis of neural networks.
//!
//! The crate provides finite structural causal models and a constructive
//! abstraction checker, a natural-logic model of sentence-pair inference, a
//! generator for a quantified inference dataset, token-grid feed-forward
//! networks with hand-written backpropagation, interchange-intervention
//! sweeps, clique-based alignment scoring, and probing and attribution
//! baselines.

pub mod abstraction;
pub mod addition;
pub mod analysis;
pub mod baselines;
pub mod causal;
pub mod config;
pub mod error;
pub mod interchange;
pub mod mqnli;
pub mod natlog;
pub mod neural;
pub mod pipeline;

pub use error::{Error, Result};
