//! Bayes-optimal fair binary classification.
//!
//! The library covers exact fairness measures over finite distributions,
//! the threshold form of the optimal fair classifier under mean-difference and
//! mean-ratio constraints, plug-in and cost-sensitive training from samples, and
//! a linear-programming oracle that checks optimality on small instances.

pub mod bayes;
pub mod coefficients;
pub mod data;
pub mod distribution;
pub mod error;
pub mod estimation;
pub mod fairness;
pub mod groups;
pub mod measures;
pub mod oracle;
pub mod pipeline;

#[cfg(test)]
mod fixtures;

pub use error::{FairError, Result};
