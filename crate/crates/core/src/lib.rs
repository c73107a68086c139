//! Counterfactual learning from logged observational data.
//!
//! The crate covers the passive learners (importance weighted ERM with a
//! second-moment regularizer and principled clipping), the disagreement-based
//! active learner that mixes logged data with queried labels through multiple
//! importance sampling, and the seeded simulation environments used to check
//! all of it exactly.

// `!(x > 0.0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod active;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod hypothesis;
pub mod linear;
pub mod passive;
pub mod sim;
pub mod stats;
pub mod verify;

pub use error::{CfalError, Result};
