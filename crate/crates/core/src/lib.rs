//! Estimation-theoretic bounds on direction-of-arrival MSE for co-located
//! MIMO radar with a general transmit covariance.
//!
//! The crate computes a generalized Ziv-Zakai bound, the prior-averaged
//! (expected) Cramér-Rao bound and the a-priori bound, and checks them
//! against an exact single-target integration and a Monte Carlo
//! stochastic-ML simulator.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod chernoff;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod model;
pub mod fisher;
pub mod oracle;
pub mod seeding;
pub mod sim;
pub mod special;
pub mod validation;
pub mod zzb;

pub use error::{Error, Result};
