//! Minimum-total-power uplink NOMA allocation for multi-cell networks with
//! imperfect successive interference cancellation (SIC).
//!
//! The crate is split the same way the computation flows:
//!
//! * [`model`]: scenario parameters, units, and user indexing
//! * [`channel`]: base station layout, user drops, pathloss and fading
//! * [`interference`]: the normalized interference matrix and noise vector
//! * [`solvers`]: centralized, distributed and fixed-point solvers
//! * [`experiments`]: seeded Monte Carlo sweeps over SINR targets and SIC quality
//! * [`cli`]: the `noma-sim` command line front end

// `!(x <= y)` is used on purpose so that NaN takes the failing branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod cli;
pub mod error;
pub mod experiments;
pub mod interference;
pub mod linalg;
pub mod model;
pub mod solvers;

pub use error::{Error, Result};
