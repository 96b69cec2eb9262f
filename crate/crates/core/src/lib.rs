//! Single-qubit purity benchmarking: noisy Clifford simulation, offset-free
//! decay fitting, and coherent/incoherent error budgets over moving windows.

// Validation is written as `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bloch;
pub mod bootstrap;
pub mod cli;
pub mod clifford;
pub mod config;
pub mod error;
pub mod estimator;
pub mod fit;
pub mod io;
pub mod noise;
pub mod protocol;
pub mod rng;
pub mod stats;
pub mod timeseries;

pub use error::{Error, Result};
