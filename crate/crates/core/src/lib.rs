//! Joint estimation of a non-negative instantaneous DAG and lagged coefficient
//! matrices from multivariate time series following a linear structural VAR.
//!
//! The instantaneous weights are kept acyclic through the log-det function
//! `h(W) = N log s - log det(sI - W)`, enforced with the method of multipliers.
//! A trace-exponential (DYNOTEARS-style) baseline shares the same loop.

// `!(x >= 0.0)` style checks reject NaN on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acyclicity;
pub mod baseline;
pub mod benchmark;
pub mod error;
pub mod io;
pub mod metrics;
pub mod model;
pub mod objective;
pub mod simulate;
pub mod solver;

pub use error::{Error, Result};
pub use model::{build_lagged_design, is_dag, threshold_support, DagWeights, LaggedDesign, LaggedWeights, TimeSeries};
pub use solver::{learn, SolverConfig, SolverResult, Termination};
