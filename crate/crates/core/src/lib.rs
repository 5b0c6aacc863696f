//! Finite-difference solvers and diagnostics for one-dimensional dissipative
//! equations with convective terms: generalized Burgers,
//! Kuramoto-Sivashinsky, convective Cahn-Hilliard and KdV-type equations on
//! `(-1, 1)`.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod acceptance;
pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod models;
pub mod stepper;

pub use error::{Error, Result};
