//! Interpolating sequences for the unit ball of bounded analytic functions
//! on the disc and the upper half-plane: geometric admissibility checks and
//! an explicit construction of an interpolating function.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod barycenter;
pub mod cli;
pub mod conditions;
pub mod config;
pub mod correction;
pub mod covering;
pub mod dump;
pub mod dyadic;
pub mod error;
pub mod gen;
pub mod geometry;
pub mod instance;
pub mod interpolant;
pub mod pipeline;
pub mod report;

pub use error::{Error, Result};
