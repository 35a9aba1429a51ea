//! Symbolic derivation and numerical verification of first-order field
//! equations in the k-symplectic formalism.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod calculus;
pub mod cli;
pub mod equations;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod mechanics;
pub mod oracle;
pub mod parallel;
pub mod problem;
pub mod solvers;
pub mod symexpr;

pub use error::{Error, Result};
