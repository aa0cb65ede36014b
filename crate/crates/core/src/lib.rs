//! Finite element simulation of growing sandpiles on a rigid support.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod error;
pub mod export;
pub mod fem;
pub mod linalg;
pub mod material;
pub mod mesh;
pub mod scenario;
pub mod solver_a;
pub mod solver_b;

pub use error::{Error, Result};
