//! Critical exponents of nonlocal operators in cones.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod branch;
pub mod cache;
pub mod eigen;
pub mod exponents;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod liouville;
pub mod model;
pub mod operator;
pub mod quadrature;
pub mod roots;

pub use error::{Error, Result};
pub use model::*;
