//! Quantitative Gevrey-class bounds for implicitly defined solution maps,
//! with a one-dimensional semilinear elliptic model problem to check them on.

// `!(x > 0.0)` style guards are used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod combinatorics;
pub mod envelopes;
mod error;
pub mod implicit_diff;
pub mod linalg;
pub mod parametric;
pub mod pde1d;
pub mod selftest;

pub use error::{Error, Result};
