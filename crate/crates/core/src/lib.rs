//! Electromagnetic particle-in-cell engine built around tile-sorted particle
//! storage, an emulated 8x8 outer-product unit for field gather and current
//! deposition, and particle redistribution overlapped with deposition on a
//! simulated multi-rank fabric.

// Index loops mirror the stencil algebra; negated comparisons reject NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod domain;
pub mod error;
pub mod fabric;
pub mod harness;
pub mod kernels;
pub mod layout;
pub mod metrics;
pub mod oracle;
pub mod pipeline;
pub mod redistribute;
pub mod shape;
pub mod solver;

pub use error::{Error, Result};
