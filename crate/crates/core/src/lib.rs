//! Approximate law of W = Y1/(Y1 + Y2) for independent F variates, its
//! bounding densities and constants, and the induced law of elemental
//! regression weights as a product of Beta factors.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod approx;
pub mod cli;
pub mod dist;
pub mod elemental;
pub mod error;
pub mod goftests;
pub mod linalg;
pub mod product;
pub mod quad;
pub mod rng;
pub mod specfun;

pub use error::{Error, Result};
