//! Numerical laboratory for higher-rank Anosov actions on tori.
//!
//! Models are commuting hyperbolic integer matrices acting on `T^n`. Their
//! physical measure is Haar measure, and every periodic-orbit quantity is
//! computable exactly, so each estimator in this crate can be checked
//! against an exact combinatorial value.

// Range checks are written `!(x > lo)` so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Small dense matrix kernels read clearer with explicit indices.
#![allow(clippy::needless_range_loop)]

pub mod action;
pub mod birkhoff;
pub mod bowen;
pub mod counting;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod numerics;
pub mod observable;
pub mod periodic;
pub mod reports;
pub mod spectrum;
pub mod trace;
pub mod zeta;

pub use error::{Error, Result};
