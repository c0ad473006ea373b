//! Sample-complexity thresholds for recovering the support of a sparse signal
//! from noisy measurements, with seeded Monte Carlo decoders to check them.
//!
//! [`bounds`] turns mutual-information densities from [`info`] and tail bounds
//! from [`conc`] into achievability and converse measurement counts for the
//! channels in [`model`]. [`sim`] draws instances and decodes them.
//! Randomized routines take an explicit seed and an [`Execution`] mode and
//! give identical results in either mode.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod conc;
pub mod error;
pub mod info;
pub mod model;
pub mod numerics;
pub mod par;
pub mod sim;

pub use error::{Error, Result};
pub use par::Execution;
