//! Count Mean Sketch mechanisms and the Bayesian pool inference attack.
//!
//! This crate is `no_std` (it needs `alloc`). It contains every piece of the
//! pipeline that is pure computation:
//!
//! * [`mechanism`]: CMS, HCMS, the hash-free CMS variant and the identity
//!   mechanism, plus the keyed hash family they share.
//! * [`population`]: pools, object popularity models and user behavior.
//! * [`attack`]: per-observation pool likelihoods and the posterior score
//!   integral over relevant interest and polarization.
//! * [`estimation`]: popularity estimation from an external obfuscated
//!   dataset and curator-utility metrics.
//! * [`metrics`]: precision/null-rate curves, AUC, calibration and heatmaps.
//! * [`game`]: one pool inference game per synthetic or replayed user.
//!
//! File formats, the command line and the parallel runner live in the
//! `poolinf` crate.

#![cfg_attr(not(any(test, feature = "std")), no_std)]
// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod attack;
pub mod bits;
mod error;
pub mod estimation;
pub mod game;
pub mod hash;
pub mod mechanism;
pub mod metrics;
pub mod population;
pub mod quadrature;
pub mod rng;

#[cfg(any(test, feature = "oracle"))]
pub mod oracle;

pub use error::{Error, Result};
