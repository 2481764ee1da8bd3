//! Numerical core for affective analysis over precomputed image concept vectors.
//!
//! Two model families live here:
//!
//! * the linear admixture model, where an image's concept distribution is a
//!   convex mixture of seven per-emotion concept profiles weighted by the
//!   image's emotion distribution; the profiles are recovered by a
//!   simplex-constrained least-squares solve ([`admixture`]);
//! * the hybrid ensemble, where every emotion class gets its own RBF
//!   support-vector regressor trained on whichever feature-family subset
//!   fits it best ([`hybrid`]).
//!
//! The crate is `no_std` (with `alloc`). File formats, the CLI and thread
//! pools live in the `emohlc` companion crate; parallelism enters through
//! the [`runner::Runner`] trait.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod admixture;
pub mod dataset;
pub mod emotion;
mod error;
pub mod hybrid;
pub mod metrics;
pub mod model_selection;
pub mod runner;
pub mod seed;
pub mod simplex;
pub mod svm;
pub mod synth;

pub use error::{Error, Result};
