//! Training-dynamics driven active learning.
//!
//! The crate is organised bottom-up: [`nnkit`] provides the networks and their
//! parameter gradients, [`kernelspace`] the neural tangent kernels and kernel
//! regression, [`dynamics`] the training-dynamics functional and its
//! increments, [`acquisition`] the query strategies, [`theoryprobe`] the
//! kernel-theory diagnostics and [`harness`] the experiment loop.

pub mod acquisition;
pub mod dynamics;
pub mod error;
pub mod harness;
pub mod kernelspace;
pub mod linalg;
pub mod nnkit;
pub mod numfmt;
pub mod pool;
pub mod rng;
pub mod theoryprobe;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use pool::{Candidate, LabeledPool, Sample, UnlabeledPool};
