//! Relative margin machines and supporting tooling.
//!
//! The crate implements margin-based classifiers whose scores are confined
//! to a band [1, R] instead of only bounded below: batch dual solvers with
//! regularized offsets, one-class variants that separate data from the
//! origin, online single-pass updates, affine backtransformation of
//! processing chains, evaluation metrics robust to class imbalance, and
//! hyperparameter search (grid and pattern).

pub mod chain;
pub mod error;
pub mod kernel;
pub mod loss;
pub mod experiment;
pub mod io;
pub mod mapping;
pub mod metrics;
pub mod search;
pub mod oneclass;
pub mod online;
pub mod pubsve;
pub mod rng;
pub mod solver;
mod sweep;
pub mod types;

pub use error::{Error, Result};
pub use kernel::KernelSpec;
pub use loss::LossSpec;
pub use solver::{fit_brmm, compute_r_max, DualModel, FitReport};
pub use types::{Dataset, HyperParams, LossOrder, PerClass, Sample, sign_decision};
