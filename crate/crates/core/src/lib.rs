//! Recursive least squares with subspace-of-information forgetting.
//!
//! The estimator in [`estimators::sift_step`] forgets only in the row space
//! of each (SVD-filtered) regressor, which keeps the covariance bounded
//! without persistent excitation. The crate also provides the positive-definite
//! subspace decomposition it is built on ([`subspace`]), explicit covariance
//! certificates and monitors ([`bounds`]), exponential- and no-forgetting
//! baselines, and a nonuniform-excitation benchmark ([`harness`]).
//!
//! Runnable walkthroughs live in `examples/`:
//!
//! ```bash
//! cargo run --example track_parameters
//! ```

pub mod bounds;
pub mod cli;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod numerics;
pub mod subspace;

pub use error::{Error, Result};
pub use estimators::{
    Estimator, EstimatorState, ExpForgettingRls, NoForgettingRls, RegressionSample, SiftConfig,
    SiftRls,
};
pub use numerics::{Matrix, SymMatrix, Vector};
