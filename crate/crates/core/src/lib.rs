//! Wavelet latent position exponential random graphs.
//!
//! Graphs are generated from a logistic graphon whose logit is a sparse,
//! band-limited expansion in a 2D Haar basis. The crate covers sampling,
//! the conditional exponential family, thresholding estimators, multiscale
//! detection, stability diagnostics and holdout evaluation.

pub mod basis;
pub mod detection;
pub mod diagnostics;
pub mod error;
pub mod estimator;
pub mod evaluation;
pub mod expfamily;
pub mod kernel;
pub mod link;
pub mod rng;
pub mod sampler;

pub use error::{Error, Result};
