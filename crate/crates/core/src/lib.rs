//! Desk-scale statistical simulator for quantum two-mode squeezing (QTMS)
//! radar and its classical two-mode noise (TMN) baseline.
//!
//! Both radars generate a pair of correlated Gaussian noise signals, transmit
//! one, retain the other, and declare detections by thresholding correlation
//! statistics of the measured quadrature voltages (I1, Q1, I2, Q2). Everything
//! observable about either signal model is captured by a 4x4 covariance
//! matrix, so the whole pipeline works on covariances:
//!
//! - [`signal_model`] builds and validates the TMN and TMSV covariance models;
//! - [`sampler`] draws seeded, reproducible Gaussian sample windows;
//! - [`preprocess`] estimates and removes the inter-digitizer phase;
//! - [`detectors`] computes the five correlation detector statistics;
//! - [`roc`] turns on/off detector series into empirical ROC curves,
//!   histograms, and integration-gain estimates;
//! - [`analytic`] evaluates the closed-form noise-radar detection and
//!   false-alarm probabilities with log-domain Bessel numerics and fits their
//!   correlation parameter to empirical curves.
//!
//! The `parallel` feature (on by default) parallelizes window generation with
//! rayon; outputs are bit-identical regardless of worker count because every
//! window derives its own counter-based random substream.

pub mod analytic;
pub mod detectors;
pub mod preprocess;
pub mod roc;
pub mod sampler;
pub mod signal_model;
pub mod special;

pub use detectors::{DetectorId, DetectorSeries};
pub use roc::RocCurve;
pub use sampler::{Condition, QuadratureSample, WindowSpec};
pub use signal_model::{Covariance4, TmnParams, TmsvParams};
