//! Correlation-aware online change point detection.
//!
//! Sliding windows of a multivariate stream are turned into Pearson
//! correlation matrices, which live on the manifold of symmetric positive
//! definite matrices. Each new matrix is compared with the closed-form
//! Fréchet mean of the matrices seen since the last change (under the
//! Log-Euclidean or Log-Cholesky metric). The distance minus the radius
//! of that history is the detection score fed to a CUSUM test.
//!
//! ```
//! use riocpd::{detector::{DetectorConfig, Threshold}, manifold::MetricKind, simulator};
//!
//! let stream = simulator::two_regime_stream(3, 0.8, 200, 400, 7).unwrap();
//! let cfg = DetectorConfig::new(20)
//!     .with_metric(MetricKind::LogCholesky)
//!     .with_threshold(Threshold::Auto { k: 3.0 });
//! let events = riocpd::detector::detect_frame(&cfg, &stream.frame).unwrap();
//! assert!(!events.is_empty());
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)] // rejects NaN along with out-of-range values

pub mod correlation;
pub mod detector;
pub mod error;
pub mod eval;
pub mod manifold;
pub mod simulator;

pub use error::{Error, Result};
