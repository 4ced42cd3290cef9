//! Broad Learning System (BLS) with sparse output weights.
//!
//! The crate builds a random two-stage feature network (mapped feature nodes
//! followed by enhancement nodes), assembles the system matrix `A`, and fits
//! the linear readout either densely by ridge regression or sparsely by
//! sequential thresholded least squares (STLS): alternate hard thresholding of
//! small output weights with a least-squares refit on the surviving nodes.
//!
//! Modules:
//! - [`numkernel`]: dense matrices, QR least squares, Cholesky ridge.
//! - [`bls`]: random network construction, feature/enhancement mapping.
//! - [`stls`]: sparse training, threshold selection, ISTA baseline, and an
//!   exhaustive best-subset oracle for small problems.
//! - [`datasets`]: the nonlinear difference-equation and CSTR benchmarks.
//! - [`metrics`]: RMSE, sparsity ratio, active node counts, result rows.

pub mod bls;
pub mod datasets;
pub mod error;
pub mod metrics;
pub mod numkernel;
pub mod stls;

pub use error::{Error, Result};
pub use numkernel::DenseMatrix;
