//! Fluctuation theory for linear spectral statistics of sample covariance
//! matrices under general fourth-order structure.
//!
//! The crate is organised bottom-up:
//!
//! * [`models`] draws data from the blockwise mixed radial model and the
//!   boundary examples, one deterministic substream per replicate.
//! * [`spectral`] reduces a data matrix to trace powers, energies and
//!   eigenvalues.
//! * [`mp`] solves the Marčenko–Pastur companion equation for discrete
//!   population laws.
//! * [`ghost`] holds the fourth-order correction kernels, the excess-energy
//!   estimator and exact small-instance oracles.
//! * [`calibration`] evaluates the mean and covariance approximants by
//!   contour quadrature and by residues.
//! * [`sphericity`] computes John's statistic with its three calibrations.
//! * [`harness`] runs the size, power and phase experiments and the
//!   validation suite.
//!
//! Matrices are `faer::Mat<f64>` with one observation per column.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod error;
pub mod ghost;
pub mod harness;
pub mod models;
pub mod mp;
pub mod spectral;
pub mod sphericity;

pub use error::{Error, Result};
pub use faer::{Mat, MatRef};
pub use num_complex::Complex64;
