//! Identification of linear and output-error systems from quantized observations.
//!
//! The estimation pipeline runs two coupled recursions over one stream of
//! `(regressor, level)` pairs:
//!
//! 1. [`variance::VarianceEstimator`] recovers the output standard deviation
//!    from the empirical level frequencies alone (ML-type step).
//! 2. [`wls::WlsEstimator`] regresses the levels on the regressors, which
//!    estimates the parameter scaled by the quantizer gain `rho(delta)`
//!    (WLS-type step). Dividing by the gain at the estimated deviation
//!    yields the parameter estimate.
//!
//! [`oe`] applies the same pair to a truncated impulse-response regression and
//! recovers the rational output-error model from it. [`sim`] holds the
//! simulators, the Monte Carlo harness, config parsing and CSV output used by
//! the `qident` binary.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod gauss;
pub mod oe;
pub mod quantizer;
pub mod sim;
pub mod variance;
pub mod wls;

pub use error::{Error, Result};
pub use quantizer::QuantizerSpec;
