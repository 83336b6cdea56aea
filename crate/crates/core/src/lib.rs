//! Toolkit for an SVEIRT influenza model: simulation, equilibria and
//! reproduction numbers, optimal control by forward–backward sweep,
//! least-squares calibration, effective reproduction number estimation and
//! global sensitivity analysis.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod cli;
pub mod control;
pub mod epi;
pub mod error;
pub mod model;
pub mod ode;
pub mod sensitivity;

pub use error::{Error, Result};
