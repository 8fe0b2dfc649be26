//! Online meta-adaptive control (OMAC) for nonlinear control-affine systems.
//!
//! The crate is `no_std` (with `alloc`) and carries the algorithmic pieces:
//!
//! - [`metrics`]: episode logs, the average control error and the e-ISS bound;
//! - [`dynamics`]: discrete-time plants (generic control-affine, inverted
//!   pendulum with wind, 6-DoF quadrotor) and wind schedules;
//! - [`features`]: random Fourier feature bases;
//! - [`models`]: superposition, bilinear and deep function classes;
//! - [`adapters`]: projected OGD, ridge meta-adapter, Adam, learning-rate schedules;
//! - [`controller`]: the meta-loop, baselines and control laws.
//!
//! IO, configuration and the benchmark harness live in the `omac` crate.
#![no_std]
#![deny(unsafe_code)]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod adapters;
pub mod controller;
pub mod disturbance;
pub mod dynamics;
pub mod error;
pub mod features;
pub mod linalg;
pub mod metrics;
pub mod models;

pub use error::{Error, Result};

/// Dense column vector used throughout the crate.
pub type Vector = nalgebra::DVector<f64>;
/// Dense column-major matrix used throughout the crate.
pub type Matrix = nalgebra::DMatrix<f64>;
