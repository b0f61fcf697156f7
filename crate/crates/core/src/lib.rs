//! Millimetre-wave to optical conversion in a six-level Rydberg loop.
//!
//! The modules build bottom-up: [`params`] holds the scheme parameters,
//! [`liouvillian`] the master equation, [`perturbation`] the linear
//! susceptibilities, [`conversion`] the two-mode propagation, [`rydberg`]
//! the interaction averaging and [`propagation`] the spatial solvers.
//! [`config`], [`output`] and [`cli`] drive scenarios from configuration
//! files.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod conversion;
pub mod error;
pub mod liouvillian;
pub mod output;
pub mod params;
pub mod perturbation;
pub mod propagation;
pub mod quadrature;
pub mod rydberg;

pub use error::{Error, Result};

pub type C64 = num_complex::Complex64;
