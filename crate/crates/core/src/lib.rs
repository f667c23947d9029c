//! Simulation and closed-form analysis of a three-level V system excited by
//! partially coherent light: phase-diffusion CW sources, noisy Gaussian
//! pulses and white noise.

// `!(x > 0.0)` style guards are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod fieldgen;
pub mod io;
pub mod measures;
pub mod model;
pub mod perturbative;
pub mod quadrature;

pub use error::{Error, Result};
pub use model::{DensityMatrix, ExcitedBlock, VSystem, C64};
