//! Pseudo-spectral toolkit for a truncated stochastic Navier-Stokes system on
//! a periodic box: Gaussian convolution projectors, Leray projection, an
//! exponential-integrator stochastic heat solver, the doubly-cutoff SNSE
//! stepper with Picard iteration, stopping-time monitors, and a config-driven
//! experiment runner with deterministic artifacts.
//!
//! The periodic box stands in for whole space: every operator is a Fourier
//! multiplier in the lattice frequencies `xi = m / L`, and all estimates are
//! exercised with data supported well inside the box.

// Validation guards are written `!(x > 0.0)` on purpose: they reject NaN.
// Index loops over flat multi-dimensional buffers stay as ranges; the index
// usually addresses several arrays at once.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod error;
pub mod fft;
pub mod field;
pub mod grid;
pub mod heat;
pub mod monitors;
pub mod noise;
pub mod operators;
pub mod runner;
pub mod sampling;
pub mod snse;
pub mod stats;

pub use error::{Result, SnseError};
pub use field::{
    forward_transform, inverse_transform, lp_norm, lp_norm_scalar, LtwoSequenceField,
    RealVectorField, SpectralVectorField,
};
pub use grid::Grid;
