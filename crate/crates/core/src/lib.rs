//! Numerical laboratory for inverse problems around perturbed biharmonic
//! operators on the unit square.
//!
//! The crate is organised around six building blocks:
//!
//! - [`tensor`]: symmetric tensor algebra (symmetrization, Kronecker maps,
//!   trace-free decomposition, pairings with vector powers).
//! - [`null_variety`]: constructive recovery of trace-free tensors from
//!   their pairings with powers of complex null vectors.
//! - [`grid`] and [`solver`]: a clamped bilaplacian finite-difference
//!   solver on the unit square with a partitioned boundary and one-sided
//!   normal-trace extraction.
//! - [`cgo`]: oscillatory biharmonic solutions with controlled boundary
//!   behaviour, remainder-decay certification and asymptotic symbol fits.
//! - [`forward`]: a semilinear forward solver, partial Dirichlet-to-Neumann
//!   simulation and multi-linearization by mixed divided differences.
//! - [`reconstruct`]: boundary/volume integral functionals and regularized
//!   least-squares recovery of nonlinear coefficient differences.
//!
//! The `examples/` directory contains one runnable example per capability;
//! the `bihlab` binary drives batch experiments from a config file.

pub mod cgo;
pub mod config;
pub mod error;
pub mod experiment;
pub mod field;
pub mod forward;
pub mod grid;
pub mod null_variety;
pub mod reconstruct;
pub mod solver;
pub mod tensor;

pub use error::{Error, Result};
