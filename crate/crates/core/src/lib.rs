//! Canonical quantum correlation functions for a two-state nuclear model
//! and their classical molecular dynamics approximations.
//!
//! The crate is organized bottom-up:
//!
//! * [`model`]: the 2x2 potential, its spectral data and the mean-field surface.
//! * [`quantum`]: finite-difference reference solver and quantum correlations.
//! * [`classical`]: velocity Verlet flows and phase-space quadrature.
//! * [`diagnostics`]: error functionals, error norms and convergence fits.
//! * [`gibbs_symbol`]: path-integral Monte Carlo for the Gibbs symbol.
//! * [`cli`]: configuration and CSV-producing run commands.

pub mod classical;
pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod gibbs_symbol;
pub mod grid;
pub mod linalg;
pub mod model;
pub mod quantum;

pub use error::{Error, Result};
