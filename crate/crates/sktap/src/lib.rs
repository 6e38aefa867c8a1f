//! Solvers for the limiting free energy and ground-state energy of the
//! constrained multi-replica spherical 2-spin model.
//!
//! The library is organized around the closed-form side (TAP functionals,
//! spherical-integral asymptotics, ground-state formulas) and a finite-size
//! Monte Carlo side used to validate every closed-form prediction:
//!
//! - [`symmat`]: dense symmetric matrices, primary matrix functions and the
//!   trace-derivative calculus.
//! - [`spectrum`]: semicircle law, classical locations, binned spectral
//!   measures and the `F_K` functionals.
//! - [`model`]: model parameters, Plefka / high-temperature conditions, TAP
//!   and annealed free energies, second-moment functional.
//! - [`gse`]: ground-state energy in closed form, its convex dual, and the
//!   finite-size Lagrange dual.
//! - [`varopt`]: the low-dimensional variational principle (maximize
//!   GSE + entropy + Onsager over the Plefka region).
//! - [`mcsim`]: GOE disorder, importance-sampled constrained volumes and
//!   free energies, Stiefel-manifold ground-state ascent.
//! - [`selftest`]: the acceptance checks wired into both `cargo test` and
//!   the CLI `selftest` command.

pub mod error;
pub mod gse;
pub mod mcsim;
pub mod model;
pub mod opt;
pub mod selftest;
pub mod spectrum;
pub mod symmat;
pub mod varopt;

pub use error::{Error, Result};
pub use symmat::{EigenDecomp, SymMatrix};
