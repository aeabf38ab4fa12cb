//! Spectral toolkit for random delta interactions on a two-dimensional
//! strip.
//!
//! The operator under study is the Laplacian on the strip `R × (0, d)` with
//! Dirichlet or Neumann conditions on the horizontal faces and an attractive
//! or repulsive delta interaction supported on a periodic lattice of closed
//! curves. Each curve carries its own random coupling `ε·ω_k` drawn from a
//! bounded density, making the spectral minimum and the band structure near
//! it random objects.
//!
//! The crate splits into:
//!
//! * [`model`] — continuum data: geometry, interaction curve, coupling
//!   function, disorder density, transverse modes, and the derived scalars
//!   `Λ₀`, `Λ₁`, `ε*`;
//! * [`sparse`] — deterministic CSR matrices and a symmetric `LDLᵀ`
//!   factorization with inertia counts;
//! * [`assembly`] — bilinear Q1 finite elements for the strip cell and for
//!   finite boxes of cells, including the surface (curve) terms and boundary
//!   condition handling;
//! * [`eigensolve`] — lowest-eigenpair solvers with residual certificates
//!   and a dense cross-check path;
//! * [`oracle`] — closed-form/transcendental references used to validate the
//!   discretization independently;
//! * [`cell`] — the periodic single-cell problem: ground energy curve
//!   `η ↦ Λ^η`, its slope, and the boundary trace data feeding box
//!   truncations;
//! * [`boxop`] — finite-box operators with measure-matching lateral
//!   conditions, eigenvalue counting, and resolvent probes;
//! * [`experiments`] — seeded Monte Carlo studies of the spectral minimum,
//!   eigenvalue counting near it, and resolvent decay;
//! * [`config`]/[`output`] — run configuration files, reports, CSV/SVG
//!   emission.

pub mod assembly;
mod book;
pub mod boxop;
pub mod cell;
pub mod config;
pub mod eigensolve;
pub mod error;
pub mod experiments;
pub mod model;
pub mod oracle;
pub mod output;
pub mod sparse;
pub mod stats;

pub use error::{Error, Result};
