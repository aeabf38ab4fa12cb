//! One error enum for the whole crate.
//!
//! Most variants are contract violations surfaced at API boundaries (bad
//! geometry, shifts inside the spectrum, windows outside the resolved part of
//! the spectrum, ...). The CLI maps them onto exit codes; the library keeps
//! them typed.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    // ---- model ----
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid disorder density: {0}")]
    InvalidDensity(String),
    #[error(
        "surface quadrature did not converge: doubling order {order} still moves the value by {rel_change:e} (relative)"
    )]
    QuadratureNotConverged { order: usize, rel_change: f64 },
    #[error("main assumption violated: |lambda_1| = {lambda1_abs:e} is below the threshold {threshold:e}")]
    MainAssumptionViolated { lambda1_abs: f64, threshold: f64 },
    #[error("coupling value {value} lies outside the disorder support [{a}, 1]")]
    ValueOutOfSupport { value: f64, a: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    // ---- assembly ----
    #[error("grid too coarse: {nodes_per_cell} nodes per cell (minimum 8)")]
    GridTooCoarse { nodes_per_cell: usize },
    #[error("coupling {value:e} exceeds the validity radius t0 = {t0:e}")]
    CouplingOutOfRange { value: f64, t0: f64 },
    #[error("Robin face data has {got} values, expected {expected}")]
    MissingRobinData { got: usize, expected: usize },

    // ---- eigensolve ----
    #[error("eigensolver did not converge within {max_iters} iterations (worst residual {worst_residual:e})")]
    NoConvergence { max_iters: usize, worst_residual: f64 },
    #[error("mass matrix is numerically singular")]
    SingularMass,
    #[error("problem too large for the dense reference path: {n} unknowns, cap is {max}")]
    ProblemTooLarge { n: usize, max: usize },
    #[error("shift {shift} is too close to the spectrum (relative pivot {rel_pivot:e})")]
    ShiftTooCloseToSpectrum { shift: f64, rel_pivot: f64 },
    #[error("exactly zero pivot at elimination step {index}")]
    SingularPivot { index: usize },

    // ---- cell problem ----
    #[error("ground state changes sign: most negative entry {min:e} against peak {max:e}")]
    GroundStateSignChange { min: f64, max: f64 },
    #[error("ground state vanishes on the lateral boundary (|psi| = {value:e} at its smallest)")]
    GroundStateVanishesOnBoundary { value: f64 },

    // ---- box operators ----
    #[error("window top {top} exceeds the resolvable ceiling {ceiling}")]
    WindowTooHigh { top: f64, ceiling: f64 },

    // ---- experiments ----
    #[error("length-scale window is empty for N = {n_cells}: left edge {left:e} exceeds right edge {right:e}")]
    WindowEmpty { n_cells: usize, left: f64, right: f64 },
    #[error("only {events} events at the smallest window; at least {min} are required for a stable fit")]
    InsufficientEvents { events: usize, min: usize },

    // ---- configuration / I/O ----
    #[error("config parse error at line {line}: {message}")]
    ConfigParse { line: usize, message: String },
    #[error("configuration invalid:\n  {}", violations.join("\n  "))]
    ConfigInvalid { violations: Vec<String> },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
