use thiserror::Error;

/// Errors produced by the geometry, solver and analysis layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("radicand has no admissible root (no horizon)")]
    NoHorizon,
    #[error("radius {r} outside profile domain [0, {r_bar})")]
    OutOfDomain { r: f64, r_bar: f64 },
    #[error("derivative order {0} not supported (0..=3)")]
    BadOrder(usize),
    #[error("empty sample grid")]
    EmptyGrid,
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("mesh generation failed: {0}")]
    Mesh(String),
    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("hypothesis check failed: {0}")]
    Hypothesis(String),
    #[error("linear solver did not converge after {iterations} iterations (residual {residual:e})")]
    LinearSolver { iterations: usize, residual: f64 },
    #[error("indefinite operator detected by the linear solver")]
    Indefinite,
    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NewtonDivergence { iterations: usize, residual: f64 },
    #[error("source term not positive on the range of the solution: {0}")]
    InvalidSource(String),
    #[error("shooting failed: {0}")]
    Shooting(String),
    #[error("surface is not strictly mean convex (min H1 = {0:e})")]
    NotMeanConvex(f64),
    #[error("surface is not graphical over the sphere")]
    NotGraphical,
    #[error("level-set flow left the domain at t = {0:e}")]
    FlowLeftDomain(f64),
    #[error("|∇f| fell below half its boundary minimum at t = {0:e}")]
    WeakGradient(f64),
    #[error("empty band")]
    EmptyBand,
    #[error("point outside mesh")]
    PointOutsideMesh,
}

pub type Result<T> = std::result::Result<T, Error>;
