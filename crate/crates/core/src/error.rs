use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not symmetric: |a_ij - a_ji| = {defect:.3e} at ({row}, {col})")]
    Asymmetric { row: usize, col: usize, defect: f64 },

    #[error("index ({row}, {col}) out of bounds for dimension {n}")]
    IndexOutOfBounds { row: usize, col: usize, n: usize },

    #[error("non-finite value encountered: {0}")]
    NonFinite(&'static str),

    #[error("eigenvalues are not sorted in descending order at position {0}")]
    NotDescending(usize),

    #[error("eigenvector block is not orthonormal: ||Q^T Q - I||_F = {defect:.3e}")]
    NotOrthonormal { defect: f64 },

    #[error("zero vector")]
    ZeroVector,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("residual mass {0:.3e} too small for the weighted tail mean")]
    DegenerateResidual(f64),

    #[error("mean of the unknown eigenvalues needs the trace of A")]
    MissingTrace,

    #[error("second order approximation needs the quantity s")]
    MissingS,

    #[error("operation needs the matrix A")]
    MissingMatrix,

    #[error("evaluation at a pole: t = {t}")]
    PoleEvaluation { t: f64 },

    #[error("no sign change in bracket {bracket} ({lo}, {hi})")]
    NoSignChange { bracket: usize, lo: f64, hi: f64 },

    #[error("no convergence after {iters} iterations")]
    MaxIterations { iters: usize },

    #[error("updated value t_{index} collides with a pole (distance {distance:.3e})")]
    PoleCollision { index: usize, distance: f64 },

    #[error("every known eigenpair is uncoupled from the perturbation")]
    AllDeflated,

    #[error("numerical rank {rank} below {expected}")]
    RankDeficient { rank: usize, expected: usize },

    #[error("vertex {0} has zero degree")]
    ZeroDegree(usize),

    #[error("vertex {0} is isolated and self loops are disabled")]
    IsolatedVertexWithoutSelfLoop(usize),

    #[error("matrix is zero")]
    ZeroMatrix,

    #[error("eigensolver did not converge after {sweeps} sweeps")]
    NonConvergence { sweeps: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{path}: {message}")]
    Io { path: String, message: String },
}
