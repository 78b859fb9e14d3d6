//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not symmetric: max asymmetry {max_asym:e} exceeds {tol:e}")]
    NotSymmetric { max_asym: f64, tol: f64 },

    #[error("matrix is not symmetric positive definite")]
    NotSpd,

    #[error("field is not uniformly elliptic ({0})")]
    NotElliptic(String),

    #[error("jacobian is singular at z = 0 (p < 2, mu = 0)")]
    SingularJacobian,

    #[error("quadrature tolerance {tol:e} not reached after {subdivisions} subdivisions")]
    QuadratureTolerance { tol: f64, subdivisions: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("mesh level {level} in dimension {dim} exceeds the memory budget")]
    MeshTooLarge { dim: usize, level: u32 },

    #[error("meshes are not nested (coarse level {coarse}, fine level {fine})")]
    NotNested { coarse: u32, fine: u32 },

    #[error("linear solver did not converge within {iterations} iterations (residual {residual:e})")]
    LinearSolve { iterations: usize, residual: f64 },

    #[error("newton iteration stagnated at step {iteration} (residual {residual:e}, step size {step:e})")]
    NewtonStagnation {
        iteration: usize,
        residual: f64,
        step: f64,
    },

    #[error("inner solve failed at outer step {step}: {source}")]
    InnerSolve {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("problem is not admissible (rate {rate:.6} >= 1); pass an explicit gamma or allow inadmissible runs")]
    Inadmissible { rate: f64 },

    #[error("trace too short for a rate estimate ({len} rows, need at least 3)")]
    TraceTooShort { len: usize },

    #[error("empty sample set")]
    EmptySampleSet,

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
