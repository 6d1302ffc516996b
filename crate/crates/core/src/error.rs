//! Error type shared across the crate.

use crate::grid::GridMode;

#[derive(Debug, thiserror::Error)]
pub enum CoreError {
    #[error("invalid coefficient spec: {0}")]
    InvalidSpec(String),

    #[error("grid axis {axis} has {n} nodes, need at least 4")]
    GridTooSmall { axis: usize, n: usize },

    #[error("{op} requires a {expected:?}-mode grid, got {found:?}")]
    ModeMismatch {
        op: &'static str,
        expected: GridMode,
        found: GridMode,
    },

    #[error(
        "eigensolver did not converge within {iterations} iterations \
         (best residuals {residuals:?})"
    )]
    SolverDidNotConverge {
        iterations: usize,
        residuals: Vec<f64>,
    },

    #[error(
        "t1 is numerically singular: sigma_min/sigma_max = {ratio:.3e} <= {threshold:.3e}; \
         the pencil reduction is not applicable here"
    )]
    SingularPencil { ratio: f64, threshold: f64 },

    #[error("interior solve failed: {0}")]
    InteriorSolve(String),

    #[error("dense factorization failed: {0}")]
    DenseFactorization(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
