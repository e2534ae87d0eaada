//! Crate-wide error type. Recoverable conditions only; logic bugs panic.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error(
        "solver did not converge within {iterations} iterations \
         (primal residual {primal:.3e}, dual residual {dual:.3e})"
    )]
    NonConvergence {
        iterations: usize,
        primal: f64,
        dual: f64,
    },

    #[error("dual vector is numerically zero; its direction is undefined")]
    DegenerateDual,

    #[error("column {index}: {source}")]
    Column {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("target lies outside the span of the dictionary (residual {residual:.3e})")]
    Infeasible { residual: f64 },

    #[error("degenerate graph: every vertex is isolated")]
    DegenerateGraph,

    #[error("geometry failure: {0}")]
    Geometry(String),

    #[error("label mismatch: {0}")]
    LabelMismatch(String),
}
