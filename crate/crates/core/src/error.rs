use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("empty sample")]
    EmptySample,

    #[error("eigensolver did not converge on a {rows}x{cols} matrix")]
    EigenNonConvergence { rows: usize, cols: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("zero radius")]
    ZeroRadius,

    #[error("projection undefined at origin")]
    ProjectionAtOrigin,

    #[error("no exceedances")]
    NoExceedances,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("column {0} of the loading matrix is zero")]
    ZeroColumn(usize),

    #[error("no clustered extremes")]
    NoClusteredExtremes,

    #[error("Davis-Kahan gap is zero")]
    ZeroGap,

    #[error("non-finite objective or gradient at iteration {iteration}")]
    NonFinite { iteration: usize },

    #[error("zero bandwidth")]
    ZeroBandwidth,
}

pub type Result<T> = std::result::Result<T, Error>;
