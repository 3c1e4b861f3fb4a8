use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("zero-crossing solve for cycle {cycle} did not converge within {iterations} iterations")]
    NewtonDiverged { cycle: i64, iterations: usize },

    #[error("consecutive sample times {first:e} s and {second:e} s quantize to the same grid index {index}")]
    GridTooCoarse { first: f64, second: f64, index: usize },

    #[error("support of size {size} exceeds the dense Gram limit of {limit}")]
    SupportTooLarge { size: usize, limit: usize },

    #[error("input spectrum is identically zero")]
    ZeroInput,

    #[error("image of order k = {k} falls off the grid")]
    OffGridImage { k: i64 },

    #[error("Gram system is numerically singular on support {support:?}")]
    SingularGram { support: Vec<usize> },

    #[error("RIP bound not applicable: C*sqrt(f_res/f_dev) = {value} is not below 0.5")]
    BoundNotApplicable { value: f64 },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
