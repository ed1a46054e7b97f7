use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid transect layout: {0}")]
    InvalidLayout(String),

    #[error("invalid plume parameters: {0}")]
    InvalidParams(String),

    #[error("parameter grid is empty after filtering")]
    EmptyGrid,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("covariance matrix is singular or not positive definite (eigenvalue ratio {ratio:e})")]
    SingularCovariance { ratio: f64 },

    #[error("invalid covariance: {0}")]
    InvalidCovariance(String),

    #[error("projection direction is zero")]
    ZeroDirection,

    #[error("series too short: need at least {needed} points, got {got}")]
    SeriesTooShort { needed: usize, got: usize },

    #[error("series is constant; long-run variance undefined")]
    ConstantSeries,

    #[error("signal profile is constant at every grid point; weighted objective undefined")]
    ConstantProfile,

    #[error("non-finite value at component {component}, index {index}")]
    NonFinite { component: usize, index: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
