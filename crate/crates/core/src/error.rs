use thiserror::Error;

/// Errors raised by the kernels, synthesis and imaging routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("singular Green evaluation: points are {distance:e} m apart (guard {guard:e} m)")]
    SingularEvaluation { distance: f64, guard: f64 },

    #[error("invalid wavenumber {0}: must be finite and > 0")]
    InvalidWavenumber(f64),

    #[error("invalid medium: {0}")]
    InvalidMedium(String),

    #[error("invalid reference range L = {0}: must be > 0")]
    InvalidRange(f64),

    #[error("point {point:?} lies on the array plane z = 0")]
    OnArrayPlane { point: [f64; 3] },

    #[error("invalid array geometry: {0}")]
    InvalidArray(String),

    #[error("invalid frequency band: {0}")]
    InvalidBand(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("data does not match the array or band: {0}")]
    DataMismatch(String),

    #[error("all-zero data: noise level relative to signal power is undefined")]
    ZeroSignal,

    #[error("singular system (condition number {cond:e})")]
    SingularSystem { cond: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
