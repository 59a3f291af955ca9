use alloc::string::String;

/// Errors raised by the model, likelihood, and estimation routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} features, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("outcome {y} (row {row}) is not a non-negative multiple of the interval length {psi}")]
    OffGrid { row: usize, y: f64, psi: f64 },

    #[error("invalid parameter {name}: {value}")]
    InvalidParameter { name: &'static str, value: f64 },

    #[error("outcome cell {cell} lies beyond the baseline grid of {len} increments")]
    BeyondGrid { cell: usize, len: usize },

    #[error("spell {spell} of subject `{subject}` has zero likelihood")]
    ZeroLikelihood { subject: String, spell: usize },

    #[error("internal consistency failure: {0}")]
    Internal(&'static str),

    #[error("non-finite gradient component for {parameter}")]
    NonFiniteGradient { parameter: String },

    #[error("non-finite objective at the initial parameters")]
    NonFiniteObjective,

    #[error("dataset has no observed events")]
    NoEvents,

    #[error("quadrature did not converge: estimated error {achieved:e} above tolerance {requested:e}")]
    Quadrature { achieved: f64, requested: f64 },

    #[error("feature effect is not finite (phi = {phi})")]
    NonFinitePrediction { phi: f64 },

    #[error("no comparable pairs")]
    NoComparablePairs,

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = core::result::Result<T, Error>;
