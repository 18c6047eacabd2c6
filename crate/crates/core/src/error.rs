use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid Fock dimension {0} (need at least 2)")]
    InvalidDimension(usize),

    #[error("mode index {index} out of range for a {modes}-mode space")]
    ModeIndexOutOfRange { index: usize, modes: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("objects live on different Hilbert spaces")]
    SpaceMismatch,

    #[error("empty mode selection")]
    EmptyModeSelection,

    #[error("degenerate normalization: {0}")]
    DegenerateNormalization(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("coupler {coupler} violates eps = ±K·α·α (relative residual {residual:.3e})")]
    ConstraintViolation { coupler: usize, residual: f64 },

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("odd loop count {0} rejected (pass allow_odd for parity-phase experiments)")]
    OddLoopCount(usize),

    #[error("target phase {target} outside attainable range (0, {max})")]
    PhaseOutOfRange { target: f64, max: f64 },

    #[error("integration failed at t = {time}: step size {step:e} underflowed")]
    IntegrationFailure { time: f64, step: f64 },

    #[error("relative phase undefined: overlap {0:e} vanishes")]
    UndefinedPhase(f64),

    #[error("expected a single-mode state, got {0} modes")]
    NotSingleMode(usize),

    #[error("no stored state at sample {0}")]
    MissingState(usize),

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),
}
