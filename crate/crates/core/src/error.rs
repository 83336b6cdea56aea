use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter combination that makes a formula divide by zero or leave
    /// its validity domain (for example `mu = 0`).
    #[error("degenerate parameters: {0}")]
    Degenerate(String),

    #[error("invalid parameter set: {0}")]
    InvalidParameters(String),

    #[error("non-finite state at step {step} (t = {time})")]
    NonFiniteState { step: usize, time: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("zero effort weight: {0} must be strictly positive")]
    ZeroEffortWeight(&'static str),

    #[error("invalid bounds: {0}")]
    InvalidBounds(String),

    #[error("degenerate regression window: {0}")]
    DegenerateWindow(String),

    #[error("invalid range: {0}")]
    InvalidRange(String),

    #[error("insufficient samples: need more than {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("singular design: {0}")]
    SingularDesign(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("negative time: {0}")]
    NegativeTime(f64),

    #[error("equilibrium residual {residual:e} exceeds certificate bound {bound:e}")]
    UncertifiedEquilibrium { residual: f64, bound: f64 },
}

impl Error {
    /// Stable snake-case name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Degenerate(_) => "degenerate_parameters",
            Error::InvalidParameters(_) => "invalid_parameters",
            Error::NonFiniteState { .. } => "non_finite_state",
            Error::GridMismatch(_) => "grid_mismatch",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::ZeroEffortWeight(_) => "zero_effort_weight",
            Error::InvalidBounds(_) => "invalid_bounds",
            Error::DegenerateWindow(_) => "degenerate_window",
            Error::InvalidRange(_) => "invalid_range",
            Error::InsufficientSamples { .. } => "insufficient_samples",
            Error::SingularDesign(_) => "singular_design",
            Error::EmptyInput(_) => "empty_input",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::NegativeTime(_) => "negative_time",
            Error::UncertifiedEquilibrium { .. } => "uncertified_equilibrium",
        }
    }

    /// Process exit code, distinct per variant.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Degenerate(_) => 10,
            Error::InvalidParameters(_) => 11,
            Error::NonFiniteState { .. } => 12,
            Error::GridMismatch(_) => 13,
            Error::LengthMismatch { .. } => 14,
            Error::ZeroEffortWeight(_) => 15,
            Error::InvalidBounds(_) => 16,
            Error::DegenerateWindow(_) => 17,
            Error::InvalidRange(_) => 18,
            Error::InsufficientSamples { .. } => 19,
            Error::SingularDesign(_) => 20,
            Error::EmptyInput(_) => 21,
            Error::InvalidArgument(_) => 22,
            Error::NegativeTime(_) => 23,
            Error::UncertifiedEquilibrium { .. } => 24,
        }
    }
}
