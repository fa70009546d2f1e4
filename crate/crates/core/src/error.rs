use thiserror::Error;

/// Errors raised anywhere in the pulsating-front laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed reaction: {0}")]
    MalformedReaction(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical failure: {what} (residual {residual:e})")]
    NumericalFailure { what: String, residual: f64 },

    #[error("unbounded search: {0}")]
    UnboundedSearch(String),

    #[error("blow-up detected at t = {t}")]
    Blowup { t: f64 },

    #[error("front reached the guard band at t = {t}")]
    WindowOverflow { t: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("crossing log is not a front: {0}")]
    NotAFront(String),

    #[error("normalization anchor outside the profile grid")]
    OutOfRange,

    #[error("speed {c} too small for traveling coordinates")]
    DegenerateCoordinates { c: f64 },

    #[error("v_d changes sign {count} times at t = {t}")]
    MultiInterface { t: f64, count: usize },

    #[error("v_d has no sign change at t = {t}")]
    NoInterface { t: f64 },

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("state not time-converged (|du/dt| = {rate:e})")]
    PrematureExtraction { rate: f64 },

    #[error("half-line solution left the sub/super-solution envelope by {excess:e}")]
    EnvelopeViolation { excess: f64 },

    #[error("invalid gluing: alpha = {alpha} but A_d(x_e) = {a_d} (mismatch {mismatch:e})")]
    InvalidGluing { alpha: f64, a_d: f64, mismatch: f64 },

    #[error("internal consistency: {0}")]
    Consistency(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
