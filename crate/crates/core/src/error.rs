use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid Hilbert space: {0}")]
    InvalidSpace(String),
    #[error("operator spaces differ: {0} vs {1}")]
    SpaceMismatch(String, String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("atom index {index} out of range for {n_atoms} atom(s)")]
    AtomIndex { index: usize, n_atoms: usize },
    #[error("unknown level label `{0}` (expected s, g or e)")]
    UnknownLevel(String),
    #[error("operator is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("no state found in the fully interacting sector")]
    NoInteractingState,
    #[error("time step {dt} exceeds stability bound {dt_max}")]
    StepTooLarge { dt: f64, dt_max: f64 },
    #[error("invariant `{invariant}` violated at t = {t}: {detail}")]
    InvariantBreach {
        invariant: &'static str,
        t: f64,
        detail: String,
    },
    #[error("time grid is not uniform")]
    NonUniformGrid,
    #[error("transient incomplete at t_end: population outside the ground sector is {0:e}")]
    TransientIncomplete(f64),
    #[error("{0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
