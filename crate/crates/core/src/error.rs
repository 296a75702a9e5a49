use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Two vectors that must agree in length do not.
    DimensionMismatch { expected: usize, found: usize },
    /// A parameter is outside its admissible range.
    InvalidParameter(&'static str),
    /// A point lies outside the problem or grid domain.
    OutOfDomain,
    /// A fidelity index is not in `0..levels`.
    InvalidFidelity { level: usize, levels: usize },
    /// A fidelity level has no observations, so the hierarchy is unidentifiable.
    MissingLevel(usize),
    /// An input collection that must be nonempty is empty.
    Empty(&'static str),
    /// The kernel system stayed indefinite after jitter escalation.
    NotPositiveDefinite { jitter: f64 },
    /// The schedule is undefined once the budget is depleted.
    BudgetExhausted,
    /// No feasible candidate remains after filtering.
    NoFeasiblePoints,
    /// A precondition on the inputs does not hold.
    Precondition(&'static str),
    /// Malformed text record.
    Parse { line: usize, message: String },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::InvalidParameter(what) => write!(f, "invalid parameter: {what}"),
            Error::OutOfDomain => f.write_str("point outside of the domain"),
            Error::InvalidFidelity { level, levels } => {
                write!(f, "fidelity level {level} is not in 0..{levels}")
            }
            Error::MissingLevel(level) => write!(f, "fidelity level {level} has no observations"),
            Error::Empty(what) => write!(f, "{what} is empty"),
            Error::NotPositiveDefinite { jitter } => {
                write!(f, "kernel matrix not positive definite (jitter reached {jitter:e})")
            }
            Error::BudgetExhausted => f.write_str("budget exhausted"),
            Error::NoFeasiblePoints => f.write_str("no feasible points left after filtering"),
            Error::Precondition(what) => write!(f, "precondition violated: {what}"),
            Error::Parse { line, message } => write!(f, "line {line}: {message}"),
        }
    }
}

impl core::error::Error for Error {}
