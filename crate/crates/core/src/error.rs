use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter {field}: {reason}")]
    InvalidParam { field: &'static str, reason: String },

    #[error("sequence length mismatch: beta has {beta} entries, gamma has {gamma}")]
    LengthMismatch { beta: usize, gamma: usize },

    /// N = 0 with Y0 > 0: the cap 1/(2L) stays optimal forever and the
    /// cap-phase window never closes.
    #[error("infinite window: N = 0 keeps the step-size cap optimal for all t")]
    InfiniteWindow,

    #[error("iteration {t} outside the valid range: {reason}")]
    OutOfRange { t: u64, reason: String },

    #[error("t below validity threshold: weak upper bound denominator ≤ 0 at t = {t}")]
    BelowValidity { t: u64 },

    #[error("bound not yet valid: t = {t} is below T' = {threshold}")]
    BoundNotYetValid { t: u64, threshold: f64 },

    #[error("bound inapplicable at t = {t}: {reason}")]
    BoundInapplicable { t: u64, reason: String },

    #[error("quadrature did not converge within budget (achieved {achieved:.3e}, requested {requested:.3e})")]
    QuadratureBudget { achieved: f64, requested: f64 },

    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid_param(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParam {
            field,
            reason: reason.into(),
        }
    }

    pub fn parse(line: u64, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}
