use std::fmt;

/// Errors produced while building or applying quadrature rules.
#[derive(Debug, Clone)]
pub enum Error {
    /// A caller-supplied parameter is outside the supported range.
    InvalidParameter(String),
    /// An internal consistency check failed; this signals a defect in the
    /// construction (wrong root count, bad row labels), not a user error.
    Defect(String),
    /// The linear system for the multipliers is singular at the working
    /// precision.
    Singular { condition_estimate: f64 },
    /// The solved system verified poorly; re-running with more precision
    /// bits should fix it.
    PrecisionLoss {
        residual: f64,
        threshold: f64,
        condition_estimate: f64,
        suggested_bits: u32,
    },
    /// An integrand evaluated to a non-finite value.
    NonFinite { location: String },
    /// A truncated infinite sum cannot meet the requested tolerance; the
    /// analytic tail bound is too large at the given truncation width.
    TailBound {
        tail_bound: f64,
        tolerance: f64,
        required_beta_max: u32,
    },
    /// An operation needed optional data (exact integral, derivative norm)
    /// that the integrand does not carry.
    MissingData(String),
    /// A decimal coefficient string could not be parsed.
    Parse(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::Defect(msg) => write!(f, "internal consistency failure: {msg}"),
            Error::Singular { condition_estimate } => write!(
                f,
                "multiplier system is singular at working precision \
                 (condition estimate {condition_estimate:.3e}); retry with more bits"
            ),
            Error::PrecisionLoss {
                residual,
                threshold,
                condition_estimate,
                suggested_bits,
            } => write!(
                f,
                "solver residual {residual:.3e} exceeds threshold {threshold:.3e} \
                 (condition estimate {condition_estimate:.3e}); \
                 retry with precision_bits >= {suggested_bits}"
            ),
            Error::NonFinite { location } => {
                write!(f, "integrand returned a non-finite value at {location}")
            }
            Error::TailBound {
                tail_bound,
                tolerance,
                required_beta_max,
            } => write!(
                f,
                "truncation tail bound {tail_bound:.3e} exceeds tolerance {tolerance:.3e}; \
                 beta_max >= {required_beta_max} is required"
            ),
            Error::MissingData(msg) => write!(f, "missing data: {msg}"),
            Error::Parse(msg) => write!(f, "parse error: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
