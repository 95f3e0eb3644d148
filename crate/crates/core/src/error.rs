use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("no closed-form density for {0}; use the Fourier inversion engine")]
    NoClosedForm(String),

    #[error("density domain error: {0}")]
    DensityDomain(String),

    #[error("frequency cutoff {given} insufficient for the requested tail tolerance; need at least {required}")]
    CutoffInsufficient { given: f64, required: f64 },

    #[error("atomic distribution: the symbol has bounded real part, so no density exists")]
    AtomicDistribution,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("quadrature did not converge: estimate {estimate}, error bound {error_bound}")]
    QuadratureNonConvergence { estimate: f64, error_bound: f64 },

    #[error("state outside the support of the density (denominator density {density:e})")]
    OutsideSupport { density: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("path grid mismatch: {0}")]
    PathGrid(String),

    #[error("curve unattainable by this family: target {target} outside attainable range [{min}, {max}] at maturity {maturity}")]
    CurveUnattainable {
        maturity: f64,
        target: f64,
        min: f64,
        max: f64,
    },

    #[error("ambiguous root at maturity {maturity}: candidate λ intervals {intervals:?}")]
    AmbiguousRoot {
        maturity: f64,
        intervals: Vec<(f64, f64)>,
    },

    #[error("log-space overflow: {0}")]
    Overflow(String),

    #[error("singular matrix: {0}")]
    SingularMatrix(String),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
