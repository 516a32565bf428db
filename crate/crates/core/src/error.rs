use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by validation, the bound pipeline and the simulation harness.
///
/// Market indices carried by variants are 1-based.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        found: usize,
    },

    #[error("market {market}: share vector is not a simplex point ({reason})")]
    NotASimplexPoint { market: usize, reason: String },

    #[error("{context}: non-finite entry at position {position}")]
    NonFinite { context: String, position: usize },

    #[error("at least {required} markets are required, found {found}")]
    TooFewMarkets { required: usize, found: usize },

    #[error(
        "data violate cyclic monotonicity: min cycle slack {min_cycle_slack:.6e} \
         (markets involved: {markets:?})"
    )]
    CyclicMonotonicityViolated {
        min_cycle_slack: f64,
        markets: Vec<usize>,
    },

    #[error("instance with {markets} markets exceeds the enumeration limit of {limit}")]
    InstanceTooLarge { markets: usize, limit: usize },

    #[error("linear program is infeasible")]
    Infeasible,

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("simplex did not terminate within {0} pivots")]
    PivotLimit(usize),

    #[error("covariance matrix is not symmetric positive definite (pivot {pivot})")]
    CholeskyFailure { pivot: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn dimension(context: impl Into<String>, expected: usize, found: usize) -> Self {
        Error::DimensionMismatch {
            context: context.into(),
            expected,
            found,
        }
    }

    pub(crate) fn non_finite(context: impl Into<String>, position: usize) -> Self {
        Error::NonFinite {
            context: context.into(),
            position,
        }
    }
}
