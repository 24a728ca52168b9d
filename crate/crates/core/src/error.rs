use thiserror::Error;

use crate::model::Case;
use crate::numerics::NumericsError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("l2 inverse is undefined for negative argument {0}")]
    NegativeArgument(f64),
    #[error("retention {q} lies below z_l = {z_l}")]
    Domain { q: f64, z_l: f64 },
    #[error("operation requires {expected:?} but the model is {found:?}")]
    WrongCase { expected: Case, found: Case },
    #[error("integrand tail does not decay like y^-2 (ratio {ratio})")]
    TailNotQuadratic { ratio: f64 },
    #[error("degenerate dividend band: {0}")]
    DegenerateBand(String),
    #[error("surplus must be non-negative, got {0}")]
    NegativeSurplus(f64),
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("dividend {dividend} exceeds surplus {surplus}")]
    NonAdmissible { dividend: f64, surplus: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { field: field.into(), reason: reason.into() }
}
