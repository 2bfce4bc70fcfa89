use thiserror::Error;

/// Errors raised by the survival, convolution, tilting and simulation engines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("density is not differentiable at t = {t} ({reason})")]
    NonDifferentiable { t: f64, reason: String },

    #[error("tail mass bound {bound:e} exceeds tolerance {tolerance:e}")]
    TailBoundTooLoose { bound: f64, tolerance: f64 },

    #[error("distribution is not in class C2: {0}")]
    NotClassC2(String),

    #[error("enumeration exceeded node budget of {budget}")]
    CombinatorialBlowup { budget: usize },

    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),

    #[error("{value} is not an atom of the distribution")]
    NotAnAtom { value: f64 },

    #[error("grid resolution too coarse: {0}")]
    ResolutionTooCoarse(String),

    #[error("window function invalid: {0}")]
    WindowInvalid(String),

    #[error("eps = {eps} does not satisfy the monotonicity precondition: {reason}")]
    EpsNotValid { eps: f64, reason: String },

    #[error("moment generating function undefined: {0}")]
    MgfUndefined(String),

    #[error("target {target} outside the attainable range ({lower}, {upper})")]
    TargetOutOfRange { target: f64, lower: f64, upper: f64 },

    #[error("large-deviation condition failed: {0}")]
    ConditionFailed(String),

    #[error("n = {n} too small: {reason}")]
    NTooSmall { n: u64, reason: String },

    #[error(
        "constants out of order: need 0 < c_x ({c_lower}) < p0*M_x ({pivot}) < C_x ({c_upper})"
    )]
    ConstantsOutOfOrder {
        c_lower: f64,
        pivot: f64,
        c_upper: f64,
    },

    #[error("tilted law not samplable at lambda = {lambda}: {reason}")]
    TiltNotSamplable { lambda: f64, reason: String },

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn precondition(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::PreconditionViolated(msg()))
    }
}
