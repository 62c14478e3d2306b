use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A trial parameter is outside its valid range. Carries the field name.
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter {
        field: &'static str,
        reason: &'static str,
    },

    #[error("allocation leaves the {arm} arm empty (n = {n})")]
    EmptyArm { arm: &'static str, n: usize },

    #[error("stage 2 {arm} arm is empty among classified non-responders")]
    EmptyStage2Arm { arm: &'static str },

    #[error("no classified non-responders in the placebo arm")]
    NoNonResponders,

    #[error("cannot take a quantile of an empty list")]
    EmptyQuantileInput,

    #[error("weight w = {0} is outside [0, 1]")]
    WeightOutOfRange(f64),

    #[error("threshold root-finding did not reach |F(q) - p| <= 1e-12 (residual {residual:e})")]
    ThresholdNotConverged { residual: f64 },

    #[error("closed-form expectations are not available for the {0} classifier")]
    UnsupportedClassifier(&'static str),

    #[error("mixture fit needs at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("mixture fit collapsed (component sd hit the {floor:e} floor)")]
    DegenerateFit { floor: f64 },

    #[error("EM tolerance must be positive and finite")]
    InvalidTolerance,

    #[error("grid spec has no {0}")]
    EmptyGrid(&'static str),
}
