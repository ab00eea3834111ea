use alloc::string::String;

/// Errors raised by the identification pipeline and its building blocks.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("zero-length experiment")]
    ZeroLengthExperiment,
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("time grid must be finite and strictly increasing (index {index})")]
    BadTimeGrid { index: usize },
    #[error("signal not scaled: t = {time} lies outside the effective support ±{half_width}")]
    SignalNotScaled { time: f64, half_width: f64 },
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("operator ill-conditioned; increase beta (condition number {condition:e})")]
    IllConditioned { condition: f64 },
    #[error("unexcited system: regressor matrix of the {stage} stage is zero")]
    Unexcited { stage: &'static str },
    #[error("rank deficiency in the {stage} stage: {block} block has rank {rank} < {expected}")]
    RankDeficient {
        stage: &'static str,
        block: &'static str,
        rank: usize,
        expected: usize,
    },
    #[error("order undetermined: no singular-value gap above {threshold} in {singular_values:?}")]
    OrderUndetermined {
        threshold: f64,
        singular_values: alloc::vec::Vec<f64>,
    },
    #[error("resolvent singular at {freq_hz} Hz")]
    SingularResolvent { freq_hz: f64 },
    #[error("u and y must share first and last time instants")]
    MismatchedWindows,
    #[error("no successful trials")]
    NoSuccessfulTrials,
    #[error("unsupported: {0}")]
    Unsupported(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;
