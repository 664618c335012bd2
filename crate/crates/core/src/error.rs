use crate::balancing::Axis;
use thiserror::Error;

/// Errors for measure construction, balancing, spectral analysis, and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("empty domain: need at least one atom per axis")]
    EmptyDomain,

    #[error("negative entry at ({row}, {col}): {value}")]
    NegativeEntry { row: usize, col: usize, value: f64 },

    #[error("non-finite entry at ({row}, {col}): {value}")]
    NonFiniteEntry { row: usize, col: usize, value: f64 },

    #[error("duplicate label {label:?}")]
    DuplicateLabel { label: String },

    #[error("{count} labels provided for {expected} atoms")]
    LabelCountMismatch { count: usize, expected: usize },

    #[error("measure is not normalized (total mass {mass}); call normalize() first")]
    NotNormalized { mass: f64 },

    #[error("probability vector sums to {sum}, not 1")]
    SumNotOne { sum: f64 },

    #[error("target marginal entry {index} is not strictly positive: {value}")]
    NotStrictlyPositive { index: usize, value: f64 },

    #[error("absolute continuity violated at {location}: numerator positive where reference vanishes")]
    AbsoluteContinuityViolation { location: String },

    #[error("cannot rescale {axis} atom {index}: marginal mass is zero but target is positive")]
    EmptyMarginalCell { axis: Axis, index: usize },

    #[error("conditional mean undefined: {axis} atom {index} has zero marginal mass")]
    ZeroMarginal { axis: Axis, index: usize },

    #[error("no spectral gap: singular value s_{index} = {value} is 1 and the 1/(1-s^2) factor is required")]
    SpectralGapViolation { index: usize, value: f64 },

    #[error("sample size must be positive")]
    ZeroSampleSize,

    #[error("invalid parameter {name}: {value} (must satisfy {constraint})")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },

    #[error("all keyword counts are zero; truncated target is undefined")]
    AllZeroCounts,

    #[error("target assigns mass to keyword {keyword:?} outside the observed support")]
    TargetOutsideSupport { keyword: String },

    #[error("keyword list must be nonempty and duplicate-free")]
    BadKeywordList,

    #[error("corpus must contain at least one record with unique ids")]
    BadCorpus,

    #[error("resampling needs at least one positive weight")]
    NoPositiveWeight,

    #[error("malformed input: {0}")]
    Malformed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
