//! Error taxonomy shared by every module. The CLI maps these one-to-one
//! onto its machine-parsable stderr lines.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CoreError>;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("EmptyDims: a network needs at least one hidden layer")]
    EmptyDims,
    #[error("ZeroDim: dimension {0} is zero")]
    ZeroDim(usize),
    #[error("DimMismatch: expected {expected}, got {got} ({context})")]
    DimMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },
    #[error("ShapeMismatch: {0}")]
    ShapeMismatch(String),
    #[error("SingularGram: Gram matrix factorization failed at pivot {pivot}")]
    SingularGram { pivot: usize },
    #[error("NoConvergence: {what} stopped after {iterations} iterations, residual {residual:e}")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },
    #[error("Divergence: residual grew to {residual:e} after {iterations} iterations")]
    Divergence { residual: f64, iterations: usize },
    #[error("DomainViolation: iterate left the mirror domain and backtracking stalled")]
    DomainViolation,
    #[error("NonOddActivation: {0:?} is not odd; the equivalence recursion requires an odd activation")]
    NonOddActivation(crate::activation::ActivationKind),
    #[error("NonpositiveVariance: sigma_sq = {0} must be positive")]
    NonpositiveVariance(f64),
    #[error("LayerOutOfRange: layer {got} of a depth-{depth} network")]
    LayerOutOfRange { got: usize, depth: usize },
    #[error("DegenerateRatio: denominator {name} = {value:e} is not positive")]
    DegenerateRatio { name: String, value: f64 },
    #[error("BadMagic: 0x{0:08x} is not an IDX image/label magic")]
    BadMagic(u32),
    #[error("Truncated: expected {expected} bytes, got {got}")]
    Truncated { expected: usize, got: usize },
    #[error("InsufficientClass: class {class} has {have} samples, need {need}")]
    InsufficientClass {
        class: usize,
        have: usize,
        need: usize,
    },
    #[error("OutOfRange: label {label} with {classes} classes")]
    OutOfRange { label: usize, classes: usize },
    #[error("InsufficientData: {0}")]
    InsufficientData(String),
    #[error("NonFinite: {0} is not finite and cannot be written")]
    NonFinite(String),
    #[error("ParseError: line {line}: {msg}")]
    ParseError { line: usize, msg: String },
    #[error("IoError: {0}")]
    Io(#[from] std::io::Error),
    #[error("ConfigError: {0}")]
    Config(String),
}

impl CoreError {
    /// Short machine-parsable tag, the first token of the CLI error line.
    pub fn tag(&self) -> &'static str {
        match self {
            CoreError::EmptyDims => "EmptyDims",
            CoreError::ZeroDim(_) => "ZeroDim",
            CoreError::DimMismatch { .. } => "DimMismatch",
            CoreError::ShapeMismatch(_) => "ShapeMismatch",
            CoreError::SingularGram { .. } => "SingularGram",
            CoreError::NoConvergence { .. } => "NoConvergence",
            CoreError::Divergence { .. } => "Divergence",
            CoreError::DomainViolation => "DomainViolation",
            CoreError::NonOddActivation(_) => "NonOddActivation",
            CoreError::NonpositiveVariance(_) => "NonpositiveVariance",
            CoreError::LayerOutOfRange { .. } => "LayerOutOfRange",
            CoreError::DegenerateRatio { .. } => "DegenerateRatio",
            CoreError::BadMagic(_) => "BadMagic",
            CoreError::Truncated { .. } => "Truncated",
            CoreError::InsufficientClass { .. } => "InsufficientClass",
            CoreError::OutOfRange { .. } => "OutOfRange",
            CoreError::InsufficientData(_) => "InsufficientData",
            CoreError::NonFinite(_) => "NonFinite",
            CoreError::ParseError { .. } => "ParseError",
            CoreError::Io(_) => "IoError",
            CoreError::Config(_) => "ConfigError",
        }
    }
}
