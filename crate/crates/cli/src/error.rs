use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

/// A config value that parsed but breaks an invariant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValidationError {
    /// Dotted path of the offending field, e.g. `potentials.tau`.
    pub field: String,
    /// Name of the violated invariant.
    pub invariant: String,
    pub detail: String,
}

impl ValidationError {
    pub fn new(field: impl Into<String>, invariant: impl Into<String>, detail: impl Into<String>) -> Self {
        Self { field: field.into(), invariant: invariant.into(), detail: detail.into() }
    }
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} ({})", self.field, self.invariant, self.detail)
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot access {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("validation error: {0}")]
    Validation(ValidationError),

    #[error("numerical failure: {0}")]
    Numerical(ruelle::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } | CliError::Parse(_) | CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

impl From<ValidationError> for CliError {
    fn from(e: ValidationError) -> Self {
        CliError::Validation(e)
    }
}

impl From<ruelle::Error> for CliError {
    fn from(e: ruelle::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e)
        } else {
            CliError::Validation(ValidationError::new("run", invariant_name(&e), e.to_string()))
        }
    }
}

/// Variant name of a library error, used as the invariant label.
pub fn invariant_name(e: &ruelle::Error) -> &'static str {
    use ruelle::Error::*;
    match e {
        InvalidInput(_) => "InvalidInput",
        EmptyRowOrColumn { .. } => "EmptyRowOrColumn",
        NotIrreducibleAperiodic { .. } => "NotIrreducibleAperiodic",
        InadmissibleWord { .. } => "InadmissibleWord",
        WordTooShort { .. } => "WordTooShort",
        SpecMismatch => "SpecMismatch",
        BadFrequency(_) => "BadFrequency",
        NoConvergence { .. } => "NoConvergence",
        NormalizationFailed { .. } => "NormalizationFailed",
        NotStationary(_) => "NotStationary",
        BracketFailure(_) => "BracketFailure",
        OutOfRange { .. } => "OutOfRange",
        LatticeDegenerate(_) => "LatticeDegenerate",
        TooLarge { .. } => "TooLarge",
        QuadratureUnderresolved { .. } => "QuadratureUnderresolved",
        NonFinite(_) => "NonFinite",
    }
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_GUARD_TRIP: i32 = 3;
