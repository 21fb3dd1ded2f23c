//! Error type shared by every subsystem of the crate.

use std::path::PathBuf;

/// Errors produced by model construction, checking, training and analysis.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A model definition is structurally invalid (cycle, empty range, bad parent).
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// A variable name was not found in the model.
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    /// A value lies outside the range of the variable it was assigned to.
    #[error("value {value} is outside the range of `{variable}`")]
    OutOfRange {
        /// Variable name.
        variable: String,
        /// Offending value, rendered.
        value: String,
    },

    /// An enumeration would exceed the configured budget.
    #[error("budget exceeded: {what} needs {needed} evaluations, budget is {budget}")]
    BudgetExceeded {
        /// What was being enumerated.
        what: String,
        /// Required number of items.
        needed: u128,
        /// Allowed number of items.
        budget: u128,
    },

    /// Marginalization would remove an input the kept variables depend on.
    #[error("cannot marginalize: kept variable `{kept}` depends on removed input `{removed}`")]
    NonComputable {
        /// Kept variable whose equation cannot be composed.
        kept: String,
        /// Removed input variable in its support.
        removed: String,
    },

    /// An abstraction partition or map is malformed.
    #[error("invalid alignment: {0}")]
    InvalidAlignment(String),

    /// Two words of different lexical classes were compared.
    #[error("cross-class comparison: {0}")]
    CrossClass(String),

    /// The dataset generator cannot produce the requested number of distinct pairs.
    #[error("capacity exceeded: requested {requested} distinct pairs, at most {available} available")]
    Capacity {
        /// Requested number of examples.
        requested: usize,
        /// Number that could be produced.
        available: usize,
    },

    /// A dataset file failed verification or could not be parsed.
    #[error("dataset error at line {line}: {message}")]
    Dataset {
        /// One-based line number, 0 for whole-file problems.
        line: usize,
        /// Description.
        message: String,
    },

    /// Loss or activations became NaN or infinite during training.
    #[error("non-finite loss at step {step}")]
    NonFiniteLoss {
        /// Optimizer step at which it happened.
        step: usize,
    },

    /// A gradient evaluated to NaN or infinity.
    #[error("non-finite gradient in {0}")]
    NonFiniteGradient(String),

    /// A tensor shape did not match what was expected.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// An artifact was produced with a different configuration.
    #[error("config hash mismatch for {artifact}: expected {expected}, found {found}")]
    ConfigMismatch {
        /// Artifact path or name.
        artifact: String,
        /// Hash of the current configuration.
        expected: String,
        /// Hash stored in the artifact.
        found: String,
    },

    /// A configuration value is invalid.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Malformed text artifact (checkpoint, bitmatrix, signature table).
    #[error("parse error in {context}: {message}")]
    Parse {
        /// Which artifact.
        context: String,
        /// What went wrong.
        message: String,
    },

    /// Filesystem failure.
    #[error("i/o error on {path}: {source}")]
    Io {
        /// Path involved.
        path: PathBuf,
        /// Underlying error.
        #[source]
        source: std::io::Error,
    },
}

/// Crate result alias.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(context: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Parse {
            context: context.into(),
            message: message.into(),
        }
    }
}
