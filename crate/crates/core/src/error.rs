//! Error type shared across the crate.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by parsing, model fitting, and search.
///
/// The variants are deliberately coarse: callers (in particular the CLI)
/// dispatch on the kind of failure, not on its details.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Malformed input text (transaction files, itemset files, model files).
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A semantically invalid argument: out-of-range item id, empty
    /// database where rows are required, frequency outside [0, 1], ...
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A structural limit was exceeded: too many itemsets in one partition,
    /// too many items in one dependent group, too wide an item universe.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// Iterative scaling ran out of passes before reaching the tolerance.
    #[error(
        "iterative scaling did not converge: worst residual {residual:.3e} after {passes} passes"
    )]
    NoConvergence { residual: f64, passes: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn capacity(msg: impl Into<String>) -> Self {
        Error::Capacity(msg.into())
    }
}
