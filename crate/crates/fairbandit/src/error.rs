//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by the library.
///
/// `InconsistentFeedback` is the one variant that signals a broken protocol
/// rather than a bad argument: it means accumulated distance feedback admits
/// no metric at all, so either the oracle lied or tolerances collapsed.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument had the wrong dimension for the object it was given to.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// An argument violated a documented precondition (non-finite entry,
    /// k < 2, negative cap, and so on).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The version space became empty: feedback contradicted itself.
    #[error("inconsistent feedback: version space is empty")]
    InconsistentFeedback,

    /// A per-round diagnostic that needs confidence widths was asked of a
    /// run that never produced any.
    #[error("round log carries no confidence widths")]
    MissingWidths,

    /// An operation that needs at least one logged round got none.
    #[error("empty round log")]
    EmptyLog,

    /// A scripted context sequence ran out before the horizon did.
    #[error("context script exhausted at round {round} (script has {len} sets)")]
    ScriptExhausted { round: u64, len: usize },

    /// Configuration could not be parsed or failed validation.
    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// An internal numerical routine gave up; indicates a bug, not bad input.
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
