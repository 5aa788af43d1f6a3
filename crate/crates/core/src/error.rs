//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by the generation, emission, harness, and campaign layers.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value violates its documented constraints.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Source translation hit a CUDA construct outside the generated subset.
    #[error("unsupported construct in source translation: {0}")]
    UnsupportedConstruct(String),

    /// No registered compiler handles this file extension.
    #[error("no compiler registered for extension {0:?}")]
    UnmatchedExtension(String),

    /// A program output line could not be categorized.
    #[error("unparseable output line: {0:?}")]
    OutputParse(String),

    /// The reference interpreter hit a malformed AST (generator bug).
    #[error("evaluation error: {0}")]
    Eval(String),

    /// Metadata files disagree on schema version.
    #[error("metadata schema mismatch: {left} vs {right}")]
    SchemaMismatch { left: u32, right: u32 },

    /// External compiler invocation failed before producing a binary.
    #[error("compiler invocation failed: {0}")]
    CompilerSpawn(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
