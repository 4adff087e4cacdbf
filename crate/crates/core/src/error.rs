//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// An event (or a batch slot) contains no points/sites.
    #[error("empty event{}", .context.as_deref().map(|c| format!(" in {c}")).unwrap_or_default())]
    EmptyEvent { context: Option<String> },

    /// A point carries a non-finite coordinate or charge.
    #[error("invalid point at index {index}: non-finite {field}")]
    InvalidPoint { index: usize, field: &'static str },

    /// Dimension / shape disagreement between two values.
    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    Shape {
        context: &'static str,
        expected: String,
        got: String,
    },

    /// A lattice coordinate falls outside the packable key range.
    #[error("lattice coordinate {value} outside packable range [-32767, 32767]")]
    Range { value: i64 },

    /// Checkpoint file is corrupt, truncated, or incompatible.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    /// A class label is out of range for the task.
    #[error("label {label} out of range for {classes} classes")]
    Label { label: usize, classes: usize },

    /// Non-finite value encountered during optimization.
    #[error("non-finite numerics in {context}")]
    Numerics { context: String },

    /// Invalid configuration value.
    #[error("config error: {0}")]
    Config(String),

    /// A probe/analysis task cannot be formed from the given data.
    #[error("task error: {0}")]
    Task(String),

    /// Event file is corrupt or truncated.
    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    /// Data has no variance to decompose.
    #[error("degenerate data: {0}")]
    DegenerateData(String),

    /// Underlying I/O failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn empty_event(context: impl Into<String>) -> Self {
        Error::EmptyEvent {
            context: Some(context.into()),
        }
    }

    pub fn shape(context: &'static str, expected: impl ToString, got: impl ToString) -> Self {
        Error::Shape {
            context,
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
