//! Error types shared by the core pipeline.

use alloc::string::String;

/// Errors raised by domain constructors, operations, and training.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CoreError {
    /// An argument violated an operation precondition.
    #[error("contract violation: {0}")]
    Contract(String),
    /// An index fell outside the valid range.
    #[error("index {index} out of range for length {len}")]
    Range { index: usize, len: usize },
    /// A phoneme label was not a member of the vocabulary.
    #[error("phoneme label {label} outside vocabulary of size {vocab}")]
    Vocab { label: u32, vocab: u32 },
    /// A corpus was too small or inconsistent for the requested operation.
    #[error("data error: {0}")]
    Data(String),
    /// A loss component became non-finite during training.
    #[error("non-finite value in component `{component}`")]
    Numeric { component: &'static str },
}

impl CoreError {
    pub fn contract(msg: impl Into<String>) -> Self {
        CoreError::Contract(msg.into())
    }
    pub fn data(msg: impl Into<String>) -> Self {
        CoreError::Data(msg.into())
    }
}

pub type Result<T> = core::result::Result<T, CoreError>;
