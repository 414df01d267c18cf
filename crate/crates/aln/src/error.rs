//! Crate-wide error type.

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors emitted by numerics, data handling, models, and training.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Two operands had incompatible shapes.
    #[error("dimension mismatch in {op}: {left_rows}x{left_cols} vs {right_rows}x{right_cols}")]
    DimensionMismatch {
        op: &'static str,
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },

    /// An operation that requires at least one element received none.
    #[error("empty input to {0}")]
    EmptyInput(&'static str),

    /// A matrix constructor received data whose length does not match the shape.
    #[error("data length {got} does not match {rows}x{cols} (expected {expected})")]
    DataLength {
        rows: usize,
        cols: usize,
        expected: usize,
        got: usize,
    },

    /// A NaN or infinity was found where only finite values are allowed.
    #[error("non-finite value at ({row}, {col}) in {context}")]
    NonFinite {
        context: String,
        row: usize,
        col: usize,
    },

    /// A class label fell outside the configured class count.
    #[error("label {label} out of range for {num_classes} classes")]
    LabelOutOfRange { label: usize, num_classes: usize },

    /// A gradient or optimizer state went numerically bad.
    #[error("numeric fault in parameter {param}: {detail}")]
    NumericFault { param: String, detail: String },

    /// A configuration value violated its documented range.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A dataset record failed semantic validation.
    #[error("validation failed for utterance {id}: {detail}")]
    UtteranceValidation { id: String, detail: String },

    /// A file could not be parsed.
    #[error("parse error at line {line}: {detail}")]
    Parse { line: usize, detail: String },

    /// The acoustic and derived linguistic sequences disagree on frame count.
    #[error("sequence alignment error: acoustic has {acoustic} frames, linguistic has {linguistic}")]
    Alignment { acoustic: usize, linguistic: usize },

    /// An operation does not apply to the given model variant.
    #[error("variant {variant} does not support {op}")]
    UnsupportedVariant { variant: String, op: &'static str },

    /// Training hit a non-finite loss and aborted.
    #[error("training aborted: non-finite loss at epoch {epoch}, batch {batch}, utterance {id}")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        id: String,
    },

    /// Underlying I/O failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for faults that indicate numeric breakdown rather than bad input.
    pub fn is_numeric_fault(&self) -> bool {
        matches!(
            self,
            Error::NumericFault { .. } | Error::NonFiniteLoss { .. }
        )
    }
}
