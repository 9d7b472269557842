use std::fmt;

/// Malformed input file or failed IO while reading or writing one.
#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("line {line}: {message}")]
    Line { line: u64, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl FormatError {
    pub fn at(line: u64, message: impl fmt::Display) -> Self {
        FormatError::Line {
            line,
            message: message.to_string(),
        }
    }

    pub fn invalid(message: impl fmt::Display) -> Self {
        FormatError::Invalid(message.to_string())
    }

    /// Line number for errors tied to one input line.
    pub fn line(&self) -> Option<u64> {
        match self {
            FormatError::Line { line, .. } => Some(*line),
            FormatError::Csv(e) => e.position().map(|p| p.line()),
            _ => None,
        }
    }
}
