//! Shared helpers for the pipeline's own comma-separated formats. None of
//! them quote fields; tokens never contain commas.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct FormatError {
    pub line: usize,
    pub message: String,
}

impl FormatError {
    pub fn new(line: usize, message: impl Into<String>) -> Self {
        FormatError {
            line,
            message: message.into(),
        }
    }
}

pub(crate) fn parse_field<T: std::str::FromStr>(line: usize, name: &str, raw: &str) -> Result<T, FormatError>
where
    T::Err: std::fmt::Display,
{
    raw.parse()
        .map_err(|e| FormatError::new(line, format!("{name} {raw:?}: {e}")))
}

/// Joins floats with `sep` using the shortest round-tripping representation.
pub(crate) fn join_f64(values: &[f64], sep: &str) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(sep)
}
