//! Error type shared across the crate.

use std::fmt;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// All failures surfaced by the library.
#[derive(Debug)]
pub enum Error {
    /// A vector or matrix had a different dimension than required.
    DimensionMismatch { expected: usize, got: usize },
    /// A hyperparameter or configuration value is outside its admissible range.
    InvalidParam(String),
    /// An operation that needs data received an empty collection.
    EmptyInput(String),
    /// The requested problem is infeasible, e.g. hard-margin separation of
    /// data containing the origin.
    Infeasible(String),
    /// A model is in a state that cannot be used for the requested operation.
    DegenerateModel(String),
    /// A probed processing chain failed the affinity spot check.
    NonAffineChain(String),
    /// A numeric computation failed or produced no usable value.
    Numerical(String),
    /// Underlying I/O failure.
    Io(std::io::Error),
    /// A file or string could not be parsed.
    Parse(String),
    /// A stored model declares an unsupported format version.
    VersionMismatch { expected: u32, got: u32 },
    /// Experiment configuration validation; collects every problem found.
    Config(Vec<String>),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            Error::InvalidParam(msg) => write!(f, "invalid parameter: {msg}"),
            Error::EmptyInput(msg) => write!(f, "empty input: {msg}"),
            Error::Infeasible(msg) => write!(f, "infeasible problem: {msg}"),
            Error::DegenerateModel(msg) => write!(f, "degenerate model: {msg}"),
            Error::NonAffineChain(msg) => write!(f, "non-affine chain: {msg}"),
            Error::Numerical(msg) => write!(f, "numeric failure: {msg}"),
            Error::Io(e) => write!(f, "i/o error: {e}"),
            Error::Parse(msg) => write!(f, "parse error: {msg}"),
            Error::VersionMismatch { expected, got } => {
                write!(f, "unsupported format version {got} (this build reads version {expected})")
            }
            Error::Config(problems) => {
                writeln!(f, "invalid configuration ({} problem(s)):", problems.len())?;
                for p in problems {
                    writeln!(f, "  - {p}")?;
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_lists_every_config_problem() {
        let e = Error::Config(vec!["first".into(), "second".into()]);
        let s = e.to_string();
        assert!(s.contains("2 problem(s)"));
        assert!(s.contains("first"));
        assert!(s.contains("second"));
    }

    #[test]
    fn io_error_round_trips_through_from() {
        let io = std::io::Error::new(std::io::ErrorKind::NotFound, "gone");
        let e: Error = io.into();
        assert!(matches!(e, Error::Io(_)));
        assert!(e.to_string().contains("gone"));
    }
}
