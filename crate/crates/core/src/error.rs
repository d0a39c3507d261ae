use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: malformed record: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: rating {value} outside 1..=5")]
    Domain { line: usize, value: i64 },

    #[error("line {line}: duplicate rating for user {user:?}, item {item:?}")]
    Duplicate {
        line: usize,
        user: String,
        item: String,
    },

    #[error("duplicate entry ({user}, {item})")]
    DuplicateEntry { user: usize, item: usize },

    #[error("entry ({user}, {item}) out of range for a {rows}x{cols} matrix")]
    OutOfRange {
        user: usize,
        item: usize,
        rows: usize,
        cols: usize,
    },

    #[error("rating {0} outside 1..=5")]
    RatingValue(u8),

    #[error("no ratings")]
    Empty,

    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),

    #[error("rank {requested} out of range 1..={max}")]
    Rank { requested: usize, max: usize },

    #[error("SVD did not converge within {iterations} iterations")]
    Convergence { iterations: usize },

    #[error("dimension mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    /// Whether the failure comes from caller-supplied parameters rather than
    /// from the data itself.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Rank { .. })
    }
}
