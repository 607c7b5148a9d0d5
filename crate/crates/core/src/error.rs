use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A numeric argument is outside the domain of the operation.
    #[error("invalid {name}: {value} ({reason})")]
    InvalidArgument {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("absorbing chain: p11 + p00 = {0} (stationary mean undefined)")]
    AbsorbingChain(f64),

    #[error("degenerate series: {0}")]
    Degenerate(&'static str),

    #[error("series too short: length {len}, need at least {need}")]
    TooShort { len: usize, need: usize },

    #[error(
        "variance factor fit failed: coverage {reached:.4} at V = {v_max} is below target {target}"
    )]
    FitFailed {
        reached: f64,
        target: f64,
        v_max: f64,
    },

    #[error("circulant embedding is not positive definite (min eigenvalue {0:e})")]
    Embedding(f64),

    #[error("{}", RowError::describe(.0))]
    Rows(Vec<RowError>),

    #[error("duplicate study_id `{id}` at row {row}")]
    DuplicateId { id: String, row: usize },

    #[error("censoring removed every record")]
    AllCensored,

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Stream(#[from] std::io::Error),
}

/// A problem with one field of an input table. `row` counts lines in the
/// file, the header being line 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RowError {
    pub row: usize,
    pub column: String,
    pub message: String,
}

impl RowError {
    fn describe(errors: &[RowError]) -> String {
        let shown: Vec<String> = errors
            .iter()
            .take(20)
            .map(|e| format!("row {}, column `{}`: {}", e.row, e.column, e.message))
            .collect();
        let more = errors.len().saturating_sub(shown.len());
        let mut s = format!("{} invalid field(s): {}", errors.len(), shown.join("; "));
        if more > 0 {
            s.push_str(&format!("; and {more} more"));
        }
        s
    }
}

impl Error {
    pub(crate) fn arg(name: &'static str, value: f64, reason: &'static str) -> Self {
        Error::InvalidArgument {
            name,
            value,
            reason,
        }
    }

    /// True for failures caused by the filesystem or an output sink rather
    /// than by the data.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. } | Error::Stream(_))
            || matches!(self, Error::Csv(e) if e.is_io_error())
    }
}
