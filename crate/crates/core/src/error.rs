use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the clustering engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("data error at row {row}, column {column}: {message}")]
    DataParse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("DPP sampling rejected {0} consecutive draws with fewer than the minimum number of generators")]
    ResampleExhausted(usize),

    #[error("no candidate clustering with more than one cluster (per-threshold K: {table})")]
    NoCandidates { table: String },

    #[error("degenerate scatter: W_V + B_V = 0")]
    DegenerateScatter,

    #[error("mixture generation exhausted its retry budget: {0}")]
    GenerationExhausted(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfig(_) => 2,
            Error::DegenerateData(_)
            | Error::DataParse { .. }
            | Error::ShapeMismatch(_)
            | Error::Io(_)
            | Error::Csv(_)
            | Error::Json(_) => 3,
            Error::NumericalFailure(_)
            | Error::ResampleExhausted(_)
            | Error::NoCandidates { .. }
            | Error::DegenerateScatter
            | Error::GenerationExhausted(_) => 4,
        }
    }
}

pub(crate) fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidConfig(msg.into()))
}
