use gdrc_conic::{ConicError, SolveStatus};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("out of range: {0}")]
    Range(String),
    #[error("parse error at row {row}, column {col}: {msg}")]
    Parse { row: usize, col: usize, msg: String },
    #[error("unknown label {0:?}")]
    Label(String),
    #[error("degenerate dataset: {0}")]
    DegenerateDataset(String),
    #[error("degenerate split: {0}")]
    DegenerateSplit(String),
    #[error("invalid config `{key}`: {msg}")]
    Config { key: String, msg: String },
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("assumption violated: {0}")]
    AssumptionViolated(String),
    #[error("classifier carries no dual certificate")]
    CertificateRequired,
    #[error("solver finished with status {0:?}")]
    Solver(SolveStatus),
    #[error(transparent)]
    Conic(#[from] ConicError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl Error {
    pub fn config(key: &str, msg: impl Into<String>) -> Self {
        Error::Config { key: key.to_string(), msg: msg.into() }
    }

    /// True for errors caused by the input data rather than configuration
    /// or the solver.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::InsufficientData(_)
                | Error::Shape(_)
                | Error::Parse { .. }
                | Error::Label(_)
                | Error::DegenerateDataset(_)
                | Error::DegenerateSplit(_)
                | Error::Io { .. }
        )
    }

    pub fn is_solver_error(&self) -> bool {
        matches!(self, Error::Solver(_) | Error::Numerical(_) | Error::Conic(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
