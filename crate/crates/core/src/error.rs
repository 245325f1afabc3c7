use chrono::NaiveDate;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate date {0}")]
    DuplicateDate(NaiveDate),

    /// A split or label set that cannot support the requested computation,
    /// e.g. a single-class validation split.
    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("autodiff: {0}")]
    Autodiff(String),

    #[error("non-deterministic function: {0}")]
    NonDeterministic(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) | Error::Config(_) => 1,
            Error::Parse { .. }
            | Error::DuplicateDate(_)
            | Error::Degenerate(_)
            | Error::Io(_)
            | Error::Csv(_) => 2,
            Error::Shape(_) | Error::NonFinite(_) | Error::Autodiff(_) | Error::NonDeterministic(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
