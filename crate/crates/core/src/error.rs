use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library can report.
///
/// Variants carry owned strings so errors can be cloned into cached results
/// and shipped across trial workers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("labels without semantic vectors: {}", .0.join(", "))]
    Coverage(Vec<String>),

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("missing data: {0}")]
    MissingData(String),

    #[error("degenerate test: {0}")]
    DegenerateTest(String),

    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }

    /// Short machine-readable tag for the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Shape(_) => "shape",
            Error::Numeric(_) => "numeric",
            Error::Singular(_) => "singular",
            Error::Parse { .. } => "parse",
            Error::Coverage(_) => "coverage",
            Error::EmptyDataset(_) => "empty_dataset",
            Error::MissingData(_) => "missing_data",
            Error::DegenerateTest(_) => "degenerate_test",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
