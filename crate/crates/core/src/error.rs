use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("schema error: missing field `{field}`")]
    Schema { field: String },

    #[error("integrity error at row {row} (id `{id}`): {message}")]
    Integrity {
        row: usize,
        id: String,
        message: String,
    },

    #[error("unknown field `{0}` in filter predicate")]
    UnknownField(String),

    #[error("missing resource dictionary `{0}`")]
    MissingResource(String),

    #[error("malformed resource `{name}` at line {line}: {message}")]
    MalformedResource {
        name: String,
        line: usize,
        message: String,
    },

    #[error("paraphrase provider failed: {0}")]
    Paraphrase(String),

    #[error("empty score list")]
    EmptyScores,

    #[error("missing score for document `{0}`")]
    MissingScore(String),

    #[error("no calibrated threshold for detector `{detector}` in domain `{domain}`")]
    MissingThreshold { detector: String, domain: String },

    #[error("submission `{0}` is not mapped to a team")]
    UnmappedSubmission(String),

    #[error("remote scoring failed after {attempts} attempts: {message}")]
    Remote { attempts: u32, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed results file: {0}")]
    Results(String),
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Exit code contract: 0 success, 1 runtime failure, 2 validation failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. }
            | Error::Schema { .. }
            | Error::Integrity { .. }
            | Error::UnknownField(_)
            | Error::Config(_) => 2,
            _ => 1,
        }
    }
}
