use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate segment: endpoints coincide")]
    DegenerateSegment,

    #[error("heading undefined for a zero-length vector")]
    UndefinedHeading,

    #[error("{source_name} row {row}: {message}")]
    Input {
        source_name: String,
        row: usize,
        message: String,
    },

    #[error("unknown node {0}")]
    UnknownNode(String),

    #[error("unknown edge {0}")]
    UnknownEdge(String),

    #[error("trajectory needs at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("polynomial fit failed: {0}")]
    FitFailure(String),

    #[error("missing fuzzy variable `{0}`")]
    MissingVariable(String),

    #[error("unknown label `{label}` for fuzzy variable `{variable}`")]
    UnknownLabel { variable: String, label: String },

    #[error("invalid rule base: {0}")]
    RuleBase(String),

    #[error("no candidate edges near point {0}")]
    NoCandidates(usize),

    #[error("matching failed: {0}")]
    Matching(String),

    #[error("empty ground-truth route")]
    EmptyTruth,

    #[error("edges do not form one connected component")]
    Disconnected,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn input(source_name: &str, row: usize, message: impl Into<String>) -> Self {
        Error::Input {
            source_name: source_name.to_string(),
            row,
            message: message.into(),
        }
    }

    /// True for errors caused by malformed or inconsistent input files.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Input { .. }
                | Error::UnknownNode(_)
                | Error::UnknownEdge(_)
                | Error::Io(_)
                | Error::Csv(_)
                | Error::Json(_)
                | Error::RuleBase(_)
                | Error::InvalidParameter(_)
                | Error::TooFewPoints { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
