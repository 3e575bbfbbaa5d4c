use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed json in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    /// The manifest or an artifact does not match the expected layout.
    #[error("schema error: {0}")]
    Schema(String),

    /// Sample values are unusable (non-finite, wrong length).
    #[error("data error in trial {trial_id}: {message}")]
    Data { trial_id: i64, message: String },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("filter design failed: {0}")]
    Design(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("solver did not converge after {iterations} iterations (optimality gap {gap:.3e})")]
    Convergence { iterations: usize, gap: f64 },

    #[error("stratification error: {0}")]
    Stratification(String),

    /// Wraps an error with the pipeline stage that produced it.
    #[error("stage `{stage}`: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Innermost error, looking through stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for errors raised by numerical failure rather than bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self.root(),
            Error::Numeric(_) | Error::Convergence { .. } | Error::Design(_)
        )
    }
}
