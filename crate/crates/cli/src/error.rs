use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("unsupported combination: {0}")]
    UnsupportedCombination(String),

    #[error("{context}: {source}")]
    Engine {
        context: String,
        #[source]
        source: shockratio::Error,
    },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("warning promoted to error: {0}")]
    Strict(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse(_) => 2,
            CliError::UnsupportedCombination(_) => 3,
            CliError::Engine { .. } | CliError::Strict(_) => 4,
            CliError::Io { .. } => 5,
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

impl From<shockratio::Error> for CliError {
    fn from(e: shockratio::Error) -> Self {
        match e {
            shockratio::Error::InvalidDistribution(m) | shockratio::Error::Parse(m) => {
                CliError::Parse(m)
            }
            other => CliError::Engine {
                context: "engine".into(),
                source: other,
            },
        }
    }
}

/// Attaches the experiment and step to engine errors.
pub(crate) trait Context<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T, CliError>;
}

impl<T> Context<T> for shockratio::Result<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T, CliError> {
        self.map_err(|e| match CliError::from(e) {
            CliError::Engine { source, .. } => CliError::Engine {
                context: what(),
                source,
            },
            other => other,
        })
    }
}
