use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad command line or config; exit status 2.
    #[error("{0}")]
    Usage(String),
    #[error("scenario {scenario}: {source}")]
    Run {
        scenario: &'static str,
        #[source]
        source: madelung_lab::Error,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
