use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Core(#[from] totc::Error),

    #[error("{0}")]
    NotConverged(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }

    pub fn code(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config-error",
            CliError::Io { .. } | CliError::Csv(_) => "io-error",
            CliError::Core(e) => e.code(),
            CliError::NotConverged(_) => "not-converged",
        }
    }

    /// `error: <code>: <message>` on a single line.
    pub fn stderr_line(&self) -> String {
        let msg = self.to_string().replace(['\n', '\r'], " ");
        format!("error: {}: {msg}", self.code())
    }
}
