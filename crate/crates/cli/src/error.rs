use proxlith_core::Error as CoreError;
use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Config(String),
    #[error("{path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Config(_) => 2,
            CliError::Parse { .. } => 3,
            CliError::Core(e) => match e {
                CoreError::InvalidMask(_) | CoreError::InvalidGrid(_) | CoreError::Config(_) => 2,
                CoreError::OutOfRange { .. } | CoreError::NonMonotone(_) => 5,
                _ => 4,
            },
            CliError::Io { .. } => 6,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config(_) => "config",
            CliError::Parse { .. } => "parse",
            CliError::Core(e) => match e {
                CoreError::InvalidMask(_) | CoreError::InvalidGrid(_) | CoreError::Config(_) => "config",
                CoreError::OutOfRange { .. } => "range",
                CoreError::NonMonotone(_) => "monotonicity",
                _ => "numerical",
            },
            CliError::Io { .. } => "io",
        }
    }

    /// One line: `error kind=<kind> code=<code> message=<json string>`.
    pub fn render(&self) -> String {
        let message = serde_json::to_string(&self.to_string()).expect("strings serialize");
        format!("error kind={} code={} message={}", self.kind(), self.exit_code(), message)
    }
}
