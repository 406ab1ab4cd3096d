use std::fmt;
use std::process::ExitCode;

/// Failure classes, each with its own exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or arguments.
    Config(String),
    /// A validation suite reported failures.
    Validation(String),
    /// A solver or oracle size cap was hit.
    ResourceCap(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Validation(_) | CliError::Runtime(_) => 1,
            CliError::Config(_) => 2,
            CliError::ResourceCap(_) => 3,
        })
    }

    /// Prefixes the message with where the error happened.
    pub fn context(self, what: impl fmt::Display) -> CliError {
        match self {
            CliError::Config(m) => CliError::Config(format!("{what}: {m}")),
            CliError::Validation(m) => CliError::Validation(format!("{what}: {m}")),
            CliError::ResourceCap(m) => CliError::ResourceCap(format!("{what}: {m}")),
            CliError::Runtime(m) => CliError::Runtime(format!("{what}: {m}")),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Validation(m) => write!(f, "validation failed: {m}"),
            CliError::ResourceCap(m) => write!(f, "resource cap: {m}"),
            CliError::Runtime(m) => write!(f, "{m}"),
        }
    }
}

impl From<meta_bamdp::Error> for CliError {
    fn from(e: meta_bamdp::Error) -> Self {
        use meta_bamdp::Error as E;
        match e {
            E::ResourceCap { .. } => CliError::ResourceCap(e.to_string()),
            E::InvalidArgument(_) | E::Parse(_) | E::GridTooSmall(_) => CliError::Config(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(format!("io error: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Runtime(format!("json error: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;
