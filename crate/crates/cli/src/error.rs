use rayleigh_core::Error;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(std::io::Error),
    Core(Error),
    /// Invariant violations found by `validate`.
    Invariant(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 1,
            CliError::Invariant(_) => 3,
            CliError::Core(e) => match e {
                Error::InvalidRange(_) | Error::InvalidProfile(_) | Error::ShapeMismatch { .. } | Error::Output(_) => 1,
                Error::ImagNotPositive { .. } | Error::WindingMismatch { .. } => 3,
                _ => 2,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Io(e) => write!(f, "io: {e}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Invariant(m) => write!(f, "invariant violated: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}
