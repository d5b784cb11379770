use thiserror::Error;

/// Failure of a CLI stage; the variant decides the exit status.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("estimation error: {0}")]
    Estimation(String),
    #[error("I/O error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Estimation(_) => 2,
            Self::Config(_) | Self::Io(_) => 1,
        }
    }
}

/// Wraps a core error with the name of the stage that produced it.
pub fn at_stage(stage: impl std::fmt::Display) -> impl FnOnce(aeromag_core::Error) -> CliError {
    move |e| {
        use aeromag_core::Error as E;
        let msg = format!("{stage}: {e}");
        match e {
            E::Estimation { .. } => CliError::Estimation(msg),
            E::Io(_) | E::Csv(_) => CliError::Io(msg),
            _ => CliError::Config(msg),
        }
    }
}

pub fn io_at(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

pub type CliResult<T> = Result<T, CliError>;
