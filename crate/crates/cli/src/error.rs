use thiserror::Error;

/// Failures surfaced to the shell, each with its exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Numeric(String),
    #[error("{0}")]
    Assumption(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Assumption(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Numeric(_) => "numerical",
            CliError::Assumption(_) => "assumption",
        }
    }
}

impl From<hopf_dbc::Error> for CliError {
    fn from(e: hopf_dbc::Error) -> Self {
        match e {
            hopf_dbc::Error::NoHopf(_) => CliError::Assumption(e.to_string()),
            hopf_dbc::Error::InvalidArgument(_) => CliError::Config(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(format!("i/o: {e}"))
    }
}
