use thiserror::Error;

/// Failure classes of a run, each with its own process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("solver failure: {0}")]
    Solver(#[from] warpstab_core::Error),
    #[error("strict mode: {0} check(s) failed: {1}")]
    Strict(usize, String),
    #[error("report mismatch: {0}")]
    Schema(String),
    #[error("{0} field(s) differ beyond tolerance")]
    Differences(usize),
    #[error(transparent)]
    Io(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) | CliError::Schema(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Strict(..) => 4,
            CliError::Differences(_) | CliError::Io(_) => 1,
        }
    }
}
