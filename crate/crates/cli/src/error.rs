use std::process::ExitCode;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("output error: {0}")]
    Output(String),
    #[error("solver error: {0}")]
    Solver(String),
    #[error("{0} ladder point(s) failed")]
    PartialStudy(usize),
    #[error("{0} check(s) failed")]
    FailedChecks(usize),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            // Output problems are a bad `output`/`--out` setting.
            CliError::Config(_) | CliError::Output(_) => 2,
            CliError::Solver(_) => 3,
            CliError::PartialStudy(_) => 4,
            CliError::FailedChecks(_) => 5,
        })
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Output(e.to_string())
    }
}
