use thiserror::Error;

/// Failures of a CLI run; each maps to an exit status.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error("usage: {0}")]
    Usage(String),

    #[error(transparent)]
    Sim(#[from] rtcdrift::Error),

    #[error("output: {0}")]
    Io(#[from] std::io::Error),

    #[error("output: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// 2 validation, 3 infeasible or freeze, 4 numeric failure, 1 I/O.
    pub fn exit_code(&self) -> i32 {
        use rtcdrift::Error as E;
        match self {
            CliError::Config(_) | CliError::Usage(_) => 2,
            CliError::Io(_) | CliError::Csv(_) => 1,
            CliError::Sim(e) => match e {
                E::InvalidInput(_) | E::FrequencyMismatch { .. } | E::Parse { .. } | E::Format(_) => 2,
                E::Infeasible(_) | E::FreezeRisk { .. } | E::DeflationStall { .. } => 3,
                E::NoRoot { .. }
                | E::InconsistentMode { .. }
                | E::NotYetArrived { .. }
                | E::CalibrationFailed { .. }
                | E::Degenerate(_) => 4,
            },
        }
    }
}
