use photonic_hpc::algos::AlgoError;
use photonic_hpc::client::ClientError;
use photonic_hpc::scheduler::client::SchedClientError;

/// Each variant maps to a stable process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("startup failed: {0}")]
    Startup(String),
    #[error("{0}")]
    Failed(String),
    #[error("unsatisfiable request: {0}")]
    Unsatisfiable(String),
    #[error("acceptance check missed: {0}")]
    AcceptanceMiss(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Startup(_) => 2,
            CliError::Failed(_) => 3,
            CliError::Unsatisfiable(_) => 4,
            CliError::AcceptanceMiss(_) => 5,
        }
    }
}

impl From<SchedClientError> for CliError {
    fn from(e: SchedClientError) -> Self {
        match &e {
            SchedClientError::Rejected { code, message } if code == "UNSATISFIABLE" => CliError::Unsatisfiable(message.clone()),
            SchedClientError::Rejected { code, .. } if code == "BAD_WORKLOAD" || code == "EMPTY_REQUEST" => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Failed(e.to_string()),
        }
    }
}

impl From<ClientError> for CliError {
    fn from(e: ClientError) -> Self {
        CliError::Failed(e.to_string())
    }
}

impl From<AlgoError> for CliError {
    fn from(e: AlgoError) -> Self {
        match e {
            AlgoError::Structure(_) | AlgoError::Dataset(_) => CliError::Config(e.to_string()),
            other => CliError::Failed(other.to_string()),
        }
    }
}
