use thiserror::Error;

pub type Result<T, E = SimError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("demand error: job {job} requests {gpus} GPUs, at most {max} available")]
    Demand { job: u64, gpus: u32, max: u32 },
    #[error("placement error on server {server}: {detail}")]
    Placement { server: usize, detail: String },
    #[error("opt placement infeasible: {0}")]
    Infeasible(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("trace error at line {line}: {msg}")]
    Trace { line: usize, msg: String },
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("mismatched inputs: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
