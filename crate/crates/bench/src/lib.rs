//! Experiment driver for selective learning: sweeps, built-in check suites,
//! CSV and JSON output.

pub mod checks;
pub mod config;
pub mod output;
pub mod sweep;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] selective_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl BenchError {
    /// 2 for rejected configurations, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) => 2,
            BenchError::Core(selective_core::Error::Argument(_))
            | BenchError::Core(selective_core::Error::Precondition { .. })
            | BenchError::Core(selective_core::Error::Resource { .. })
            | BenchError::Core(selective_core::Error::Parse { .. }) => 2,
            _ => 1,
        }
    }
}
