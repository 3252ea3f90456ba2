use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("report is missing field `{field}`")]
    Schema { field: String },

    #[error("every benchmark cell failed; first error: {first}")]
    AllCellsFailed { first: String },

    #[error(transparent)]
    Core(#[from] ccbr_core::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = BenchError> = std::result::Result<T, E>;

impl BenchError {
    /// Process exit code: 2 for configuration problems, 3 when no cell
    /// produced a result, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        use ccbr_core::Error as E;
        match self {
            BenchError::Config(_) | BenchError::Json(_) | BenchError::Schema { .. } => 2,
            BenchError::Core(E::Config(_) | E::Load { .. } | E::Parse { .. } | E::Validation(_)) => 2,
            BenchError::AllCellsFailed { .. } => 3,
            _ => 1,
        }
    }
}
