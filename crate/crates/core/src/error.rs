use thiserror::Error;

/// Errors produced by the model, instance, consensus and solver layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("block index {index} out of range for {count} blocks")]
    BlockIndex { index: usize, count: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("degenerate problem: {0}")]
    Degenerate(String),

    #[error("dense expansion refused: {entries} entries exceeds the cap of {cap}")]
    DenseCap { entries: usize, cap: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("corrupt instance file: {0}")]
    Corrupt(String),

    #[error("unsupported instance format version {found} (this build reads version {supported})")]
    Version { found: u32, supported: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
