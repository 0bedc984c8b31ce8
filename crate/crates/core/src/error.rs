use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("voltage {value} V outside [0, {vdd}] V")]
    OutOfRange { value: f64, vdd: f64 },

    #[error("unknown chip `{0}`")]
    UnknownChip(String),

    #[error("need at least {needed} chips, dataset has {found}")]
    InsufficientChips { needed: usize, found: usize },

    #[error("dataset spans {0} chips, a single-chip dataset is required")]
    MultiChipDataset(usize),

    #[error("feature width {found} does not match encoding width {expected}")]
    EncodingMismatch { expected: usize, found: usize },

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
