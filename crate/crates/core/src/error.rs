use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown pathology label `{0}`")]
    UnknownLabel(String),

    #[error("\"No Finding\" cannot be combined with `{0}`")]
    Exclusivity(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("manifest row {row}: {message}")]
    Manifest { row: usize, message: String },

    #[error("ids missing from ground truth: {}", .0.join(", "))]
    MissingIds(Vec<String>),

    #[error("non-finite loss at step {step}: terms {terms}, grad norms {grad_norms}")]
    NonFiniteLoss {
        step: u64,
        terms: String,
        grad_norms: String,
    },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),

    #[error(transparent)]
    TomlSer(#[from] toml::ser::Error),
}

impl Error {
    /// Usage and configuration problems, as opposed to runtime failures.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::UnknownLabel(_) | Error::TomlDe(_)
        )
    }
}
