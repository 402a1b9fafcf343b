use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("split threshold lies outside the node region (covariate {covariate})")]
    ThresholdOutsideRegion { covariate: usize },
    #[error("dataset too small: n = {n} must exceed subsample size k_n = {k_n}")]
    DatasetTooSmall { n: usize, k_n: usize },
    #[error("point does not conform to the schema: {0}")]
    SchemaViolation(String),
    #[error("no original training row lies inside the node region")]
    EmptyNodeSupport,
    #[error("more than {limit} consecutive rejections while sampling a degenerate region")]
    RejectionOverflow { limit: usize },
    #[error("variance estimate {0} is below -1e-9")]
    NegativeVariance(f64),
    #[error("p-value {0} outside (0, 1)")]
    InvalidP(f64),
    #[error("no candidate splits supplied")]
    NoCandidates,
    #[error("every covariate is constant on the node region")]
    NoValidSplit,
    #[error("centered covariance is numerically zero while the centered mean is not")]
    SingularCovariance,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("schema parse error: {0}")]
    SchemaParse(String),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable class name, reported by the CLI on failure.
    pub fn class(&self) -> &'static str {
        match self {
            Error::ThresholdOutsideRegion { .. } => "threshold_outside_region",
            Error::DatasetTooSmall { .. } => "dataset_too_small",
            Error::SchemaViolation(_) => "schema_violation",
            Error::EmptyNodeSupport => "empty_node_support",
            Error::RejectionOverflow { .. } => "rejection_overflow",
            Error::NegativeVariance(_) => "negative_variance",
            Error::InvalidP(_) => "invalid_p",
            Error::NoCandidates => "no_candidates",
            Error::NoValidSplit => "no_valid_split",
            Error::SingularCovariance => "singular_covariance",
            Error::InvalidConfig(_) => "invalid_config",
            Error::SchemaParse(_) => "schema_parse",
            Error::Csv(_) => "csv",
            Error::Io(_) => "io",
            Error::Serde(_) => "serde",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
