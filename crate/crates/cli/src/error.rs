use objreid_core::curation::CurationError;
use objreid_core::formats::FormatError;
use objreid_core::geometry::GeometryError;
use objreid_core::metric::MetricError;
use objreid_core::patchgen::PatchError;
use objreid_core::retrieval::RetrievalError;
use objreid_core::synthgen::SynthError;
use thiserror::Error;

/// Command failure, classified by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags or configuration (exit 1).
    #[error("{0}")]
    Usage(String),
    /// Unreadable or inconsistent inputs (exit 2).
    #[error("{0}")]
    Data(String),
    /// Divergence or non-finite values (exit 3).
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<CurationError> for CliError {
    fn from(e: CurationError) -> Self {
        match e {
            CurationError::InvalidParams(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<PatchError> for CliError {
    fn from(e: PatchError) -> Self {
        match e {
            PatchError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<MetricError> for CliError {
    fn from(e: MetricError) -> Self {
        match e {
            MetricError::Config(_) => CliError::Usage(e.to_string()),
            MetricError::Numerical(_) => CliError::Numerical(e.to_string()),
            MetricError::Shape(_) | MetricError::EmptySet(_) => CliError::Data(e.to_string()),
        }
    }
}

impl From<RetrievalError> for CliError {
    fn from(e: RetrievalError) -> Self {
        match e {
            RetrievalError::Config(_) => CliError::Usage(e.to_string()),
            RetrievalError::ZeroVector => CliError::Numerical(e.to_string()),
            RetrievalError::DimMismatch(..) => CliError::Data(e.to_string()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        CliError::Usage(e.to_string())
    }
}
