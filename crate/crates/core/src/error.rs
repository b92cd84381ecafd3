use crate::catalog::CatalogError;
use crate::config::ConfigError;
use crate::ingest::IngestError;
use crate::stamper::StampError;
use crate::tabular::PlotError;

/// Any engine failure, with a stable machine-readable code.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Plot(#[from] PlotError),
    #[error(transparent)]
    Stamp(#[from] StampError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("bad request: {0}")]
    BadRequest(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn code(&self) -> &'static str {
        fn catalog(e: &CatalogError) -> &'static str {
            match e {
                CatalogError::UnknownSample { .. } => "unknown_sample",
                CatalogError::DuplicateKey(_) => "duplicate_key",
                CatalogError::NotFound(_) => "not_found",
                CatalogError::InvalidRange => "invalid_range",
                CatalogError::InvalidSampleName(_) => "invalid_sample_name",
                CatalogError::InvalidRule(_) => "invalid_rule",
                CatalogError::InvalidLink(_) => "invalid_link",
                CatalogError::MissingTimestamp(_) => "missing_timestamp",
                CatalogError::SchemaVersion { .. } => "schema_version",
                CatalogError::Store(_) | CatalogError::Corrupt(_) => "store_error",
            }
        }
        match self {
            Error::Catalog(e) => catalog(e),
            Error::Ingest(IngestError::Catalog(e)) => catalog(e),
            Error::Ingest(IngestError::RootUnreadable { .. }) => "root_unreadable",
            Error::Ingest(IngestError::Busy) => "busy",
            Error::Ingest(IngestError::NoReports) => "no_reports",
            Error::Ingest(IngestError::InvalidPolicy(_)) => "bad_request",
            Error::Plot(PlotError::Catalog(e)) => catalog(e),
            Error::Plot(PlotError::NotTabular { .. }) => "not_tabular",
            Error::Plot(PlotError::Table { .. }) => "table_error",
            Error::Stamp(StampError::Catalog(e)) => catalog(e),
            Error::Stamp(StampError::NothingToStamp) => "nothing_to_stamp",
            Error::Stamp(StampError::Busy) => "busy",
            Error::Stamp(StampError::BackendUnavailable { .. }) => "backend_unavailable",
            Error::Stamp(StampError::BackendRejected(_)) => "backend_rejected",
            Error::Stamp(StampError::InvalidProof(_)) => "invalid_proof",
            Error::Stamp(StampError::UnknownDigest(_)) => "not_found",
            Error::Stamp(StampError::ReadFailure { .. }) => "read_failure",
            Error::Config(_) => "config_error",
            Error::BadRequest(_) => "bad_request",
        }
    }

    /// HTTP status for this error.
    pub fn status(&self) -> u16 {
        match self.code() {
            "not_found" | "no_reports" => 404,
            "duplicate_key" | "busy" | "nothing_to_stamp" => 409,
            "unknown_sample" | "invalid_sample_name" | "invalid_rule" | "invalid_link" | "not_tabular"
            | "table_error" | "missing_timestamp" | "invalid_proof" => 422,
            "invalid_range" | "bad_request" => 400,
            "backend_unavailable" | "backend_rejected" => 503,
            _ => 500,
        }
    }
}
