//! The operations behind the HTTP API and the command line.
//!
//! [`Engine`] owns the catalog and enforces the exclusivity rules: one ingest
//! run and one stamping run at a time. Every method returns plain data that
//! the API serializes unchanged.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::catalog::{
    now_local, Catalog, CatalogEntry, EntryFilter, EntryKind, HistoryItem, Link, LinkOrigin, LinkType, Note,
    PathRule, PathRuleSet, RecordId, Sample, TimeRange,
};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::ingest::{self, IngestError, IngestReport, RecencyPolicy};
use crate::linker;
use crate::stamper::{self, AnchorBackend, Digest, HttpBackend, MockBackend, StampBatch, StampProof, Stamper};
use crate::tabular::{plot_payload, PlotPayload};

/// Options of one ingest run. Absent fields fall back to the configuration
/// and the wall clock.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestOptions {
    pub now: Option<NaiveDateTime>,
    pub no_recency: bool,
    pub root: Option<PathBuf>,
}

/// Entry filter as given on a query string or command line.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EntryQuery {
    pub sample: Option<String>,
    pub device: Option<String>,
    pub kind: Option<EntryKind>,
    pub from: Option<NaiveDateTime>,
    pub to: Option<NaiveDateTime>,
    pub q: Option<String>,
    pub extra_key: Option<String>,
    pub extra_value: Option<String>,
}

fn far_past() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(1, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap()
}

fn far_future() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(9999, 12, 31).unwrap().and_hms_opt(23, 59, 59).unwrap()
}

impl EntryQuery {
    pub fn to_filter(&self) -> Result<EntryFilter> {
        let time_range = match (self.from, self.to) {
            (None, None) => None,
            (start, end) => {
                Some(TimeRange { start: start.unwrap_or_else(far_past), end: end.unwrap_or_else(far_future) })
            }
        };
        let extra_key_value = match (&self.extra_key, &self.extra_value) {
            (None, None) => None,
            (Some(k), Some(v)) => Some((k.clone(), v.clone())),
            _ => return Err(Error::BadRequest("extra_key and extra_value must be given together".into())),
        };
        Ok(EntryFilter {
            sample: self.sample.clone(),
            device: self.device.clone(),
            kind: self.kind,
            time_range,
            text: self.q.clone().filter(|q| !q.is_empty()),
            extra_key_value,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewSample {
    pub name: String,
    #[serde(default)]
    pub kind: String,
    #[serde(default)]
    pub properties: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewLink {
    pub from_id: RecordId,
    pub to_id: RecordId,
    pub link_type: LinkType,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewNote {
    pub sample_name: String,
    /// Defaults to the current time.
    #[serde(default)]
    pub written_at: Option<NaiveDateTime>,
    pub body: String,
}

/// A note together with the links created for it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoteCreated {
    pub note: Note,
    pub links: Vec<Link>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Deleted {
    pub id: RecordId,
    pub deleted: bool,
}

/// Inclusion proof for a digest plus the batch it belongs to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StampRecord {
    pub proof: StampProof,
    pub batch: StampBatch,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub schema_version: i64,
}

pub struct Engine {
    config: Config,
    catalog: Catalog,
    pub(crate) ingest_lock: Mutex<()>,
    stamper: Stamper,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine").field("config", &self.config).finish_non_exhaustive()
    }
}

impl Engine {
    /// Opens the store named in the config, creating it if needed. The HTTP
    /// anchoring backend is used when `stamp.url` is set, the mock otherwise.
    pub fn open(config: Config) -> Result<Self> {
        if let Some(dir) = config.store_path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::BadRequest(format!("{}: {e}", dir.display())))?;
        }
        let catalog = Catalog::open(&config.store_path)?;
        let backend: Arc<dyn AnchorBackend> = match &config.stamp.url {
            Some(url) => Arc::new(HttpBackend::new(url.clone(), config.stamp.key.clone())),
            None => Arc::new(MockBackend::new()),
        };
        Ok(Self::with_parts(config, catalog, backend))
    }

    pub fn with_parts(config: Config, catalog: Catalog, backend: Arc<dyn AnchorBackend>) -> Self {
        let stamper = Stamper::new(backend, config.stamp.retry);
        Engine { config, catalog, ingest_lock: Mutex::new(()), stamper }
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn health(&self) -> Health {
        Health { status: "ok".into(), schema_version: crate::catalog::SCHEMA_VERSION }
    }

    pub fn samples(&self) -> Result<Vec<Sample>> {
        Ok(self.catalog.read(|r| r.list_samples())?)
    }

    pub fn register_sample(&self, new: NewSample) -> Result<Sample> {
        Ok(self.catalog.register_sample(&new.name, &new.kind, new.properties)?)
    }

    pub fn rules(&self) -> Result<PathRuleSet> {
        Ok(self.catalog.read(|r| r.rules())?)
    }

    pub fn register_rule(&self, rule: PathRule) -> Result<PathRuleSet> {
        Ok(self.catalog.register_path_rule(rule)?)
    }

    pub fn query(&self, query: &EntryQuery) -> Result<Vec<CatalogEntry>> {
        let filter = query.to_filter()?;
        Ok(self.catalog.query_entries(&filter)?)
    }

    pub fn entry(&self, id: RecordId) -> Result<CatalogEntry> {
        Ok(self.catalog.get_entry(id)?)
    }

    pub fn delete_entry(&self, id: RecordId) -> Result<Deleted> {
        Ok(Deleted { id, deleted: self.catalog.delete_entry(id)? })
    }

    pub fn plot(&self, id: RecordId) -> Result<PlotPayload> {
        Ok(self.catalog.read(|r| plot_payload(r, &self.config.data_root, id, &self.config.tabular))?)
    }

    /// All links touching an entry.
    pub fn links(&self, id: RecordId) -> Result<Vec<Link>> {
        Ok(self.catalog.read(|r| {
            r.get_entry(id)?;
            r.links_of(id)
        })?)
    }

    /// Creates a manual link.
    pub fn add_link(&self, new: NewLink) -> Result<Link> {
        Ok(self.catalog.add_link(new.from_id, new.to_id, new.link_type, LinkOrigin::Manual)?)
    }

    /// Stores a note and links it to the entries of its sample recorded
    /// within the note window.
    pub fn add_note(&self, new: NewNote) -> Result<NoteCreated> {
        let written_at = new.written_at.unwrap_or_else(now_local);
        let window = self.config.link.note_window();
        Ok(self.catalog.write(|w| {
            let note = w.add_note(&new.sample_name, written_at, &new.body)?;
            let links = linker::auto_link_note(w, &note, window)?;
            Ok::<_, crate::catalog::CatalogError>(NoteCreated { note, links })
        })?)
    }

    pub fn history(&self, sample: &str) -> Result<Vec<HistoryItem>> {
        Ok(self.catalog.read(|r| {
            if r.get_sample(sample)?.is_none() {
                return Err(crate::catalog::CatalogError::NotFound(format!("sample {sample}")));
            }
            linker::sample_history(r, sample)
        })?)
    }

    /// Runs "Generate entries". Fails with `Busy` while another run is active.
    pub fn ingest(&self, options: &IngestOptions) -> Result<IngestReport> {
        let _guard = self.ingest_lock.try_lock().map_err(|_| IngestError::Busy)?;
        let mut settings = self.config.ingest_settings();
        if options.no_recency {
            settings.policy = RecencyPolicy { enabled: false, ..settings.policy };
        }
        let root = options.root.clone().unwrap_or_else(|| self.config.data_root.clone());
        let now = options.now.unwrap_or_else(now_local);
        Ok(ingest::generate_entries(&self.catalog, &root, &settings, now)?)
    }

    pub fn latest_report(&self) -> Result<IngestReport> {
        Ok(ingest::latest_report(&self.catalog)?)
    }

    /// Runs the daily stamping batch.
    pub fn stamp_run(&self, now: Option<NaiveDateTime>) -> Result<StampBatch> {
        let now = now.unwrap_or_else(now_local);
        Ok(self.stamper.run_daily(&self.catalog, &self.config.data_root, now)?)
    }

    pub fn stamp_proof(&self, digest_hex: &str) -> Result<StampRecord> {
        let digest = Digest::from_hex(digest_hex).map_err(|e| Error::BadRequest(e.to_string()))?;
        let (proof, batch) = stamper::proof_for(&self.catalog, &digest)?;
        Ok(StampRecord { proof, batch })
    }
}
