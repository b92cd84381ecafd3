//! Trusted-timestamping client.
//!
//! Data files are hashed, the day's digests are combined into one Merkle
//! root, and only that root is handed to an anchoring backend. A proof for a
//! single file later shows that its digest was part of an anchored root.
//!
//! Batches are written to the store as pending before submission and stay
//! pending until the backend returns a receipt, so nothing is lost when the
//! backend is down or the process restarts.

mod backend;
mod merkle;

use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use chrono::{NaiveDate, NaiveDateTime};
use rusqlite::{params, OptionalExtension};
use serde::{Deserialize, Serialize};

pub use backend::{AnchorBackend, BackendError, HttpBackend, MockBackend, MockSubmission};
pub use merkle::{
    build_batch, canonical_leaves, hash_file, hash_pair, merkle_root, prove, verify, verify_json, Digest, ProofStep,
    Side, StampBatch, StampFormatError, StampProof, MAX_PROOF_DEPTH,
};

use crate::catalog::{fmt_ts, parse_ts, Catalog, CatalogError, Reader, RecordId};

#[derive(Debug, thiserror::Error)]
pub enum StampError {
    #[error("nothing to stamp: no entries since the last batch")]
    NothingToStamp,
    #[error("a stamping run is already in progress")]
    Busy,
    #[error("backend unavailable after {attempts} attempts: {last}; batch kept pending")]
    BackendUnavailable { attempts: u32, last: String },
    #[error("backend rejected batch: {0}")]
    BackendRejected(String),
    #[error("invalid proof: {0}")]
    InvalidProof(#[from] StampFormatError),
    #[error("digest {0} is not part of any batch")]
    UnknownDigest(String),
    #[error("cannot read {path}: {source}")]
    ReadFailure { path: String, source: std::io::Error },
    #[error(transparent)]
    Catalog(#[from] CatalogError),
}

impl From<rusqlite::Error> for StampError {
    fn from(e: rusqlite::Error) -> Self {
        StampError::Catalog(e.into())
    }
}

/// Exponential backoff for submissions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial_delay_ms: u64,
    pub factor: u32,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_attempts: 4, initial_delay_ms: 500, factor: 2 }
    }
}

impl RetryPolicy {
    /// Delay before retry number `attempt` (1-based).
    pub fn delay(&self, attempt: u32) -> Duration {
        let factor = u64::from(self.factor).saturating_pow(attempt.saturating_sub(1));
        Duration::from_millis(self.initial_delay_ms.saturating_mul(factor))
    }
}

/// Hashes a file on disk.
pub fn hash_path(path: &Path) -> Result<Digest, StampError> {
    let read_failure = |source| StampError::ReadFailure { path: path.display().to_string(), source };
    let file = std::fs::File::open(path).map_err(read_failure)?;
    hash_file(std::io::BufReader::new(file)).map_err(read_failure)
}

struct StoredBatch {
    id: i64,
    batch: StampBatch,
}

fn load_batch(r: &Reader<'_>, id: i64) -> Result<StoredBatch, StampError> {
    let (date, leaves, root, submitted, receipt): (String, String, String, Option<String>, Option<String>) =
        r.conn().query_row(
            "SELECT batch_date, leaves, root, submitted_at, receipt FROM stamp_batches WHERE id = ?1",
            [id],
            |row| Ok((row.get(0)?, row.get(1)?, row.get(2)?, row.get(3)?, row.get(4)?)),
        )?;
    let corrupt = |what: &str| CatalogError::Corrupt(format!("stamp batch {id}: {what}"));
    let batch = StampBatch {
        batch_date: NaiveDate::parse_from_str(&date, "%Y-%m-%d").map_err(|_| corrupt("date"))?,
        leaves: serde_json::from_str(&leaves).map_err(|_| corrupt("leaves"))?,
        root: Digest::from_hex(&root).map_err(|_| corrupt("root"))?,
        submitted_at: submitted.as_deref().map(parse_ts).transpose()?,
        backend_receipt: receipt,
    };
    Ok(StoredBatch { id, batch })
}

fn pending_batches(r: &Reader<'_>) -> Result<Vec<StoredBatch>, StampError> {
    let mut stmt = r.conn().prepare("SELECT id FROM stamp_batches WHERE receipt IS NULL ORDER BY id")?;
    let ids: Vec<i64> = stmt.query_map([], |row| row.get(0))?.collect::<rusqlite::Result<_>>()?;
    ids.into_iter().map(|id| load_batch(r, id)).collect()
}

fn unstamped_entries(r: &Reader<'_>) -> Result<Vec<(RecordId, String)>, StampError> {
    let mut stmt = r.conn().prepare("SELECT id, file_path FROM entries WHERE stamp_batch IS NULL ORDER BY id")?;
    let rows = stmt.query_map([], |row| Ok((row.get(0)?, row.get(1)?)))?;
    Ok(rows.collect::<rusqlite::Result<_>>()?)
}

/// Proof that `digest` is in a stored batch (the earliest one containing it).
pub fn proof_for(catalog: &Catalog, digest: &Digest) -> Result<(StampProof, StampBatch), StampError> {
    catalog.read(|r| {
        let id: Option<i64> = r
            .conn()
            .query_row(
                "SELECT batch_id FROM stamp_leaves WHERE digest = ?1 ORDER BY batch_id LIMIT 1",
                [digest.to_hex()],
                |row| row.get(0),
            )
            .optional()?;
        let id = id.ok_or_else(|| StampError::UnknownDigest(digest.to_hex()))?;
        let stored = load_batch(r, id)?;
        let proof = prove(digest, &stored.batch).ok_or_else(|| StampError::UnknownDigest(digest.to_hex()))?;
        Ok((proof, stored.batch))
    })
}

/// All stored batches, oldest first.
pub fn list_batches(catalog: &Catalog) -> Result<Vec<StampBatch>, StampError> {
    catalog.read(|r| {
        let mut stmt = r.conn().prepare("SELECT id FROM stamp_batches ORDER BY id")?;
        let ids: Vec<i64> = stmt.query_map([], |row| row.get(0))?.collect::<rusqlite::Result<_>>()?;
        ids.into_iter().map(|id| Ok(load_batch(r, id)?.batch)).collect()
    })
}

pub struct Stamper {
    backend: Arc<dyn AnchorBackend>,
    retry: RetryPolicy,
    running: Mutex<()>,
}

impl Stamper {
    pub fn new(backend: Arc<dyn AnchorBackend>, retry: RetryPolicy) -> Self {
        Stamper { backend, retry, running: Mutex::new(()) }
    }

    /// Submits a batch, retrying transient failures with backoff. On success
    /// the receipt and submission time are filled in.
    pub fn submit_batch(&self, batch: &mut StampBatch, now: NaiveDateTime) -> Result<(), StampError> {
        let root_hex = batch.root.to_hex();
        let mut attempt = 1;
        loop {
            match self.backend.submit(&root_hex, batch.batch_date) {
                Ok(receipt) => {
                    batch.backend_receipt = Some(receipt);
                    batch.submitted_at = Some(now);
                    return Ok(());
                }
                Err(BackendError::Rejected(msg)) => return Err(StampError::BackendRejected(msg)),
                Err(BackendError::Unavailable(msg)) if attempt >= self.retry.max_attempts => {
                    return Err(StampError::BackendUnavailable { attempts: attempt, last: msg });
                }
                Err(BackendError::Unavailable(msg)) => {
                    tracing::warn!(attempt, %msg, "stamp submission failed, retrying");
                    std::thread::sleep(self.retry.delay(attempt));
                    attempt += 1;
                }
            }
        }
    }

    fn submit_stored(&self, catalog: &Catalog, stored: &mut StoredBatch, now: NaiveDateTime) -> Result<(), StampError> {
        self.submit_batch(&mut stored.batch, now)?;
        catalog.write(|w| {
            w.conn().execute(
                "UPDATE stamp_batches SET submitted_at = ?1, receipt = ?2 WHERE id = ?3",
                params![stored.batch.submitted_at.map(fmt_ts), stored.batch.backend_receipt, stored.id],
            )?;
            Ok::<_, StampError>(())
        })
    }

    /// Daily run: resubmits pending batches, then batches every entry not yet
    /// stamped. Returns the new batch, or the last resubmitted one when there
    /// were no new entries.
    pub fn run_daily(&self, catalog: &Catalog, data_root: &Path, now: NaiveDateTime) -> Result<StampBatch, StampError> {
        let _guard = self.running.try_lock().map_err(|_| StampError::Busy)?;

        let mut pending = catalog.read(|r| pending_batches(r))?;
        let candidates = catalog.read(|r| unstamped_entries(r))?;

        let mut hashed: Vec<(RecordId, Digest)> = Vec::new();
        for (id, path) in candidates {
            match hash_path(&data_root.join(&path)) {
                Ok(d) => hashed.push((id, d)),
                Err(e) => tracing::warn!(entry = id, error = %e, "skipping unreadable file"),
            }
        }

        if let Some(batch) = build_batch(hashed.iter().map(|(_, d)| *d), now.date()) {
            let id = catalog.write(|w| {
                let conn = w.conn();
                conn.execute(
                    "INSERT INTO stamp_batches (batch_date, leaves, root) VALUES (?1, ?2, ?3)",
                    params![
                        batch.batch_date.format("%Y-%m-%d").to_string(),
                        serde_json::to_string(&batch.leaves).expect("digests serialize"),
                        batch.root.to_hex()
                    ],
                )?;
                let id = conn.last_insert_rowid();
                for leaf in &batch.leaves {
                    conn.execute(
                        "INSERT OR IGNORE INTO stamp_leaves (digest, batch_id) VALUES (?1, ?2)",
                        params![leaf.to_hex(), id],
                    )?;
                }
                for (entry, _) in &hashed {
                    conn.execute("UPDATE entries SET stamp_batch = ?1 WHERE id = ?2", params![id, entry])?;
                }
                Ok::<_, StampError>(id)
            })?;
            pending.push(StoredBatch { id, batch });
        }

        if pending.is_empty() {
            return Err(StampError::NothingToStamp);
        }
        for stored in pending.iter_mut() {
            self.submit_stored(catalog, stored, now)?;
        }
        Ok(pending.pop().expect("non-empty").batch)
    }
}
