//! Scanning the data tree and generating catalog entries.
//!
//! Every regular file below a registered rule directory is classified exactly
//! once, either as a candidate or as a skip with a reason. Candidates are
//! processed in path order so that a given tree always yields the same ids.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDateTime};
use rusqlite::params;
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use crate::catalog::{now_local, Catalog, CatalogError, PathRule, PathRuleSet, RecordId, Writer};
use crate::convention::{fallback_time, file_mtime, parse_path, ParsedFileMeta, PathGrammar, TreeKind};
use crate::linker::{link_new_entry, LinkWindows};

/// Reports kept in the store; older ones are dropped.
pub const REPORT_HISTORY: i64 = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecencyPolicy {
    pub max_age_s: i64,
    pub enabled: bool,
}

impl Default for RecencyPolicy {
    fn default() -> Self {
        RecencyPolicy { max_age_s: 5 * 24 * 3600, enabled: true }
    }
}

impl RecencyPolicy {
    pub fn new(max_age: Duration, enabled: bool) -> Result<Self, IngestError> {
        if max_age <= Duration::zero() {
            return Err(IngestError::InvalidPolicy("max_age must be positive".into()));
        }
        Ok(RecencyPolicy { max_age_s: max_age.num_seconds(), enabled })
    }

    /// `true` if a file observed at `observed_at` is too old at `now`.
    /// A file exactly `max_age` old is still accepted.
    pub fn is_too_old(&self, observed_at: NaiveDateTime, now: NaiveDateTime) -> bool {
        self.enabled && observed_at < now - Duration::seconds(self.max_age_s)
    }
}

/// Root markers of the main and sub trees.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeRoots {
    pub main_root: String,
    pub sub_root: String,
}

impl Default for TreeRoots {
    fn default() -> Self {
        TreeRoots { main_root: "01_Main_Exp".into(), sub_root: "02_Sub_Exp".into() }
    }
}

impl TreeRoots {
    pub fn grammar(&self, kind: TreeKind) -> PathGrammar {
        match kind {
            TreeKind::Main => PathGrammar::new(&self.main_root, kind),
            TreeKind::Sub => PathGrammar::new(&self.sub_root, kind),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    TooOld,
    BadExtension,
    ParseFailure,
    UnknownSample,
    UnmatchedRule,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skipped {
    pub path: String,
    pub reason: SkipReason,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub started_at: NaiveDateTime,
    pub now_reference: NaiveDateTime,
    pub scanned: usize,
    pub created: usize,
    pub duplicates: usize,
    pub skipped: Vec<Skipped>,
    pub links_created: usize,
    pub entries: Vec<RecordId>,
}

/// A file that passed every path-level check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub path: String,
    pub rule: PathRule,
    /// Parsed metadata with `observed_at` always filled in.
    pub meta: ParsedFileMeta,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScanOutcome {
    pub candidates: Vec<Candidate>,
    pub skipped: Vec<Skipped>,
}

impl ScanOutcome {
    pub fn scanned(&self) -> usize {
        self.candidates.len() + self.skipped.len()
    }
}

/// Everything a run needs besides the catalog.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestSettings {
    pub roots: TreeRoots,
    pub policy: RecencyPolicy,
    pub windows: LinkWindows,
    /// Default `extra` values per device code.
    pub profiles: HashMap<String, BTreeMap<String, String>>,
}

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("data root {path} is not readable: {source}")]
    RootUnreadable { path: PathBuf, source: std::io::Error },
    #[error("an ingest run is already in progress")]
    Busy,
    #[error("no ingest report has been recorded yet")]
    NoReports,
    #[error("invalid recency policy: {0}")]
    InvalidPolicy(String),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
}

impl From<rusqlite::Error> for IngestError {
    fn from(e: rusqlite::Error) -> Self {
        IngestError::Catalog(e.into())
    }
}

fn extension_of(path: &str) -> String {
    let name = path.rsplit('/').next().unwrap_or(path);
    match name.rfind('.') {
        Some(dot) => name[dot + 1..].to_ascii_lowercase(),
        None => String::new(),
    }
}

fn classify(
    root: &Path,
    rel: &str,
    rule: &PathRule,
    roots: &TreeRoots,
    policy: &RecencyPolicy,
    now: NaiveDateTime,
) -> Result<ParsedFileMeta, SkipReason> {
    if !rule.allows(&extension_of(rel)) {
        return Err(SkipReason::BadExtension);
    }
    let mut meta = parse_path(rel, &roots.grammar(rule.tree_kind)).map_err(|_| SkipReason::ParseFailure)?;
    if meta.device_code != rule.device_code {
        return Err(SkipReason::UnmatchedRule);
    }
    let observed_at = match meta.observed_at {
        Some(t) => t,
        None => fallback_time(file_mtime(&root.join(rel)), meta.date).map_err(|_| SkipReason::ParseFailure)?,
    };
    if policy.is_too_old(observed_at, now) {
        return Err(SkipReason::TooOld);
    }
    meta.observed_at = Some(observed_at);
    Ok(meta)
}

/// Walks every rule directory and classifies the files found there.
///
/// A file below several rule directories belongs to the most specific one.
/// Missing rule directories are skipped; an unreadable data root is an error.
pub fn scan(
    root: &Path,
    rules: &PathRuleSet,
    roots: &TreeRoots,
    policy: &RecencyPolicy,
    now: NaiveDateTime,
) -> Result<ScanOutcome, IngestError> {
    std::fs::read_dir(root).map_err(|source| IngestError::RootUnreadable { path: root.to_path_buf(), source })?;

    let mut owner: BTreeMap<String, &PathRule> = BTreeMap::new();
    for rule in &rules.rules {
        let rule_root = rule.normalized_root();
        let dir = root.join(&rule_root);
        if !dir.is_dir() {
            tracing::debug!(dir = %dir.display(), "rule directory missing");
            continue;
        }
        for entry in WalkDir::new(&dir).follow_links(false).sort_by_file_name() {
            let entry = match entry {
                Ok(e) => e,
                Err(e) => {
                    tracing::warn!(error = %e, "unreadable directory entry");
                    continue;
                }
            };
            if !entry.file_type().is_file() {
                continue;
            }
            let Ok(rel) = entry.path().strip_prefix(root) else { continue };
            let rel = rel.to_string_lossy().replace('\\', "/");
            owner
                .entry(rel)
                .and_modify(|current| {
                    if rule_root.len() > current.normalized_root().len() {
                        *current = rule;
                    }
                })
                .or_insert(rule);
        }
    }

    let mut outcome = ScanOutcome::default();
    for (path, rule) in owner {
        match classify(root, &path, rule, roots, policy, now) {
            Ok(meta) => outcome.candidates.push(Candidate { path, rule: rule.clone(), meta }),
            Err(reason) => outcome.skipped.push(Skipped { path, reason }),
        }
    }
    Ok(outcome)
}

fn store_report(w: &Writer<'_>, report: &IngestReport) -> Result<(), CatalogError> {
    let body = serde_json::to_string(report).expect("report serializes");
    w.conn().execute("INSERT INTO reports (body) VALUES (?1)", params![body])?;
    w.conn().execute(
        "DELETE FROM reports WHERE seq <= (SELECT MAX(seq) FROM reports) - ?1",
        params![REPORT_HISTORY],
    )?;
    Ok(())
}

/// Scans, upserts, links and records a report, all in one transaction.
pub fn generate_entries(
    catalog: &Catalog,
    root: &Path,
    settings: &IngestSettings,
    now: NaiveDateTime,
) -> Result<IngestReport, IngestError> {
    let started_at = now_local();
    let rules = catalog.read(|r| r.rules())?;
    let outcome = scan(root, &rules, &settings.roots, &settings.policy, now)?;

    catalog.write(|w| {
        let mut report = IngestReport {
            started_at,
            now_reference: now,
            scanned: outcome.scanned(),
            created: 0,
            duplicates: 0,
            skipped: outcome.skipped.clone(),
            links_created: 0,
            entries: Vec::new(),
        };
        let mut fresh = Vec::new();
        for candidate in &outcome.candidates {
            let extra = settings.profiles.get(&candidate.meta.device_code).cloned().unwrap_or_default();
            match w.upsert_entry(&candidate.meta, candidate.rule.tree_kind, extra) {
                Ok((entry, true)) => {
                    report.created += 1;
                    report.entries.push(entry.id);
                    fresh.push(entry);
                }
                Ok((_, false)) => report.duplicates += 1,
                Err(CatalogError::UnknownSample { .. }) => {
                    report.skipped.push(Skipped { path: candidate.path.clone(), reason: SkipReason::UnknownSample })
                }
                Err(e) => return Err(IngestError::from(e)),
            }
        }
        for entry in &fresh {
            report.links_created += link_new_entry(w, entry, &settings.windows)?.len();
        }
        report.skipped.sort_by(|a, b| a.path.cmp(&b.path));
        store_report(w, &report)?;
        Ok(report)
    })
}

/// The most recent stored report.
pub fn latest_report(catalog: &Catalog) -> Result<IngestReport, IngestError> {
    catalog.read(|r| {
        let body: Option<String> = rusqlite::OptionalExtension::optional(r.conn().query_row(
            "SELECT body FROM reports ORDER BY seq DESC LIMIT 1",
            [],
            |row| row.get(0),
        ))?;
        let body = body.ok_or(IngestError::NoReports)?;
        serde_json::from_str(&body).map_err(|e| IngestError::Catalog(CatalogError::Corrupt(e.to_string())))
    })
}

/// Number of stored reports.
pub fn report_count(catalog: &Catalog) -> Result<i64, IngestError> {
    catalog.read(|r| Ok(r.conn().query_row("SELECT COUNT(*) FROM reports", [], |row| row.get(0))?))
}
