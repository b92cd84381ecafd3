//! Persistent catalog: samples, path rules, entries, notes and links in a
//! single SQLite file.
//!
//! All access goes through [`Catalog::read`] and [`Catalog::write`]. A write
//! closure runs inside one transaction and is rolled back if it returns an
//! error, so every mutation is atomic. The connection sits behind a mutex,
//! which serializes writers; readers always observe committed state.

mod model;
mod schema;

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::{Mutex, MutexGuard};

use chrono::{Local, NaiveDateTime, Timelike};
use rusqlite::{params, Connection, OptionalExtension, Row};

pub use model::*;
pub use schema::SCHEMA_VERSION;

use crate::convention::{validate_device_code, validate_sample_name, ParsedFileMeta};

const TS_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

#[derive(Debug, thiserror::Error)]
pub enum CatalogError {
    #[error("unknown sample `{name}`")]
    UnknownSample { name: String },
    #[error("duplicate key: {0}")]
    DuplicateKey(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("invalid time range: start is after end")]
    InvalidRange,
    #[error("invalid sample name `{0}` (expected two capital letters, underscore, two digits)")]
    InvalidSampleName(String),
    #[error("invalid path rule: {0}")]
    InvalidRule(String),
    #[error("invalid link: {0}")]
    InvalidLink(String),
    #[error("entry for `{0}` has no timestamp")]
    MissingTimestamp(String),
    #[error("store schema version {found} does not match expected {expected}")]
    SchemaVersion { found: i64, expected: i64 },
    #[error("store error: {0}")]
    Store(#[from] rusqlite::Error),
    #[error("corrupt stored value: {0}")]
    Corrupt(String),
}

pub type Result<T, E = CatalogError> = std::result::Result<T, E>;

pub(crate) fn fmt_ts(ts: NaiveDateTime) -> String {
    ts.format(TS_FORMAT).to_string()
}

pub(crate) fn parse_ts(s: &str) -> Result<NaiveDateTime> {
    NaiveDateTime::parse_from_str(s, TS_FORMAT).map_err(|e| CatalogError::Corrupt(format!("timestamp `{s}`: {e}")))
}

pub(crate) fn now_local() -> NaiveDateTime {
    Local::now().naive_local().with_nanosecond(0).unwrap()
}

fn from_json<T: serde::de::DeserializeOwned>(s: &str) -> Result<T> {
    serde_json::from_str(s).map_err(|e| CatalogError::Corrupt(e.to_string()))
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("map serialization cannot fail")
}

fn is_unique_violation(err: &rusqlite::Error) -> bool {
    matches!(
        err,
        rusqlite::Error::SqliteFailure(e, _) if e.code == rusqlite::ErrorCode::ConstraintViolation
    )
}

/// What an id refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordKind {
    Entry(EntryKind),
    Note,
}

pub struct Catalog {
    conn: Mutex<Connection>,
}

impl std::fmt::Debug for Catalog {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Catalog").finish_non_exhaustive()
    }
}

impl Catalog {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let conn = Connection::open(path)?;
        conn.pragma_update(None, "journal_mode", "WAL")?;
        conn.pragma_update(None, "synchronous", "NORMAL")?;
        Self::from_connection(conn)
    }

    pub fn open_in_memory() -> Result<Self> {
        Self::from_connection(Connection::open_in_memory()?)
    }

    fn from_connection(conn: Connection) -> Result<Self> {
        conn.pragma_update(None, "foreign_keys", true)?;
        schema::initialize(&conn)?;
        Ok(Catalog { conn: Mutex::new(conn) })
    }

    fn lock(&self) -> MutexGuard<'_, Connection> {
        self.conn.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
    }

    /// Runs `f` against committed state.
    pub fn read<T, E>(&self, f: impl FnOnce(&Reader<'_>) -> Result<T, E>) -> Result<T, E> {
        let guard = self.lock();
        f(&Reader { conn: &guard })
    }

    /// Runs `f` in a transaction; commits on `Ok`, rolls back on `Err`.
    pub fn write<T, E>(&self, f: impl FnOnce(&Writer<'_>) -> Result<T, E>) -> Result<T, E>
    where
        E: From<CatalogError>,
    {
        let mut guard = self.lock();
        let tx = guard.transaction().map_err(CatalogError::from)?;
        let out = f(&Writer { reader: Reader { conn: &tx } })?;
        tx.commit().map_err(CatalogError::from)?;
        Ok(out)
    }

    pub fn register_sample(
        &self,
        name: &str,
        kind: &str,
        properties: BTreeMap<String, String>,
    ) -> Result<Sample> {
        self.write(|w| w.register_sample(name, kind, properties))
    }

    pub fn register_path_rule(&self, rule: PathRule) -> Result<PathRuleSet> {
        self.write(|w| w.register_path_rule(rule))
    }

    pub fn upsert_entry(
        &self,
        meta: &ParsedFileMeta,
        kind: EntryKind,
        extra: BTreeMap<String, String>,
    ) -> Result<(CatalogEntry, bool)> {
        self.write(|w| w.upsert_entry(meta, kind, extra))
    }

    pub fn add_note(&self, sample: &str, written_at: NaiveDateTime, body: &str) -> Result<Note> {
        self.write(|w| w.add_note(sample, written_at, body))
    }

    pub fn add_link(
        &self,
        from_id: RecordId,
        to_id: RecordId,
        link_type: LinkType,
        created_by: LinkOrigin,
    ) -> Result<Link> {
        self.write(|w| w.add_link(from_id, to_id, link_type, created_by))
    }

    pub fn delete_entry(&self, id: RecordId) -> Result<bool> {
        self.write(|w| w.delete_entry(id))
    }

    pub fn get_entry(&self, id: RecordId) -> Result<CatalogEntry> {
        self.read(|r| r.get_entry(id))
    }

    pub fn query_entries(&self, filter: &EntryFilter) -> Result<Vec<CatalogEntry>> {
        self.read(|r| r.query_entries(filter))
    }

    pub fn snapshot(&self) -> Result<CatalogSnapshot> {
        self.read(|r| r.snapshot())
    }
}

/// Read access to the store.
pub struct Reader<'c> {
    conn: &'c Connection,
}

/// Read/write access inside an open transaction.
pub struct Writer<'c> {
    reader: Reader<'c>,
}

impl<'c> std::ops::Deref for Writer<'c> {
    type Target = Reader<'c>;

    fn deref(&self) -> &Reader<'c> {
        &self.reader
    }
}

const ENTRY_COLUMNS: &str =
    "id, kind, device_code, sample_name, observed_at, file_path, description, extension, extra, created_at";

fn entry_from_row(row: &Row<'_>) -> rusqlite::Result<(CatalogEntry, String, String, String, String)> {
    let entry = CatalogEntry {
        id: row.get(0)?,
        kind: crate::convention::TreeKind::Main,
        device_code: row.get(2)?,
        sample_name: row.get(3)?,
        observed_at: NaiveDateTime::MIN,
        file_path: row.get(5)?,
        description: row.get(6)?,
        extension: row.get(7)?,
        extra: BTreeMap::new(),
        created_at: NaiveDateTime::MIN,
    };
    Ok((entry, row.get(1)?, row.get(4)?, row.get(8)?, row.get(9)?))
}

fn finish_entry(raw: (CatalogEntry, String, String, String, String)) -> Result<CatalogEntry> {
    let (mut entry, kind, observed_at, extra, created_at) = raw;
    entry.kind = kind.parse().map_err(CatalogError::Corrupt)?;
    entry.observed_at = parse_ts(&observed_at)?;
    entry.extra = from_json(&extra)?;
    entry.created_at = parse_ts(&created_at)?;
    Ok(entry)
}

fn note_from_row(row: &Row<'_>) -> rusqlite::Result<(RecordId, String, String, String)> {
    Ok((row.get(0)?, row.get(1)?, row.get(2)?, row.get(3)?))
}

fn finish_note(raw: (RecordId, String, String, String)) -> Result<Note> {
    let (id, sample_name, written_at, body) = raw;
    Ok(Note { id, sample_name, written_at: parse_ts(&written_at)?, body })
}

fn link_from_row(row: &Row<'_>) -> rusqlite::Result<(i64, RecordId, RecordId, String, String)> {
    Ok((row.get(0)?, row.get(1)?, row.get(2)?, row.get(3)?, row.get(4)?))
}

fn finish_link(raw: (i64, RecordId, RecordId, String, String)) -> Result<Link> {
    let (id, from_id, to_id, link_type, created_by) = raw;
    Ok(Link {
        id,
        from_id,
        to_id,
        link_type: link_type.parse().map_err(CatalogError::Corrupt)?,
        created_by: created_by.parse().map_err(CatalogError::Corrupt)?,
    })
}

impl<'c> Reader<'c> {
    pub(crate) fn conn(&self) -> &'c Connection {
        self.conn
    }

    fn entries_where(&self, clause: &str, params: &[&dyn rusqlite::ToSql]) -> Result<Vec<CatalogEntry>> {
        let sql = format!("SELECT {ENTRY_COLUMNS} FROM entries {clause}");
        let mut stmt = self.conn.prepare_cached(&sql)?;
        let rows = stmt.query_map(params, entry_from_row)?;
        rows.map(|r| finish_entry(r?)).collect()
    }

    pub fn get_entry(&self, id: RecordId) -> Result<CatalogEntry> {
        self.entries_where("WHERE id = ?1", &[&id])?
            .pop()
            .ok_or_else(|| CatalogError::NotFound(format!("entry {id}")))
    }

    pub fn entry_by_path(&self, file_path: &str) -> Result<Option<CatalogEntry>> {
        Ok(self.entries_where("WHERE file_path = ?1", &[&file_path])?.pop())
    }

    pub fn list_entries(&self) -> Result<Vec<CatalogEntry>> {
        self.entries_where("ORDER BY id", &[])
    }

    /// Entries of one sample and kind with `observed_at` in `[start, end]`, ascending by time then id.
    pub fn entries_in_window(
        &self,
        sample: &str,
        kind: EntryKind,
        start: NaiveDateTime,
        end: NaiveDateTime,
    ) -> Result<Vec<CatalogEntry>> {
        self.entries_where(
            "WHERE sample_name = ?1 AND kind = ?2 AND observed_at >= ?3 AND observed_at <= ?4 \
             ORDER BY observed_at, id",
            &[&sample, &kind.as_str(), &fmt_ts(start), &fmt_ts(end)],
        )
    }

    pub fn record_kind(&self, id: RecordId) -> Result<Option<RecordKind>> {
        let kind: Option<String> = self
            .conn
            .query_row("SELECT kind FROM entries WHERE id = ?1", [id], |r| r.get(0))
            .optional()?;
        if let Some(kind) = kind {
            return Ok(Some(RecordKind::Entry(kind.parse().map_err(CatalogError::Corrupt)?)));
        }
        let note: Option<i64> =
            self.conn.query_row("SELECT id FROM notes WHERE id = ?1", [id], |r| r.get(0)).optional()?;
        Ok(note.map(|_| RecordKind::Note))
    }

    pub fn query_entries(&self, filter: &EntryFilter) -> Result<Vec<CatalogEntry>> {
        let mut clauses: Vec<String> = Vec::new();
        let mut args: Vec<String> = Vec::new();
        if let Some(range) = filter.time_range {
            if range.start > range.end {
                return Err(CatalogError::InvalidRange);
            }
            args.push(fmt_ts(range.start));
            clauses.push(format!("observed_at >= ?{}", args.len()));
            args.push(fmt_ts(range.end));
            clauses.push(format!("observed_at <= ?{}", args.len()));
        }
        if let Some(sample) = &filter.sample {
            args.push(sample.clone());
            clauses.push(format!("sample_name = ?{}", args.len()));
        }
        if let Some(device) = &filter.device {
            args.push(device.clone());
            clauses.push(format!("device_code = ?{}", args.len()));
        }
        if let Some(kind) = filter.kind {
            args.push(kind.as_str().to_string());
            clauses.push(format!("kind = ?{}", args.len()));
        }
        let mut sql = String::new();
        if !clauses.is_empty() {
            sql.push_str("WHERE ");
            sql.push_str(&clauses.join(" AND "));
        }
        sql.push_str(" ORDER BY observed_at DESC, id DESC");
        let params: Vec<&dyn rusqlite::ToSql> = args.iter().map(|a| a as &dyn rusqlite::ToSql).collect();
        let mut entries = self.entries_where(&sql, &params)?;

        if let Some((key, value)) = &filter.extra_key_value {
            entries.retain(|e| e.extra.get(key) == Some(value));
        }
        if let Some(text) = &filter.text {
            let needle = text.to_lowercase();
            let notes = self.linked_note_bodies()?;
            entries.retain(|e| {
                e.description.to_lowercase().contains(&needle)
                    || notes
                        .get(&e.id)
                        .is_some_and(|bodies| bodies.iter().any(|b| b.to_lowercase().contains(&needle)))
            });
        }
        Ok(entries)
    }

    /// Note bodies keyed by the entry they are linked to.
    fn linked_note_bodies(&self) -> Result<HashMap<RecordId, Vec<String>>> {
        let mut stmt = self.conn.prepare_cached(
            "SELECT l.from_id, n.body FROM links l JOIN notes n ON n.id = l.to_id \
             WHERE l.link_type = 'entry_note'",
        )?;
        let mut out: HashMap<RecordId, Vec<String>> = HashMap::new();
        let rows = stmt.query_map([], |r| Ok((r.get::<_, i64>(0)?, r.get::<_, String>(1)?)))?;
        for row in rows {
            let (id, body) = row?;
            out.entry(id).or_default().push(body);
        }
        Ok(out)
    }

    pub fn get_sample(&self, name: &str) -> Result<Option<Sample>> {
        let raw: Option<(String, String, String, String)> = self
            .conn
            .query_row(
                "SELECT name, kind, properties, created_at FROM samples WHERE name = ?1",
                [name],
                |r| Ok((r.get(0)?, r.get(1)?, r.get(2)?, r.get(3)?)),
            )
            .optional()?;
        raw.map(|(name, kind, props, created)| {
            Ok(Sample { name, kind, properties: from_json(&props)?, created_at: parse_ts(&created)? })
        })
        .transpose()
    }

    pub fn list_samples(&self) -> Result<Vec<Sample>> {
        let mut stmt = self.conn.prepare_cached("SELECT name FROM samples ORDER BY name")?;
        let names: Vec<String> = stmt.query_map([], |r| r.get(0))?.collect::<rusqlite::Result<_>>()?;
        names
            .iter()
            .map(|n| self.get_sample(n)?.ok_or_else(|| CatalogError::NotFound(format!("sample {n}"))))
            .collect()
    }

    pub fn rules(&self) -> Result<PathRuleSet> {
        let mut stmt = self.conn.prepare_cached(
            "SELECT device_code, tree_kind, root_subpath, allowed_extensions, instrument_variant \
             FROM path_rules ORDER BY seq",
        )?;
        let rows = stmt.query_map([], |r| {
            Ok((
                r.get::<_, String>(0)?,
                r.get::<_, String>(1)?,
                r.get::<_, String>(2)?,
                r.get::<_, String>(3)?,
                r.get::<_, String>(4)?,
            ))
        })?;
        let mut rules = Vec::new();
        for row in rows {
            let (device_code, kind, root_subpath, exts, instrument_variant) = row?;
            rules.push(PathRule {
                device_code,
                tree_kind: kind.parse().map_err(CatalogError::Corrupt)?,
                root_subpath,
                allowed_extensions: from_json(&exts)?,
                instrument_variant,
            });
        }
        Ok(PathRuleSet { rules })
    }

    fn notes_where(&self, clause: &str, params: &[&dyn rusqlite::ToSql]) -> Result<Vec<Note>> {
        let sql = format!("SELECT id, sample_name, written_at, body FROM notes {clause}");
        let mut stmt = self.conn.prepare_cached(&sql)?;
        let rows = stmt.query_map(params, note_from_row)?;
        rows.map(|r| finish_note(r?)).collect()
    }

    pub fn get_note(&self, id: RecordId) -> Result<Note> {
        self.notes_where("WHERE id = ?1", &[&id])?
            .pop()
            .ok_or_else(|| CatalogError::NotFound(format!("note {id}")))
    }

    pub fn list_notes(&self) -> Result<Vec<Note>> {
        self.notes_where("ORDER BY id", &[])
    }

    /// Notes of one sample written within `[start, end]`.
    pub fn notes_in_window(&self, sample: &str, start: NaiveDateTime, end: NaiveDateTime) -> Result<Vec<Note>> {
        self.notes_where(
            "WHERE sample_name = ?1 AND written_at >= ?2 AND written_at <= ?3 ORDER BY written_at, id",
            &[&sample, &fmt_ts(start), &fmt_ts(end)],
        )
    }

    fn links_where(&self, clause: &str, params: &[&dyn rusqlite::ToSql]) -> Result<Vec<Link>> {
        let sql = format!("SELECT id, from_id, to_id, link_type, created_by FROM links {clause}");
        let mut stmt = self.conn.prepare_cached(&sql)?;
        let rows = stmt.query_map(params, link_from_row)?;
        rows.map(|r| finish_link(r?)).collect()
    }

    pub fn list_links(&self) -> Result<Vec<Link>> {
        self.links_where("ORDER BY id", &[])
    }

    /// All links touching `id` in either direction.
    pub fn links_of(&self, id: RecordId) -> Result<Vec<Link>> {
        self.links_where("WHERE from_id = ?1 OR to_id = ?1 ORDER BY id", &[&id])
    }

    pub fn links_from(&self, id: RecordId, link_type: LinkType) -> Result<Vec<Link>> {
        self.links_where("WHERE from_id = ?1 AND link_type = ?2 ORDER BY id", &[&id, &link_type.as_str()])
    }

    pub fn links_to(&self, id: RecordId, link_type: LinkType) -> Result<Vec<Link>> {
        self.links_where("WHERE to_id = ?1 AND link_type = ?2 ORDER BY id", &[&id, &link_type.as_str()])
    }

    /// Entries and notes of a sample, ascending by timestamp with id as tiebreak.
    pub fn sample_history(&self, sample: &str) -> Result<Vec<HistoryItem>> {
        if self.get_sample(sample)?.is_none() {
            return Err(CatalogError::UnknownSample { name: sample.to_string() });
        }
        let mut items: Vec<HistoryItem> = self
            .entries_where("WHERE sample_name = ?1", &[&sample])?
            .into_iter()
            .map(HistoryItem::Entry)
            .chain(self.notes_where("WHERE sample_name = ?1", &[&sample])?.into_iter().map(HistoryItem::Note))
            .collect();
        items.sort_by_key(|i| (i.timestamp(), i.id()));
        Ok(items)
    }

    pub fn snapshot(&self) -> Result<CatalogSnapshot> {
        Ok(CatalogSnapshot {
            samples: self.list_samples()?,
            rules: self.rules()?,
            entries: self.list_entries()?,
            notes: self.list_notes()?,
            links: self.list_links()?,
        })
    }
}

impl<'c> Writer<'c> {
    fn next_record_id(&self) -> Result<RecordId> {
        let next: String =
            self.conn.query_row("SELECT value FROM meta WHERE key = 'next_record_id'", [], |r| r.get(0))?;
        let id: RecordId = next.parse().map_err(|_| CatalogError::Corrupt(format!("next_record_id `{next}`")))?;
        self.conn.execute(
            "UPDATE meta SET value = ?1 WHERE key = 'next_record_id'",
            [(id + 1).to_string()],
        )?;
        Ok(id)
    }

    pub fn register_sample(
        &self,
        name: &str,
        kind: &str,
        properties: BTreeMap<String, String>,
    ) -> Result<Sample> {
        if !validate_sample_name(name) {
            return Err(CatalogError::InvalidSampleName(name.to_string()));
        }
        let created_at = now_local();
        self.conn
            .execute(
                "INSERT INTO samples (name, kind, properties, created_at) VALUES (?1, ?2, ?3, ?4)",
                params![name, kind, to_json(&properties), fmt_ts(created_at)],
            )
            .map_err(|e| {
                if is_unique_violation(&e) {
                    CatalogError::DuplicateKey(format!("sample {name}"))
                } else {
                    e.into()
                }
            })?;
        Ok(Sample { name: name.to_string(), kind: kind.to_string(), properties, created_at })
    }

    pub fn register_path_rule(&self, mut rule: PathRule) -> Result<PathRuleSet> {
        if !validate_device_code(&rule.device_code) {
            return Err(CatalogError::InvalidRule(format!("device code `{}`", rule.device_code)));
        }
        rule.allowed_extensions = rule
            .allowed_extensions
            .iter()
            .map(|e| e.trim().trim_start_matches('.').to_ascii_lowercase())
            .filter(|e| !e.is_empty())
            .collect();
        if rule.allowed_extensions.is_empty() {
            return Err(CatalogError::InvalidRule("allowed_extensions must not be empty".into()));
        }
        rule.root_subpath = rule.normalized_root();
        if rule.root_subpath.is_empty() {
            return Err(CatalogError::InvalidRule("root_subpath must not be empty".into()));
        }
        self.conn
            .execute(
                "INSERT INTO path_rules (device_code, tree_kind, root_subpath, allowed_extensions, instrument_variant) \
                 VALUES (?1, ?2, ?3, ?4, ?5)",
                params![
                    rule.device_code,
                    rule.tree_kind.as_str(),
                    rule.root_subpath,
                    to_json(&rule.allowed_extensions),
                    rule.instrument_variant
                ],
            )
            .map_err(|e| {
                if is_unique_violation(&e) {
                    CatalogError::DuplicateKey(format!("rule ({}, {})", rule.device_code, rule.tree_kind))
                } else {
                    e.into()
                }
            })?;
        self.rules()
    }

    /// Inserts an entry for `meta` unless one with the same file path exists,
    /// in which case the stored entry is returned untouched.
    pub fn upsert_entry(
        &self,
        meta: &ParsedFileMeta,
        kind: EntryKind,
        extra: BTreeMap<String, String>,
    ) -> Result<(CatalogEntry, bool)> {
        if let Some(existing) = self.entry_by_path(&meta.relative_path)? {
            return Ok((existing, false));
        }
        if self.get_sample(&meta.sample_name)?.is_none() {
            return Err(CatalogError::UnknownSample { name: meta.sample_name.clone() });
        }
        let observed_at =
            meta.observed_at.ok_or_else(|| CatalogError::MissingTimestamp(meta.relative_path.clone()))?;
        let entry = CatalogEntry {
            id: self.next_record_id()?,
            kind,
            device_code: meta.device_code.clone(),
            sample_name: meta.sample_name.clone(),
            observed_at,
            file_path: meta.relative_path.clone(),
            description: meta.description.clone(),
            extension: meta.extension.clone(),
            extra,
            created_at: now_local(),
        };
        self.conn.execute(
            &format!("INSERT INTO entries ({ENTRY_COLUMNS}) VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9, ?10)"),
            params![
                entry.id,
                entry.kind.as_str(),
                entry.device_code,
                entry.sample_name,
                fmt_ts(entry.observed_at),
                entry.file_path,
                entry.description,
                entry.extension,
                to_json(&entry.extra),
                fmt_ts(entry.created_at),
            ],
        )?;
        Ok((entry, true))
    }

    /// Sets one experiment-specific metadata value on an entry.
    pub fn set_extra(&self, id: RecordId, key: &str, value: &str) -> Result<CatalogEntry> {
        let mut entry = self.get_entry(id)?;
        entry.extra.insert(key.to_string(), value.to_string());
        self.conn.execute("UPDATE entries SET extra = ?1 WHERE id = ?2", params![to_json(&entry.extra), id])?;
        Ok(entry)
    }

    pub fn add_note(&self, sample: &str, written_at: NaiveDateTime, body: &str) -> Result<Note> {
        if self.get_sample(sample)?.is_none() {
            return Err(CatalogError::UnknownSample { name: sample.to_string() });
        }
        let note = Note { id: self.next_record_id()?, sample_name: sample.to_string(), written_at, body: body.to_string() };
        self.conn.execute(
            "INSERT INTO notes (id, sample_name, written_at, body) VALUES (?1, ?2, ?3, ?4)",
            params![note.id, note.sample_name, fmt_ts(note.written_at), note.body],
        )?;
        Ok(note)
    }

    fn check_link_endpoints(&self, from_id: RecordId, to_id: RecordId, link_type: LinkType) -> Result<()> {
        let from = self.record_kind(from_id)?.ok_or_else(|| CatalogError::NotFound(format!("record {from_id}")))?;
        let to = self.record_kind(to_id)?.ok_or_else(|| CatalogError::NotFound(format!("record {to_id}")))?;
        if from_id == to_id {
            return Err(CatalogError::InvalidLink("a record cannot link to itself".into()));
        }
        let ok = match link_type {
            LinkType::MainSub => {
                from == RecordKind::Entry(EntryKind::Main) && to == RecordKind::Entry(EntryKind::Sub)
            }
            LinkType::EntryNote => matches!(from, RecordKind::Entry(_)) && to == RecordKind::Note,
            LinkType::EntryAnalysis | LinkType::EntryEntry => {
                matches!(from, RecordKind::Entry(_)) && matches!(to, RecordKind::Entry(_))
            }
        };
        if ok {
            Ok(())
        } else {
            Err(CatalogError::InvalidLink(format!("{link_type} cannot connect {from:?} -> {to:?}")))
        }
    }

    pub fn add_link(
        &self,
        from_id: RecordId,
        to_id: RecordId,
        link_type: LinkType,
        created_by: LinkOrigin,
    ) -> Result<Link> {
        self.check_link_endpoints(from_id, to_id, link_type)?;
        self.conn
            .execute(
                "INSERT INTO links (from_id, to_id, link_type, created_by) VALUES (?1, ?2, ?3, ?4)",
                params![from_id, to_id, link_type.as_str(), created_by.as_str()],
            )
            .map_err(|e| {
                if is_unique_violation(&e) {
                    CatalogError::DuplicateKey(format!("link {from_id} -> {to_id} ({link_type})"))
                } else {
                    e.into()
                }
            })?;
        Ok(Link { id: self.conn.last_insert_rowid(), from_id, to_id, link_type, created_by })
    }

    /// Like [`Writer::add_link`] but returns `None` instead of failing when the link exists.
    pub fn ensure_link(
        &self,
        from_id: RecordId,
        to_id: RecordId,
        link_type: LinkType,
        created_by: LinkOrigin,
    ) -> Result<Option<Link>> {
        match self.add_link(from_id, to_id, link_type, created_by) {
            Ok(link) => Ok(Some(link)),
            Err(CatalogError::DuplicateKey(_)) => Ok(None),
            Err(e) => Err(e),
        }
    }

    pub fn remove_link(&self, link_id: i64) -> Result<bool> {
        Ok(self.conn.execute("DELETE FROM links WHERE id = ?1", [link_id])? > 0)
    }

    /// Removes an entry together with every link touching it.
    pub fn delete_entry(&self, id: RecordId) -> Result<bool> {
        let removed = self.conn.execute("DELETE FROM entries WHERE id = ?1", [id])?;
        if removed == 0 {
            return Err(CatalogError::NotFound(format!("entry {id}")));
        }
        self.conn.execute("DELETE FROM links WHERE from_id = ?1 OR to_id = ?1", [id])?;
        Ok(true)
    }
}
