use rusqlite::Connection;

use super::CatalogError;

pub const SCHEMA_VERSION: i64 = 1;

const SCHEMA_SQL: &str = r#"
CREATE TABLE IF NOT EXISTS meta (
    key   TEXT PRIMARY KEY,
    value TEXT NOT NULL
);

CREATE TABLE IF NOT EXISTS samples (
    name       TEXT PRIMARY KEY,
    kind       TEXT NOT NULL,
    properties TEXT NOT NULL,
    created_at TEXT NOT NULL
);

CREATE TABLE IF NOT EXISTS path_rules (
    seq                INTEGER PRIMARY KEY AUTOINCREMENT,
    device_code        TEXT NOT NULL,
    tree_kind          TEXT NOT NULL,
    root_subpath       TEXT NOT NULL,
    allowed_extensions TEXT NOT NULL,
    instrument_variant TEXT NOT NULL DEFAULT '',
    UNIQUE (device_code, tree_kind)
);

-- ids come from meta.next_record_id, shared with notes
CREATE TABLE IF NOT EXISTS entries (
    id          INTEGER PRIMARY KEY,
    kind        TEXT NOT NULL,
    device_code TEXT NOT NULL,
    sample_name TEXT NOT NULL REFERENCES samples(name),
    observed_at TEXT NOT NULL,
    file_path   TEXT NOT NULL UNIQUE,
    description TEXT NOT NULL,
    extension   TEXT NOT NULL,
    extra       TEXT NOT NULL,
    created_at  TEXT NOT NULL,
    stamp_batch INTEGER
);
CREATE INDEX IF NOT EXISTS entries_sample_time ON entries (sample_name, kind, observed_at);

CREATE TABLE IF NOT EXISTS notes (
    id          INTEGER PRIMARY KEY,
    sample_name TEXT NOT NULL REFERENCES samples(name),
    written_at  TEXT NOT NULL,
    body        TEXT NOT NULL
);
CREATE INDEX IF NOT EXISTS notes_sample_time ON notes (sample_name, written_at);

CREATE TABLE IF NOT EXISTS links (
    id         INTEGER PRIMARY KEY AUTOINCREMENT,
    from_id    INTEGER NOT NULL,
    to_id      INTEGER NOT NULL,
    link_type  TEXT NOT NULL,
    created_by TEXT NOT NULL,
    UNIQUE (from_id, to_id, link_type)
);
CREATE INDEX IF NOT EXISTS links_to ON links (to_id);

CREATE TABLE IF NOT EXISTS reports (
    seq  INTEGER PRIMARY KEY AUTOINCREMENT,
    body TEXT NOT NULL
);

CREATE TABLE IF NOT EXISTS stamp_batches (
    id           INTEGER PRIMARY KEY AUTOINCREMENT,
    batch_date   TEXT NOT NULL,
    leaves       TEXT NOT NULL,
    root         TEXT NOT NULL,
    submitted_at TEXT,
    receipt      TEXT
);

CREATE TABLE IF NOT EXISTS stamp_leaves (
    digest   TEXT NOT NULL,
    batch_id INTEGER NOT NULL REFERENCES stamp_batches(id),
    PRIMARY KEY (digest, batch_id)
);
"#;

pub fn initialize(conn: &Connection) -> Result<(), CatalogError> {
    let version: i64 = conn.query_row("PRAGMA user_version", [], |r| r.get(0))?;
    match version {
        0 => {
            conn.execute_batch(SCHEMA_SQL)?;
            conn.execute(
                "INSERT OR IGNORE INTO meta (key, value) VALUES ('next_record_id', '1')",
                [],
            )?;
            conn.pragma_update(None, "user_version", SCHEMA_VERSION)?;
            Ok(())
        }
        SCHEMA_VERSION => Ok(()),
        found => Err(CatalogError::SchemaVersion { found, expected: SCHEMA_VERSION }),
    }
}
