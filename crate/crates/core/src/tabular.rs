//! Delimited measurement tables and plot payloads.
//!
//! The time column is read as seconds relative to the entry's timestamp. Sub
//! tables are never resampled: each one carries `offset_s`, the difference
//! between its entry timestamp and the main entry's, and the client shifts
//! the axis.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::catalog::{CatalogEntry, CatalogError, LinkType, Reader, RecordId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesTable {
    pub time_s: Vec<f64>,
    pub columns: IndexMap<String, Vec<f64>>,
    #[serde(skip)]
    pub source_entry_id: Option<RecordId>,
}

/// Which column holds time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TimeColumn {
    Index(usize),
    Name(String),
}

impl Default for TimeColumn {
    fn default() -> Self {
        TimeColumn::Index(0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TableFormat {
    pub delimiter: char,
    pub decimal_separator: char,
    pub time_column: TimeColumn,
}

impl Default for TableFormat {
    fn default() -> Self {
        TableFormat { delimiter: ',', decimal_separator: '.', time_column: TimeColumn::default() }
    }
}

/// Tabular settings: which extensions are tables and how each device writes them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TabularConfig {
    pub extensions: BTreeSet<String>,
    pub format: TableFormat,
    /// Per-device overrides keyed by device code.
    pub devices: HashMap<String, TableFormat>,
}

impl Default for TabularConfig {
    fn default() -> Self {
        TabularConfig {
            extensions: ["csv", "txt", "dat"].into_iter().map(String::from).collect(),
            format: TableFormat::default(),
            devices: HashMap::new(),
        }
    }
}

impl TabularConfig {
    pub fn format_for(&self, device_code: &str) -> &TableFormat {
        self.devices.get(device_code).unwrap_or(&self.format)
    }

    pub fn is_tabular(&self, extension: &str) -> bool {
        self.extensions.contains(&extension.to_ascii_lowercase())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TableError {
    #[error("table has no header row")]
    NoHeader,
    #[error("row {row} has the wrong number of cells")]
    RaggedRow { row: usize },
    #[error("cell at row {row}, column {col} is not a number")]
    NonNumeric { row: usize, col: usize },
    #[error("table has no data rows")]
    EmptyTable,
    #[error("time column {0} not found in header")]
    UnknownTimeColumn(String),
    #[error("time decreases at row {row}")]
    NonMonotonicTime { row: usize },
    #[error("delimiter `{0}` is not a single-byte character")]
    UnsupportedDelimiter(char),
    #[error("table is not valid UTF-8 text")]
    NotText,
    #[error("table read failed: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, thiserror::Error)]
pub enum PlotError {
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error("entry {id} has extension `{extension}`, which is not tabular")]
    NotTabular { id: RecordId, extension: String },
    #[error("entry {id}: {source}")]
    Table { id: RecordId, source: TableError },
}

fn parse_number(cell: &str, decimal: char) -> Option<f64> {
    let cell = cell.trim();
    let value: f64 = if decimal == '.' { cell.parse().ok()? } else { cell.replace(decimal, ".").parse().ok()? };
    value.is_finite().then_some(value)
}

/// Parses a delimited text table. Rows are numbered from 1 for the first
/// data row, columns from 1 for the leftmost cell.
pub fn parse_table(bytes: &[u8], format: &TableFormat) -> Result<TimeSeriesTable, TableError> {
    let text = std::str::from_utf8(bytes).map_err(|_| TableError::NotText)?;
    let delimiter = u8::try_from(format.delimiter).map_err(|_| TableError::UnsupportedDelimiter(format.delimiter))?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut records = reader.records();
    let header = match records.next() {
        Some(Ok(h)) if h.iter().any(|c| !c.is_empty()) => h,
        Some(Err(e)) => return Err(TableError::Io(e.into())),
        _ => return Err(TableError::NoHeader),
    };
    let names: Vec<String> = header.iter().map(str::to_string).collect();
    let time_idx = match &format.time_column {
        TimeColumn::Index(i) if *i < names.len() => *i,
        TimeColumn::Index(i) => return Err(TableError::UnknownTimeColumn(i.to_string())),
        TimeColumn::Name(n) => {
            names.iter().position(|h| h == n).ok_or_else(|| TableError::UnknownTimeColumn(n.clone()))?
        }
    };

    let mut time_s = Vec::new();
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    let mut row = 0;
    for record in records {
        let record = record.map_err(|e| TableError::Io(e.into()))?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        row += 1;
        if record.len() != names.len() {
            return Err(TableError::RaggedRow { row });
        }
        for (col, cell) in record.iter().enumerate() {
            let v = parse_number(cell, format.decimal_separator).ok_or(TableError::NonNumeric { row, col: col + 1 })?;
            values[col].push(v);
        }
        let t = values[time_idx][row - 1];
        if time_s.last().is_some_and(|prev| t < *prev) {
            return Err(TableError::NonMonotonicTime { row });
        }
        time_s.push(t);
    }
    if time_s.is_empty() {
        return Err(TableError::EmptyTable);
    }

    let columns = names
        .into_iter()
        .zip(values)
        .enumerate()
        .filter(|(i, _)| *i != time_idx)
        .map(|(_, pair)| pair)
        .collect();
    Ok(TimeSeriesTable { time_s, columns, source_entry_id: None })
}

/// Writes a table with a `time_s` column first, `,` delimited and `.` decimals.
pub fn serialize_table(table: &TimeSeriesTable) -> String {
    let mut writer = csv::WriterBuilder::new().from_writer(Vec::new());
    let header: Vec<&str> = std::iter::once("time_s").chain(table.columns.keys().map(String::as_str)).collect();
    writer.write_record(&header).expect("in-memory write");
    for (i, t) in table.time_s.iter().enumerate() {
        let row: Vec<String> =
            std::iter::once(t.to_string()).chain(table.columns.values().map(|c| c[i].to_string())).collect();
        writer.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubSeries {
    pub entry_id: RecordId,
    pub offset_s: i64,
    #[serde(flatten)]
    pub table: TimeSeriesTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotPayload {
    pub main: TimeSeriesTable,
    pub subs: Vec<SubSeries>,
}

fn load_table(data_root: &Path, entry: &CatalogEntry, config: &TabularConfig) -> Result<TimeSeriesTable, PlotError> {
    if !config.is_tabular(&entry.extension) {
        return Err(PlotError::NotTabular { id: entry.id, extension: entry.extension.clone() });
    }
    let bytes = std::fs::read(data_root.join(&entry.file_path))
        .map_err(|e| PlotError::Table { id: entry.id, source: e.into() })?;
    let mut table = parse_table(&bytes, config.format_for(&entry.device_code))
        .map_err(|source| PlotError::Table { id: entry.id, source })?;
    table.source_entry_id = Some(entry.id);
    Ok(table)
}

/// Main table of an entry plus the tables of its linked sub entries.
/// Linked subs whose files are not tabular are left out.
pub fn plot_payload(
    r: &Reader<'_>,
    data_root: &Path,
    entry_id: RecordId,
    config: &TabularConfig,
) -> Result<PlotPayload, PlotError> {
    let main_entry = r.get_entry(entry_id)?;
    let main = load_table(data_root, &main_entry, config)?;
    let mut subs = Vec::new();
    for link in r.links_from(entry_id, LinkType::MainSub)? {
        let sub = r.get_entry(link.to_id)?;
        if !config.is_tabular(&sub.extension) {
            continue;
        }
        let table = load_table(data_root, &sub, config)?;
        let offset_s = (sub.observed_at - main_entry.observed_at).num_seconds();
        subs.push(SubSeries { entry_id: sub.id, offset_s, table });
    }
    Ok(PlotPayload { main, subs })
}
