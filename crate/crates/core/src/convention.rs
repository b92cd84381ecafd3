//! Folder and filename grammar.
//!
//! A conforming data file lives at
//!
//! ```text
//! <tree root>/<device folder>/<YYYYMMDD>/<sample folder>/<HHMMSS>_<description>.<ext>
//! ```
//!
//! for example `01_Main_Exp/01_OCA_35_XL/20210201/Probe_BA_01/171700_osz_wasser_laengest.png`.
//! The device folder contributes a three-letter device code (`OCA`), the date
//! folder the calendar day, the sample folder a sample code (`BA_01`) and the
//! filename the time of day plus a free-text description.
//!
//! Everything in here is pure: parsing never touches the filesystem, with the
//! single exception of [`file_mtime`], which reads a modification time for the
//! fallback rule.

use std::fmt;
use std::path::Path;
use std::sync::OnceLock;
use std::time::SystemTime;

use chrono::{DateTime, Local, NaiveDate, NaiveDateTime, NaiveTime, Timelike};
use regex::Regex;
use serde::{Deserialize, Serialize};

/// Which tree a file belongs to: the main instrument or a supporting one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeKind {
    Main,
    Sub,
}

impl TreeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TreeKind::Main => "main",
            TreeKind::Sub => "sub",
        }
    }
}

impl fmt::Display for TreeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TreeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "main" => Ok(TreeKind::Main),
            "sub" => Ok(TreeKind::Sub),
            other => Err(format!("unknown tree kind `{other}` (expected main or sub)")),
        }
    }
}

/// Grammar for one tree. `root_marker` is the path segment that names the
/// tree root (e.g. `01_Main_Exp`); the four segments following it are the
/// device folder, date folder, sample folder and filename.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathGrammar {
    pub root_marker: String,
    pub tree_kind: TreeKind,
}

impl PathGrammar {
    pub fn new(root_marker: impl Into<String>, tree_kind: TreeKind) -> Self {
        PathGrammar { root_marker: root_marker.into(), tree_kind }
    }
}

/// Metadata recovered from a conforming path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedFileMeta {
    pub device_code: String,
    pub sample_name: String,
    /// Date of the date folder; always present, even when the filename carries no time.
    pub date: NaiveDate,
    /// Date folder combined with the filename's `HHMMSS` prefix, if there is one.
    pub observed_at: Option<NaiveDateTime>,
    pub description: String,
    pub extension: String,
    pub relative_path: String,
}

/// The path segment a [`ParseFailure`] points at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Segment {
    Root,
    Device,
    Date,
    Sample,
    Filename,
}

impl fmt::Display for Segment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Segment::Root => "root segment",
            Segment::Device => "device segment",
            Segment::Date => "date segment",
            Segment::Sample => "sample segment",
            Segment::Filename => "filename",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize, Deserialize)]
#[error("{segment}: {reason}")]
pub struct ParseFailure {
    pub segment: Segment,
    pub reason: String,
}

impl ParseFailure {
    fn new(segment: Segment, reason: impl Into<String>) -> Self {
        ParseFailure { segment, reason: reason.into() }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("file modification time is not available")]
pub struct UnreadableMetadata;

fn sample_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^[A-Z]{2}_[0-9]{2}$").unwrap())
}

fn device_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^[A-Z]{3}$").unwrap())
}

/// `true` iff `name` is two capital letters, an underscore and two digits (`CC_01`).
pub fn validate_sample_name(name: &str) -> bool {
    sample_regex().is_match(name)
}

/// `true` iff `code` is exactly three capital letters (`OCA`).
pub fn validate_device_code(code: &str) -> bool {
    device_regex().is_match(code)
}

/// Finds the first sample code inside a folder name such as `Probe_BA_01`.
///
/// A match must not be glued to further letters or digits, so `XBA_01` and
/// `BA_012` contain no sample code.
pub fn extract_sample(segment: &str) -> Result<String, ParseFailure> {
    let bytes = segment.as_bytes();
    let is_word = |b: u8| b.is_ascii_alphanumeric();
    for start in 0..bytes.len() {
        let end = start + 5;
        if end > bytes.len() {
            break;
        }
        if start > 0 && is_word(bytes[start - 1]) {
            continue;
        }
        if end < bytes.len() && is_word(bytes[end]) {
            continue;
        }
        let w = &bytes[start..end];
        if w[0].is_ascii_uppercase()
            && w[1].is_ascii_uppercase()
            && w[2] == b'_'
            && w[3].is_ascii_digit()
            && w[4].is_ascii_digit()
        {
            return Ok(segment[start..end].to_string());
        }
    }
    Err(ParseFailure::new(Segment::Sample, format!("no sample code in `{segment}`")))
}

/// Splits a device folder such as `01_OCA_35_XL` into its device code and the
/// verbatim remainder after it (`35_XL`).
pub fn split_device_folder(segment: &str) -> Result<(String, String), ParseFailure> {
    let tokens: Vec<&str> = segment.split('_').collect();
    let hits: Vec<usize> =
        tokens.iter().enumerate().filter(|(_, t)| validate_device_code(t)).map(|(i, _)| i).collect();
    match hits.as_slice() {
        [i] => Ok((tokens[*i].to_string(), tokens[i + 1..].join("_"))),
        [] => Err(ParseFailure::new(Segment::Device, format!("no device code in `{segment}`"))),
        _ => Err(ParseFailure::new(
            Segment::Device,
            format!("ambiguous device code in `{segment}`: {} candidates", hits.len()),
        )),
    }
}

fn parse_date_segment(segment: &str) -> Result<NaiveDate, ParseFailure> {
    if segment.len() != 8 || !segment.bytes().all(|b| b.is_ascii_digit()) {
        return Err(ParseFailure::new(Segment::Date, format!("`{segment}` is not YYYYMMDD")));
    }
    let year: i32 = segment[0..4].parse().unwrap();
    let month: u32 = segment[4..6].parse().unwrap();
    let day: u32 = segment[6..8].parse().unwrap();
    NaiveDate::from_ymd_opt(year, month, day).ok_or_else(|| {
        ParseFailure::new(Segment::Date, format!("`{segment}` is not a valid calendar date"))
    })
}

/// Time prefix, description and extension of a filename.
fn parse_filename(name: &str) -> Result<(Option<NaiveTime>, String, String), ParseFailure> {
    let (stem, ext) = match name.rfind('.') {
        Some(dot) if dot + 1 < name.len() => (&name[..dot], &name[dot + 1..]),
        _ => return Err(ParseFailure::new(Segment::Filename, format!("`{name}` has no extension"))),
    };

    let bytes = stem.as_bytes();
    let has_prefix = bytes.len() >= 6
        && bytes[..6].iter().all(u8::is_ascii_digit)
        && (bytes.len() == 6 || bytes[6] == b'_');

    let (time, description) = if has_prefix {
        let h: u32 = stem[0..2].parse().unwrap();
        let m: u32 = stem[2..4].parse().unwrap();
        let s: u32 = stem[4..6].parse().unwrap();
        let time = NaiveTime::from_hms_opt(h, m, s).ok_or_else(|| {
            ParseFailure::new(Segment::Filename, format!("`{}` is not a valid HHMMSS time", &stem[..6]))
        })?;
        let rest = if bytes.len() > 6 { &stem[7..] } else { "" };
        (Some(time), rest)
    } else {
        (None, stem)
    };

    if description.is_empty() {
        return Err(ParseFailure::new(Segment::Filename, format!("`{name}` has an empty description")));
    }
    Ok((time, description.to_string(), ext.to_ascii_lowercase()))
}

fn normalize(relative_path: &str) -> String {
    relative_path.replace('\\', "/")
}

/// Parses a path relative to the data root into file metadata.
///
/// The grammar's root marker may be preceded by arbitrary segments; exactly
/// four segments must follow it.
pub fn parse_path(relative_path: &str, grammar: &PathGrammar) -> Result<ParsedFileMeta, ParseFailure> {
    let normalized = normalize(relative_path);
    let segments: Vec<&str> = normalized.split('/').filter(|s| !s.is_empty() && *s != ".").collect();

    let root = segments.iter().position(|s| *s == grammar.root_marker).ok_or_else(|| {
        ParseFailure::new(Segment::Root, format!("`{}` not found in path", grammar.root_marker))
    })?;
    let below = &segments[root + 1..];
    if below.len() != 4 {
        let seg = if below.len() < 4 { Segment::Root } else { Segment::Sample };
        return Err(ParseFailure::new(
            seg,
            format!("expected 4 segments below `{}`, found {}", grammar.root_marker, below.len()),
        ));
    }

    let (device_code, _variant) = split_device_folder(below[0])?;
    let date = parse_date_segment(below[1])?;
    let sample_name = extract_sample(below[2])?;
    let (time, description, extension) = parse_filename(below[3])?;

    Ok(ParsedFileMeta {
        device_code,
        sample_name,
        date,
        observed_at: time.map(|t| date.and_time(t)),
        description,
        extension,
        relative_path: segments.join("/"),
    })
}

/// Timestamp for a file whose name carries no time: the date folder's day at
/// the wall-clock time of the modification timestamp.
pub fn fallback_time(
    modified: Option<NaiveDateTime>,
    date_folder: NaiveDate,
) -> Result<NaiveDateTime, UnreadableMetadata> {
    let modified = modified.ok_or(UnreadableMetadata)?;
    Ok(date_folder.and_time(modified.time().with_nanosecond(0).unwrap()))
}

/// Local, naive modification time of a file, or `None` if the filesystem has none.
pub fn file_mtime(path: &Path) -> Option<NaiveDateTime> {
    let modified: SystemTime = std::fs::metadata(path).ok()?.modified().ok()?;
    Some(DateTime::<Local>::from(modified).naive_local())
}

/// Renders metadata back into a conforming path below `grammar.root_marker`.
///
/// `device_folder` and `sample_folder` are the literal folder names; the date
/// folder and filename are produced from `meta`.
pub fn render_path(
    grammar: &PathGrammar,
    device_folder: &str,
    sample_folder: &str,
    meta: &ParsedFileMeta,
) -> String {
    let filename = match meta.observed_at {
        Some(t) => format!("{}_{}.{}", t.format("%H%M%S"), meta.description, meta.extension),
        None => format!("{}.{}", meta.description, meta.extension),
    };
    format!(
        "{}/{}/{}/{}/{}",
        grammar.root_marker,
        device_folder,
        meta.date.format("%Y%m%d"),
        sample_folder,
        filename
    )
}
