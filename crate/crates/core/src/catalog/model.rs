use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::convention::TreeKind;

/// Persistent record identifier. Entries and notes draw from one sequence,
/// so an id names exactly one record.
pub type RecordId = i64;

pub type EntryKind = TreeKind;

/// One main- or sub-experiment. The named fields are common to every
/// experiment; anything device specific lives in `extra`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub id: RecordId,
    pub kind: EntryKind,
    pub device_code: String,
    pub sample_name: String,
    pub observed_at: NaiveDateTime,
    pub file_path: String,
    pub description: String,
    pub extension: String,
    pub extra: BTreeMap<String, String>,
    pub created_at: NaiveDateTime,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub name: String,
    pub kind: String,
    pub properties: BTreeMap<String, String>,
    pub created_at: NaiveDateTime,
}

/// Where the files of one device live and which extensions count as data.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathRule {
    pub device_code: String,
    pub tree_kind: TreeKind,
    /// Directory of the device, relative to the data root (`01_Main_Exp/01_OCA_35_XL`).
    pub root_subpath: String,
    pub allowed_extensions: BTreeSet<String>,
    #[serde(default)]
    pub instrument_variant: String,
}

impl PathRule {
    pub fn allows(&self, extension: &str) -> bool {
        self.allowed_extensions.contains(&extension.to_ascii_lowercase())
    }

    /// Root subpath with normalized separators and no leading/trailing slash.
    pub fn normalized_root(&self) -> String {
        self.root_subpath.replace('\\', "/").trim_matches('/').to_string()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathRuleSet {
    pub rules: Vec<PathRule>,
}

impl PathRuleSet {
    pub fn find(&self, device_code: &str, kind: TreeKind) -> Option<&PathRule> {
        self.rules.iter().find(|r| r.device_code == device_code && r.tree_kind == kind)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Note {
    pub id: RecordId,
    pub sample_name: String,
    pub written_at: NaiveDateTime,
    pub body: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkType {
    MainSub,
    EntryNote,
    EntryAnalysis,
    EntryEntry,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkOrigin {
    Auto,
    Manual,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Link {
    pub id: i64,
    pub from_id: RecordId,
    pub to_id: RecordId,
    pub link_type: LinkType,
    pub created_by: LinkOrigin,
}

macro_rules! str_enum {
    ($ty:ty { $($variant:path => $s:literal),+ $(,)? }) => {
        impl $ty {
            pub fn as_str(self) -> &'static str {
                match self { $($variant => $s),+ }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $ty {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $($s => Ok($variant),)+
                    other => Err(format!("unknown {} `{other}`", stringify!($ty))),
                }
            }
        }
    };
}

str_enum!(LinkType {
    LinkType::MainSub => "main_sub",
    LinkType::EntryNote => "entry_note",
    LinkType::EntryAnalysis => "entry_analysis",
    LinkType::EntryEntry => "entry_entry",
});

str_enum!(LinkOrigin {
    LinkOrigin::Auto => "auto",
    LinkOrigin::Manual => "manual",
});

/// Inclusive time interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeRange {
    pub start: NaiveDateTime,
    pub end: NaiveDateTime,
}

/// Conjunctive entry filter; absent fields match everything.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntryFilter {
    pub sample: Option<String>,
    pub device: Option<String>,
    pub kind: Option<EntryKind>,
    pub time_range: Option<TimeRange>,
    /// Case-insensitive substring of the description or of any linked note body.
    pub text: Option<String>,
    pub extra_key_value: Option<(String, String)>,
}

/// One item of a sample's history.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum HistoryItem {
    Entry(CatalogEntry),
    Note(Note),
}

impl HistoryItem {
    pub fn timestamp(&self) -> NaiveDateTime {
        match self {
            HistoryItem::Entry(e) => e.observed_at,
            HistoryItem::Note(n) => n.written_at,
        }
    }

    pub fn id(&self) -> RecordId {
        match self {
            HistoryItem::Entry(e) => e.id,
            HistoryItem::Note(n) => n.id,
        }
    }
}

/// Full dump of catalog content, used for equality checks and export.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogSnapshot {
    pub samples: Vec<Sample>,
    pub rules: PathRuleSet,
    pub entries: Vec<CatalogEntry>,
    pub notes: Vec<Note>,
    pub links: Vec<Link>,
}
