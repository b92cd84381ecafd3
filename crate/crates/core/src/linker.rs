//! Time-and-sample correlation between main entries, sub entries and notes.
//!
//! A sub entry is auto-linked to at most one main entry: among all main
//! entries of the same sample whose window `[t - pre, t + post]` contains the
//! sub's timestamp, the one with the nearest timestamp wins, ties going to the
//! earlier main. Manual links are never touched by the automatic rules.

use chrono::{Duration, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::catalog::{
    CatalogEntry, CatalogError, EntryKind, HistoryItem, Link, LinkOrigin, LinkType, Note, Reader, Writer,
};

/// Correlation windows in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinkWindows {
    pub sub_pre_s: i64,
    pub sub_post_s: i64,
    pub note_window_s: i64,
}

impl Default for LinkWindows {
    fn default() -> Self {
        LinkWindows { sub_pre_s: 0, sub_post_s: 2 * 3600, note_window_s: 12 * 3600 }
    }
}

impl LinkWindows {
    pub fn sub_pre(&self) -> Duration {
        Duration::seconds(self.sub_pre_s)
    }

    pub fn sub_post(&self) -> Duration {
        Duration::seconds(self.sub_post_s)
    }

    pub fn note_window(&self) -> Duration {
        Duration::seconds(self.note_window_s)
    }

    /// Whether a sub at `sub_at` falls in the window of a main at `main_at`.
    pub fn sub_in_window(&self, main_at: NaiveDateTime, sub_at: NaiveDateTime) -> bool {
        sub_at >= main_at - self.sub_pre() && sub_at <= main_at + self.sub_post()
    }
}

/// Ordering key for competing mains: distance, then main time, then id.
pub fn nearest_key(main: &CatalogEntry, sub_at: NaiveDateTime) -> (i64, NaiveDateTime, i64) {
    ((sub_at - main.observed_at).num_seconds().abs(), main.observed_at, main.id)
}

/// The main entry a sub should be auto-linked to, if any.
pub fn best_main(r: &Reader<'_>, sub: &CatalogEntry, windows: &LinkWindows) -> Result<Option<CatalogEntry>, CatalogError> {
    // main window contains sub  <=>  main time in [sub - post, sub + pre]
    let mains = r.entries_in_window(
        &sub.sample_name,
        EntryKind::Main,
        sub.observed_at - windows.sub_post(),
        sub.observed_at + windows.sub_pre(),
    )?;
    Ok(mains.into_iter().min_by_key(|m| nearest_key(m, sub.observed_at)))
}

/// Points the automatic main link of `sub` at `main`, dropping automatic
/// links to any other main. Returns the link if it was newly created.
fn assign(w: &Writer<'_>, main: &CatalogEntry, sub: &CatalogEntry) -> Result<Option<Link>, CatalogError> {
    for stale in w.links_to(sub.id, LinkType::MainSub)? {
        if stale.created_by == LinkOrigin::Auto && stale.from_id != main.id {
            w.remove_link(stale.id)?;
        }
    }
    w.ensure_link(main.id, sub.id, LinkType::MainSub, LinkOrigin::Auto)
}

/// Links every sub within the window of `main` for which `main` is the nearest main.
pub fn auto_link_subs(w: &Writer<'_>, main: &CatalogEntry, windows: &LinkWindows) -> Result<Vec<Link>, CatalogError> {
    if main.kind != EntryKind::Main {
        return Ok(Vec::new());
    }
    let subs = w.entries_in_window(
        &main.sample_name,
        EntryKind::Sub,
        main.observed_at - windows.sub_pre(),
        main.observed_at + windows.sub_post(),
    )?;
    if subs.is_empty() {
        return Ok(Vec::new());
    }
    // every competitor of `main` for these subs lies in this range
    let rivals = w.entries_in_window(
        &main.sample_name,
        EntryKind::Main,
        main.observed_at - windows.sub_pre() - windows.sub_post(),
        main.observed_at + windows.sub_post() + windows.sub_pre(),
    )?;
    let mut created = Vec::new();
    for sub in subs {
        let best = rivals
            .iter()
            .filter(|m| windows.sub_in_window(m.observed_at, sub.observed_at))
            .min_by_key(|m| nearest_key(m, sub.observed_at));
        if best.is_some_and(|b| b.id == main.id) {
            created.extend(assign(w, main, &sub)?);
        }
    }
    Ok(created)
}

/// Links a newly ingested sub to its nearest main, if one covers it.
pub fn auto_link_sub(w: &Writer<'_>, sub: &CatalogEntry, windows: &LinkWindows) -> Result<Option<Link>, CatalogError> {
    if sub.kind != EntryKind::Sub {
        return Ok(None);
    }
    match best_main(w, sub, windows)? {
        Some(main) => assign(w, &main, sub),
        None => Ok(None),
    }
}

/// Links notes of the entry's sample written within `window` of the entry.
pub fn auto_link_notes(w: &Writer<'_>, entry: &CatalogEntry, window: Duration) -> Result<Vec<Link>, CatalogError> {
    let notes = w.notes_in_window(&entry.sample_name, entry.observed_at - window, entry.observed_at + window)?;
    let mut created = Vec::new();
    for note in notes {
        created.extend(w.ensure_link(entry.id, note.id, LinkType::EntryNote, LinkOrigin::Auto)?);
    }
    Ok(created)
}

/// Links a new note to every entry of its sample within `window`.
pub fn auto_link_note(w: &Writer<'_>, note: &Note, window: Duration) -> Result<Vec<Link>, CatalogError> {
    let mut created = Vec::new();
    for kind in [EntryKind::Main, EntryKind::Sub] {
        for entry in w.entries_in_window(&note.sample_name, kind, note.written_at - window, note.written_at + window)? {
            created.extend(w.ensure_link(entry.id, note.id, LinkType::EntryNote, LinkOrigin::Auto)?);
        }
    }
    Ok(created)
}

/// Runs the automatic rules for one freshly created entry.
pub fn link_new_entry(w: &Writer<'_>, entry: &CatalogEntry, windows: &LinkWindows) -> Result<Vec<Link>, CatalogError> {
    let mut links = match entry.kind {
        EntryKind::Main => auto_link_subs(w, entry, windows)?,
        EntryKind::Sub => auto_link_sub(w, entry, windows)?.into_iter().collect(),
    };
    links.extend(auto_link_notes(w, entry, windows.note_window())?);
    Ok(links)
}

/// Chronological entries and notes of one sample.
pub fn sample_history(r: &Reader<'_>, sample: &str) -> Result<Vec<HistoryItem>, CatalogError> {
    r.sample_history(sample)
}
