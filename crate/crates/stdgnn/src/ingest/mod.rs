//! Event-log ingestion: JSONL parsing, the inactivity filter, and
//! construction of the hourly/daily/weekly snapshot series of a
//! developer collaboration network.
//!
//! The wire format is one JSON object per line:
//!
//! ```text
//! {"bug": "b1", "kind": "report", "from": null, "to": null, "ts": 0, "text": "crash on save", "component": "core"}
//! {"bug": "b1", "kind": "toss",   "from": "d1", "to": "d2", "ts": 10}
//! {"bug": "b1", "kind": "fix",    "from": null, "to": "d2", "ts": 20}
//! ```
//!
//! `component` is optional and only meaningful on report lines; it
//! supplies the attribute labels for the developer-attribute task.

pub mod synth;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, Write};
use std::path::Path;

use chrono::Datelike;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const DEFAULT_MIN_FIXES_PER_YEAR: u32 = 5;

/// Fraction of malformed lines above which a file is rejected outright.
const MALFORMED_FATAL_FRACTION: f64 = 0.10;

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Report,
    Toss,
    Fix,
}

/// One timestamped bug event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub bug_id: String,
    pub kind: EventKind,
    pub from_dev: Option<String>,
    pub to_dev: Option<String>,
    /// Seconds since the Unix epoch, UTC.
    pub ts: u64,
}

/// Preprocessed free-form text plus the tossing path of one bug.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BugReportText {
    pub bug_id: String,
    /// Lowercased, stop-word-filtered tokens; nonempty.
    pub tokens: Vec<String>,
    pub fixer: String,
    /// Developers who held the bug, in order; ends with the fixer.
    pub holder_sequence: Vec<String>,
    /// Report timestamp (start of the bug's lifetime).
    pub reported_ts: u64,
    /// Product component of the bug, when the log carries one.
    pub component: Option<String>,
}

/// A parsed, ordered event log.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventLog {
    /// Sorted by timestamp (stable within ties).
    pub events: Vec<Event>,
    pub reports: BTreeMap<String, BugReportText>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ParseStats {
    pub lines: usize,
    pub malformed: usize,
    pub duplicate_fixes: usize,
    pub bugs_dropped_no_fixer: usize,
    pub bugs_dropped_no_text: usize,
}

impl EventLog {
    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Every developer appearing in an event, sorted.
    pub fn developers(&self) -> Vec<String> {
        let mut set = BTreeSet::new();
        for e in &self.events {
            if let Some(d) = &e.from_dev {
                set.insert(d.clone());
            }
            if let Some(d) = &e.to_dev {
                set.insert(d.clone());
            }
        }
        set.into_iter().collect()
    }

    pub fn span(&self) -> Option<(u64, u64)> {
        let first = self.events.first()?.ts;
        let last = self.events.last()?.ts;
        Some((first, last))
    }

    pub fn toss_count(&self) -> usize {
        self.events.iter().filter(|e| e.kind == EventKind::Toss).count()
    }

    /// Serialize back to the JSONL wire format.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for e in &self.events {
            let mut obj = serde_json::Map::new();
            obj.insert("bug".into(), e.bug_id.clone().into());
            let kind = match e.kind {
                EventKind::Report => "report",
                EventKind::Toss => "toss",
                EventKind::Fix => "fix",
            };
            obj.insert("kind".into(), kind.into());
            obj.insert("from".into(), e.from_dev.clone().into());
            obj.insert("to".into(), e.to_dev.clone().into());
            obj.insert("ts".into(), e.ts.into());
            if e.kind == EventKind::Report {
                if let Some(r) = self.reports.get(&e.bug_id) {
                    obj.insert("text".into(), r.tokens.join(" ").into());
                    if let Some(c) = &r.component {
                        obj.insert("component".into(), c.clone().into());
                    }
                }
            }
            serde_json::to_writer(&mut out, &serde_json::Value::Object(obj))?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Tokenization
// ---------------------------------------------------------------------------

/// Stop words removed from bug-report text.
pub const STOPWORDS: &[&str] = &[
    "a", "about", "after", "all", "also", "an", "and", "any", "are", "as", "at", "be", "because",
    "been", "but", "by", "can", "could", "did", "do", "does", "for", "from", "had", "has", "have",
    "how", "if", "in", "into", "is", "it", "its", "just", "may", "more", "most", "no", "not",
    "of", "on", "only", "or", "other", "our", "out", "over", "should", "so", "some", "such",
    "than", "that", "the", "their", "them", "then", "there", "these", "they", "this", "to",
    "under", "use", "used", "very", "was", "we", "were", "what", "when", "where", "which",
    "while", "who", "will", "with", "would", "you", "your",
];

/// Lowercase, split on non-alphanumerics, drop tokens shorter than two
/// characters and stop words.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.len() >= 2 && !STOPWORDS.contains(t))
        .map(|t| t.to_string())
        .collect()
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
struct RawLine {
    bug: String,
    kind: String,
    #[serde(default)]
    from: Option<String>,
    #[serde(default)]
    to: Option<String>,
    ts: i64,
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    component: Option<String>,
}

/// Parse a JSONL event log from a file.
pub fn parse_events(path: &Path) -> Result<(EventLog, ParseStats)> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    parse_events_from(reader, &path.display().to_string())
}

/// Parse from any line source; `origin` is used in error messages.
pub fn parse_events_from<R: BufRead>(reader: R, origin: &str) -> Result<(EventLog, ParseStats)> {
    let mut stats = ParseStats::default();
    let mut events: Vec<Event> = Vec::new();
    // Raw per-bug text and component, in timestamp order of report lines.
    let mut texts: HashMap<String, Vec<(u64, String)>> = HashMap::new();
    let mut components: HashMap<String, String> = HashMap::new();

    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        stats.lines += 1;
        let raw: RawLine = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(_) => {
                stats.malformed += 1;
                continue;
            }
        };
        if raw.ts < 0 {
            stats.malformed += 1;
            continue;
        }
        let ts = raw.ts as u64;
        let event = match raw.kind.as_str() {
            "report" => {
                let text = match raw.text {
                    Some(t) => t,
                    None => {
                        stats.malformed += 1;
                        continue;
                    }
                };
                texts.entry(raw.bug.clone()).or_default().push((ts, text));
                if let Some(c) = raw.component {
                    components.entry(raw.bug.clone()).or_insert(c);
                }
                Event {
                    bug_id: raw.bug,
                    kind: EventKind::Report,
                    from_dev: None,
                    to_dev: raw.to,
                    ts,
                }
            }
            "toss" => match (raw.from, raw.to) {
                (Some(f), Some(t)) if f != t => Event {
                    bug_id: raw.bug,
                    kind: EventKind::Toss,
                    from_dev: Some(f),
                    to_dev: Some(t),
                    ts,
                },
                _ => {
                    stats.malformed += 1;
                    continue;
                }
            },
            "fix" => match raw.to {
                Some(t) => Event {
                    bug_id: raw.bug,
                    kind: EventKind::Fix,
                    from_dev: raw.from,
                    to_dev: Some(t),
                    ts,
                },
                None => {
                    stats.malformed += 1;
                    continue;
                }
            },
            _ => {
                stats.malformed += 1;
                continue;
            }
        };
        events.push(event);
    }

    if stats.lines > 0 && stats.malformed as f64 > MALFORMED_FATAL_FRACTION * stats.lines as f64 {
        return Err(Error::MalformedInput {
            path: origin.to_string(),
            malformed: stats.malformed,
            total: stats.lines,
        });
    }

    let log = assemble_log(events, texts, components, &mut stats);
    Ok((log, stats))
}

/// Sort raw events, replay each bug's history into a holder sequence,
/// and keep only bugs with a definite fixer and nonempty text. Both the
/// parser and the synthetic generator feed through here so their logs
/// satisfy the same invariants.
pub(crate) fn assemble_log(
    mut events: Vec<Event>,
    mut texts: HashMap<String, Vec<(u64, String)>>,
    mut components: HashMap<String, String>,
    stats: &mut ParseStats,
) -> EventLog {
    events.sort_by_key(|e| e.ts);

    // Replay per bug: holder path, single definite fixer.
    #[derive(Default)]
    struct BugState {
        holders: Vec<String>,
        fixer: Option<String>,
        reported_ts: Option<u64>,
        has_events_after_fix: bool,
    }
    let mut bugs: BTreeMap<String, BugState> = BTreeMap::new();
    let mut kept_events: Vec<Event> = Vec::new();
    for e in events {
        let state = bugs.entry(e.bug_id.clone()).or_default();
        match e.kind {
            EventKind::Report => {
                state.reported_ts.get_or_insert(e.ts);
                if let Some(holder) = &e.to_dev {
                    if state.holders.is_empty() {
                        state.holders.push(holder.clone());
                    }
                }
            }
            EventKind::Toss => {
                if state.fixer.is_some() {
                    state.has_events_after_fix = true;
                    continue;
                }
                let from = e.from_dev.clone().unwrap();
                let to = e.to_dev.clone().unwrap();
                if state.holders.last() != Some(&from) {
                    state.holders.push(from);
                }
                state.holders.push(to);
            }
            EventKind::Fix => {
                if state.fixer.is_some() {
                    stats.duplicate_fixes += 1;
                    continue;
                }
                let fixer = e.to_dev.clone().unwrap();
                if state.holders.last() != Some(&fixer) {
                    state.holders.push(fixer.clone());
                }
                state.fixer = Some(fixer);
            }
        }
        kept_events.push(e);
    }

    // Keep only bugs with a definite fixer and nonempty text.
    let mut reports = BTreeMap::new();
    let mut keep: BTreeSet<String> = BTreeSet::new();
    for (bug_id, state) in &bugs {
        let Some(fixer) = &state.fixer else {
            stats.bugs_dropped_no_fixer += 1;
            continue;
        };
        let mut lines = texts.remove(bug_id).unwrap_or_default();
        lines.sort_by_key(|(ts, _)| *ts);
        let tokens: Vec<String> = lines
            .iter()
            .flat_map(|(_, text)| tokenize(text))
            .collect();
        if tokens.is_empty() {
            stats.bugs_dropped_no_text += 1;
            continue;
        }
        keep.insert(bug_id.clone());
        reports.insert(
            bug_id.clone(),
            BugReportText {
                bug_id: bug_id.clone(),
                tokens,
                fixer: fixer.clone(),
                holder_sequence: state.holders.clone(),
                reported_ts: state.reported_ts.unwrap_or(0),
                component: components.remove(bug_id),
            },
        );
    }
    kept_events.retain(|e| keep.contains(&e.bug_id));

    EventLog {
        events: kept_events,
        reports,
    }
}

// ---------------------------------------------------------------------------
// Inactivity filter
// ---------------------------------------------------------------------------

fn year_of(ts: u64) -> i32 {
    chrono::DateTime::from_timestamp(ts as i64, 0)
        .map(|dt| dt.year())
        .unwrap_or(1970)
}

/// Remove developers who never exceeded `min_fixes_per_year` fixes in
/// any calendar year, drop bugs whose fixer is removed, and drop events
/// touching removed developers. Idempotent: survivors keep all the
/// bugs they fixed, so their yearly counts are unchanged by a second
/// application.
pub fn filter_inactive(log: &EventLog, min_fixes_per_year: u32) -> EventLog {
    let mut per_dev_year: HashMap<(&str, i32), u32> = HashMap::new();
    for e in &log.events {
        if e.kind == EventKind::Fix {
            if let Some(fixer) = &e.to_dev {
                *per_dev_year.entry((fixer, year_of(e.ts))).or_insert(0) += 1;
            }
        }
    }
    let mut survivors: BTreeSet<&str> = BTreeSet::new();
    for ((dev, _year), count) in &per_dev_year {
        if *count > min_fixes_per_year {
            survivors.insert(dev);
        }
    }

    let kept_bugs: BTreeSet<&String> = log
        .reports
        .iter()
        .filter(|(_, r)| survivors.contains(r.fixer.as_str()))
        .map(|(id, _)| id)
        .collect();

    let events = log
        .events
        .iter()
        .filter(|e| {
            if !kept_bugs.contains(&e.bug_id) {
                return false;
            }
            match e.kind {
                EventKind::Report => true,
                // Edges must connect surviving nodes on both ends so that
                // snapshot weights account for every kept toss.
                EventKind::Toss => {
                    survivors.contains(e.from_dev.as_deref().unwrap())
                        && survivors.contains(e.to_dev.as_deref().unwrap())
                }
                EventKind::Fix => survivors.contains(e.to_dev.as_deref().unwrap()),
            }
        })
        .cloned()
        .collect();

    let reports = log
        .reports
        .iter()
        .filter(|(id, _)| kept_bugs.contains(id))
        .map(|(id, r)| (id.clone(), r.clone()))
        .collect();

    EventLog { events, reports }
}

// ---------------------------------------------------------------------------
// Snapshots
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Hourly,
    Daily,
    Weekly,
}

impl Granularity {
    pub fn bin_seconds(self) -> u64 {
        match self {
            Granularity::Hourly => 3_600,
            Granularity::Daily => 86_400,
            Granularity::Weekly => 604_800,
        }
    }
}

/// Dense developer-id vocabulary shared by every snapshot of a series.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    names: Vec<String>,
    index: BTreeMap<String, u32>,
}

impl Vocab {
    pub fn from_names(names: Vec<String>) -> Self {
        let index = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i as u32))
            .collect();
        Vocab { names, index }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<u32> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: u32) -> &str {
        &self.names[id as usize]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// One time slice of the collaboration network.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub index: usize,
    /// Per source node: sorted `(target, weight)` pairs, weight = toss
    /// count within the slice window.
    pub adjacency: Vec<Vec<(u32, u32)>>,
    /// Number of distinct out-neighbors per node.
    pub out_degree: Vec<u32>,
    /// Number of distinct in-neighbors per node.
    pub in_degree: Vec<u32>,
}

impl Snapshot {
    pub fn n_nodes(&self) -> usize {
        self.adjacency.len()
    }

    pub fn total_weight(&self) -> u64 {
        self.adjacency
            .iter()
            .flat_map(|row| row.iter().map(|(_, w)| *w as u64))
            .sum()
    }

    /// Total unweighted degree (in + out), the reputation proxy used by
    /// the degree-preference transition.
    pub fn total_degree(&self, node: u32) -> u32 {
        self.out_degree[node as usize] + self.in_degree[node as usize]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSeries {
    pub granularity: Granularity,
    pub window_len: u32,
    /// Start of the first slice window (seconds since epoch).
    pub start: u64,
    /// Width of one slice window in seconds.
    pub slice_seconds: u64,
    pub snapshots: Vec<Snapshot>,
    pub vocab: Vocab,
}

impl SnapshotSeries {
    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    /// CSV export with header `t,src,dst,weight`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,src,dst,weight")?;
        for snap in &self.snapshots {
            for (src, row) in snap.adjacency.iter().enumerate() {
                for (dst, w) in row {
                    writeln!(
                        out,
                        "{},{},{},{}",
                        snap.index,
                        self.vocab.name(src as u32),
                        self.vocab.name(*dst),
                        w
                    )?;
                }
            }
        }
        Ok(())
    }
}

/// Slice the last `t_slices` windows of the log into snapshots. The
/// window width is `granularity x window_len`; windows are anchored so
/// the final window ends just after the last event.
pub fn build_snapshots(
    log: &EventLog,
    granularity: Granularity,
    window_len: u32,
    t_slices: usize,
) -> Result<SnapshotSeries> {
    if t_slices == 0 {
        return Err(Error::Config("snapshot count must be at least 1".into()));
    }
    if window_len == 0 {
        return Err(Error::Config("window length must be at least 1".into()));
    }
    let (first_ts, last_ts) = log
        .span()
        .ok_or_else(|| Error::EmptyInput("cannot slice an empty event log".into()))?;
    let slice_seconds = granularity.bin_seconds() * window_len as u64;
    // The log must reach into the earliest of the requested windows.
    let required = slice_seconds * (t_slices as u64 - 1) + 1;
    let end = last_ts + 1;
    let actual = end - first_ts;
    if actual < required {
        return Err(Error::ShortSpan {
            required_secs: required,
            actual_secs: actual,
        });
    }
    let start = end.saturating_sub(slice_seconds * t_slices as u64);

    let vocab = Vocab::from_names(log.developers());
    let n = vocab.len();
    let mut weights: Vec<HashMap<(u32, u32), u32>> = vec![HashMap::new(); t_slices];
    for e in &log.events {
        if e.kind != EventKind::Toss || e.ts < start {
            continue;
        }
        let slice = ((e.ts - start) / slice_seconds) as usize;
        debug_assert!(slice < t_slices);
        let src = vocab.id(e.from_dev.as_deref().unwrap()).unwrap();
        let dst = vocab.id(e.to_dev.as_deref().unwrap()).unwrap();
        *weights[slice].entry((src, dst)).or_insert(0) += 1;
    }

    let snapshots = weights
        .into_iter()
        .enumerate()
        .map(|(index, map)| {
            let mut adjacency: Vec<Vec<(u32, u32)>> = vec![Vec::new(); n];
            let mut in_degree = vec![0u32; n];
            let mut out_degree = vec![0u32; n];
            for ((src, dst), w) in map {
                adjacency[src as usize].push((dst, w));
            }
            for (src, row) in adjacency.iter_mut().enumerate() {
                row.sort_by_key(|(dst, _)| *dst);
                out_degree[src] = row.len() as u32;
                for (dst, _) in row.iter() {
                    in_degree[*dst as usize] += 1;
                }
            }
            Snapshot {
                index,
                adjacency,
                out_degree,
                in_degree,
            }
        })
        .collect();

    Ok(SnapshotSeries {
        granularity,
        window_len,
        start,
        slice_seconds,
        snapshots,
        vocab,
    })
}

#[cfg(test)]
mod tests;
