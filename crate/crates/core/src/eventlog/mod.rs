//! Event-log data model, ingestion and preprocessing.
//!
//! An [`EventLog`] is immutable once built: every transformation in this
//! module returns a new log. Events inside a trace are kept sorted by
//! timestamp with ties broken by the order in which they were recorded.

mod csv;
mod xes;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::{DateTime, Duration, TimeZone, Utc};
use serde::Serialize;
use thiserror::Error;

pub use self::csv::{parse_csv, ColumnMapping, TimestampFormat};
pub use self::xes::{parse_xes, write_xes};

/// Metadata key listing the distinct UTC offsets seen in the source timestamps.
pub const META_SOURCE_OFFSETS: &str = "source.utc_offsets";

#[derive(Debug, Error)]
pub enum LogError {
    #[error("XML error at line {line}: {message}")]
    Xml { line: usize, message: String },
    #[error("ingestion error in trace '{trace}': {message}")]
    Ingestion { trace: String, message: String },
    #[error("CSV error at row {row}: {message}")]
    Csv { row: usize, message: String },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("attribute '{key}' has kind {found} but was first seen as {expected}")]
    MixedKinds {
        key: String,
        expected: ValueKind,
        found: ValueKind,
    },
    #[error("duplicate case id '{0}'")]
    DuplicateCase(String),
    #[error("event in trace '{0}' has an empty activity label")]
    EmptyActivity(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueKind {
    Text,
    Integer,
    Real,
    Boolean,
    Timestamp,
}

impl fmt::Display for ValueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ValueKind::Text => "text",
            ValueKind::Integer => "integer",
            ValueKind::Real => "real",
            ValueKind::Boolean => "boolean",
            ValueKind::Timestamp => "timestamp",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for ValueKind {
    type Err = LogError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "text" | "string" => Ok(ValueKind::Text),
            "integer" | "int" => Ok(ValueKind::Integer),
            "real" | "float" => Ok(ValueKind::Real),
            "boolean" | "bool" => Ok(ValueKind::Boolean),
            "timestamp" | "date" => Ok(ValueKind::Timestamp),
            other => Err(LogError::Config(format!("unknown value kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum AttributeValue {
    Text(String),
    Integer(i64),
    Real(f64),
    Boolean(bool),
    Timestamp(DateTime<Utc>),
}

impl AttributeValue {
    pub fn kind(&self) -> ValueKind {
        match self {
            AttributeValue::Text(_) => ValueKind::Text,
            AttributeValue::Integer(_) => ValueKind::Integer,
            AttributeValue::Real(_) => ValueKind::Real,
            AttributeValue::Boolean(_) => ValueKind::Boolean,
            AttributeValue::Timestamp(_) => ValueKind::Timestamp,
        }
    }

    /// Numeric view used by comparisons; integers widen to reals.
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            AttributeValue::Integer(i) => Some(*i as f64),
            AttributeValue::Real(r) => Some(*r),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            AttributeValue::Boolean(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            AttributeValue::Text(s) => Some(s),
            _ => None,
        }
    }

    /// Parse a raw string as the given kind.
    pub fn parse_as(kind: ValueKind, raw: &str) -> Result<Self, String> {
        let raw_trim = raw.trim();
        match kind {
            ValueKind::Text => Ok(AttributeValue::Text(raw.to_string())),
            ValueKind::Integer => raw_trim
                .parse()
                .map(AttributeValue::Integer)
                .map_err(|e| format!("invalid integer '{raw}': {e}")),
            ValueKind::Real => raw_trim
                .parse()
                .map(AttributeValue::Real)
                .map_err(|e| format!("invalid real '{raw}': {e}")),
            ValueKind::Boolean => match raw_trim.to_ascii_lowercase().as_str() {
                "true" => Ok(AttributeValue::Boolean(true)),
                "false" => Ok(AttributeValue::Boolean(false)),
                _ => Err(format!("invalid boolean '{raw}'")),
            },
            ValueKind::Timestamp => DateTime::parse_from_rfc3339(raw_trim)
                .map(|t| AttributeValue::Timestamp(t.with_timezone(&Utc)))
                .map_err(|e| format!("invalid timestamp '{raw}': {e}")),
        }
    }
}

impl fmt::Display for AttributeValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttributeValue::Text(s) => f.write_str(s),
            AttributeValue::Integer(i) => write!(f, "{i}"),
            AttributeValue::Real(r) => write!(f, "{r}"),
            AttributeValue::Boolean(b) => write!(f, "{b}"),
            AttributeValue::Timestamp(t) => write!(f, "{}", format_timestamp(t)),
        }
    }
}

pub(crate) fn format_timestamp(t: &DateTime<Utc>) -> String {
    t.format("%Y-%m-%dT%H:%M:%S%.3f+00:00").to_string()
}

pub type Attributes = BTreeMap<String, AttributeValue>;

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub activity: String,
    pub timestamp: DateTime<Utc>,
    pub attributes: Attributes,
}

impl Event {
    pub fn new(activity: impl Into<String>, timestamp: DateTime<Utc>) -> Self {
        Event {
            activity: activity.into(),
            timestamp,
            attributes: Attributes::new(),
        }
    }

    pub fn with_attribute(mut self, key: impl Into<String>, value: AttributeValue) -> Self {
        self.attributes.insert(key.into(), value);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub case_id: String,
    /// Case-level attributes other than the case identifier.
    pub attributes: Attributes,
    pub events: Vec<Event>,
}

impl Trace {
    pub fn new(case_id: impl Into<String>, mut events: Vec<Event>) -> Self {
        events.sort_by_key(|e| e.timestamp);
        Trace {
            case_id: case_id.into(),
            attributes: Attributes::new(),
            events,
        }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn activities(&self) -> impl Iterator<Item = &str> + '_ {
        self.events.iter().map(|e| e.activity.as_str())
    }

    pub fn labels(&self) -> Vec<String> {
        self.events.iter().map(|e| e.activity.clone()).collect()
    }

    pub fn contains_activity(&self, label: &str) -> bool {
        self.activities().any(|a| a == label)
    }

    /// Last minus first timestamp; zero for traces with fewer than two events.
    pub fn duration(&self) -> Duration {
        match (self.events.first(), self.events.last()) {
            (Some(f), Some(l)) => l.timestamp - f.timestamp,
            _ => Duration::zero(),
        }
    }

    /// Case-level view of an attribute: the trace attribute when present,
    /// otherwise the first event carrying the key.
    pub fn case_attribute(&self, key: &str) -> Option<&AttributeValue> {
        self.attributes
            .get(key)
            .or_else(|| self.events.iter().find_map(|e| e.attributes.get(key)))
    }

    pub fn first_occurrence(&self, label: &str) -> Option<&Event> {
        self.events.iter().find(|e| e.activity == label)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EventLog {
    traces: Vec<Trace>,
    alphabet: BTreeSet<String>,
    metadata: BTreeMap<String, String>,
}

impl EventLog {
    /// Validate and assemble a log. Events are (stably) re-sorted by timestamp.
    pub fn new(mut traces: Vec<Trace>) -> Result<Self, LogError> {
        let mut seen = BTreeSet::new();
        let mut kinds: BTreeMap<String, ValueKind> = BTreeMap::new();
        for trace in &mut traces {
            if !seen.insert(trace.case_id.clone()) {
                return Err(LogError::DuplicateCase(trace.case_id.clone()));
            }
            trace.events.sort_by_key(|e| e.timestamp);
            let attrs = trace
                .attributes
                .iter()
                .chain(trace.events.iter().flat_map(|e| e.attributes.iter()));
            for (key, value) in attrs {
                let kind = value.kind();
                match kinds.get(key) {
                    Some(&expected) if expected != kind => {
                        return Err(LogError::MixedKinds {
                            key: key.clone(),
                            expected,
                            found: kind,
                        })
                    }
                    Some(_) => {}
                    None => {
                        kinds.insert(key.clone(), kind);
                    }
                }
            }
            if trace.events.iter().any(|e| e.activity.is_empty()) {
                return Err(LogError::EmptyActivity(trace.case_id.clone()));
            }
        }
        Ok(Self::from_parts_unchecked(traces, BTreeMap::new()))
    }

    fn from_parts_unchecked(traces: Vec<Trace>, metadata: BTreeMap<String, String>) -> Self {
        let alphabet = traces
            .iter()
            .flat_map(|t| t.events.iter().map(|e| e.activity.clone()))
            .collect();
        EventLog {
            traces,
            alphabet,
            metadata,
        }
    }

    /// Build a log from bare activity sequences; case ids are `0`, `1`, ...
    /// and events are spaced one minute apart from the Unix epoch.
    pub fn from_sequences<S: AsRef<str>>(sequences: &[Vec<S>]) -> Self {
        let base = Utc.timestamp_opt(0, 0).unwrap();
        let traces = sequences
            .iter()
            .enumerate()
            .map(|(i, seq)| {
                let events = seq
                    .iter()
                    .enumerate()
                    .map(|(j, a)| Event::new(a.as_ref(), base + Duration::minutes(j as i64)))
                    .collect();
                Trace::new(i.to_string(), events)
            })
            .collect();
        Self::from_parts_unchecked(traces, BTreeMap::new())
    }

    pub fn with_metadata(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.metadata.insert(key.into(), value.into());
        self
    }

    pub fn traces(&self) -> &[Trace] {
        &self.traces
    }

    pub fn alphabet(&self) -> &BTreeSet<String> {
        &self.alphabet
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    pub fn len(&self) -> usize {
        self.traces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }

    pub fn event_count(&self) -> usize {
        self.traces.iter().map(Trace::len).sum()
    }

    /// Kind of every attribute key present in the log.
    pub fn schema(&self) -> BTreeMap<String, ValueKind> {
        let mut out = BTreeMap::new();
        for t in &self.traces {
            for (k, v) in t
                .attributes
                .iter()
                .chain(t.events.iter().flat_map(|e| e.attributes.iter()))
            {
                out.entry(k.clone()).or_insert(v.kind());
            }
        }
        out
    }

    fn map_traces(&self, f: impl FnMut(&Trace) -> Trace) -> EventLog {
        Self::from_parts_unchecked(self.traces.iter().map(f).collect(), self.metadata.clone())
    }

    /// Remove every event whose activity is not in `keep`. Empty traces stay.
    pub fn project(&self, keep: &BTreeSet<String>) -> EventLog {
        self.map_traces(|t| Trace {
            case_id: t.case_id.clone(),
            attributes: t.attributes.clone(),
            events: t
                .events
                .iter()
                .filter(|e| keep.contains(&e.activity))
                .cloned()
                .collect(),
        })
    }

    pub fn filter_cases(&self, mut predicate: impl FnMut(&Trace) -> bool) -> EventLog {
        Self::from_parts_unchecked(
            self.traces.iter().filter(|t| predicate(t)).cloned().collect(),
            self.metadata.clone(),
        )
    }

    /// Rename activities (and attribute keys) according to `aliases`.
    pub fn rename(&self, aliases: &BTreeMap<String, String>) -> EventLog {
        let rename = |s: &String| aliases.get(s).cloned().unwrap_or_else(|| s.clone());
        let rename_attrs = |attrs: &Attributes| -> Attributes {
            attrs.iter().map(|(k, v)| (rename(k), v.clone())).collect()
        };
        self.map_traces(|t| Trace {
            case_id: t.case_id.clone(),
            attributes: rename_attrs(&t.attributes),
            events: t
                .events
                .iter()
                .map(|e| Event {
                    activity: rename(&e.activity),
                    timestamp: e.timestamp,
                    attributes: rename_attrs(&e.attributes),
                })
                .collect(),
        })
    }

    /// Repair missing attribute values per trace and key: values carry forward
    /// until the next recorded value, and events before the first recording
    /// take that first value.
    pub fn fill_missing(&self, keys: &BTreeSet<String>) -> (EventLog, FillReport) {
        let mut report = FillReport::default();
        let log = self.map_traces(|t| {
            let mut trace = t.clone();
            for key in keys {
                let Some(first) = trace
                    .events
                    .iter()
                    .position(|e| e.attributes.contains_key(key))
                else {
                    report.untouched.push((t.case_id.clone(), key.clone()));
                    continue;
                };
                let mut current = trace.events[first].attributes[key].clone();
                for event in trace.events.iter_mut().skip(first) {
                    match event.attributes.get(key) {
                        Some(v) => current = v.clone(),
                        None => {
                            event.attributes.insert(key.clone(), current.clone());
                            report.filled += 1;
                        }
                    }
                }
                let first_value = trace.events[first].attributes[key].clone();
                for event in trace.events.iter_mut().take(first) {
                    event.attributes.insert(key.clone(), first_value.clone());
                    report.filled += 1;
                }
            }
            trace
        });
        (log, report)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FillReport {
    /// Number of attribute cells that received a value.
    pub filled: usize,
    /// `(case id, key)` pairs where the key is never recorded in the trace.
    pub untouched: Vec<(String, String)>,
}

/// Variant multiset: distinct activity sequences with their frequencies.
///
/// Ordering of the underlying map makes every consumer independent of the
/// order in which traces appeared in the source log.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ActivityLog {
    variants: BTreeMap<Vec<String>, usize>,
}

impl ActivityLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, trace: Vec<String>, count: usize) {
        if count > 0 {
            *self.variants.entry(trace).or_insert(0) += count;
        }
    }

    pub fn from_sequences<S: AsRef<str>>(sequences: &[Vec<S>]) -> Self {
        let mut log = ActivityLog::new();
        for seq in sequences {
            log.add(seq.iter().map(|s| s.as_ref().to_string()).collect(), 1);
        }
        log
    }

    pub fn variants(&self) -> impl Iterator<Item = (&[String], usize)> + '_ {
        self.variants.iter().map(|(k, &v)| (k.as_slice(), v))
    }

    pub fn trace_count(&self) -> usize {
        self.variants.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.variants.is_empty()
    }

    pub fn alphabet(&self) -> BTreeSet<String> {
        self.variants.keys().flatten().cloned().collect()
    }

    pub fn empty_trace_count(&self) -> usize {
        self.variants.get(&Vec::new()).copied().unwrap_or(0)
    }

    pub fn without_empty_traces(&self) -> ActivityLog {
        let mut out = self.clone();
        out.variants.remove(&Vec::new());
        out
    }

    pub fn project(&self, keep: &BTreeSet<String>) -> ActivityLog {
        let mut out = ActivityLog::new();
        for (trace, count) in self.variants() {
            out.add(
                trace.iter().filter(|a| keep.contains(*a)).cloned().collect(),
                count,
            );
        }
        out
    }
}

impl From<&EventLog> for ActivityLog {
    fn from(log: &EventLog) -> Self {
        let mut out = ActivityLog::new();
        for t in log.traces() {
            out.add(t.labels(), 1);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq_log(seqs: &[&[&str]]) -> EventLog {
        let owned: Vec<Vec<&str>> = seqs.iter().map(|s| s.to_vec()).collect();
        EventLog::from_sequences(&owned)
    }

    fn labels(log: &EventLog) -> Vec<Vec<String>> {
        log.traces().iter().map(Trace::labels).collect()
    }

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn project_keeps_selected_activities() {
        let log = seq_log(&[&["a", "b", "c"]]);
        assert_eq!(labels(&log.project(&set(&["a", "c"]))), vec![vec!["a", "c"]]);
    }

    #[test]
    fn project_retains_empty_traces() {
        let log = seq_log(&[&["b"]]);
        let p = log.project(&set(&["a"]));
        assert_eq!(p.len(), 1);
        assert!(p.traces()[0].is_empty());
        assert!(p.alphabet().is_empty());
    }

    #[test]
    fn project_two_traces() {
        let log = seq_log(&[&["a", "b"], &["b", "a"]]);
        assert_eq!(
            labels(&log.project(&set(&["a"]))),
            vec![vec!["a"], vec!["a"]]
        );
    }

    #[test]
    fn project_full_alphabet_is_identity() {
        let log = seq_log(&[&["a", "b"], &["c"]]);
        assert_eq!(log.project(log.alphabet()), log);
        let none = log.project(&BTreeSet::new());
        assert_eq!(none.len(), 2);
        assert!(none.traces().iter().all(Trace::is_empty));
    }

    #[test]
    fn filter_cases_variants() {
        let log = seq_log(&[&["a"], &["a", "IV Antibiotics"]]);
        assert_eq!(log.filter_cases(|_| true), log);
        assert!(log.filter_cases(|_| false).is_empty());
        let f = log.filter_cases(|t| t.contains_activity("IV Antibiotics"));
        assert_eq!(f.len(), 1);
        assert_eq!(f.traces()[0].case_id, "1");
    }

    #[test]
    fn events_sorted_stably_by_timestamp() {
        let t0 = Utc.timestamp_opt(100, 0).unwrap();
        let t1 = Utc.timestamp_opt(50, 0).unwrap();
        let log = EventLog::new(vec![Trace::new(
            "c",
            vec![Event::new("x", t0), Event::new("y", t1), Event::new("z", t0)],
        )])
        .unwrap();
        assert_eq!(labels(&log), vec![vec!["y", "x", "z"]]);
    }

    #[test]
    fn duplicate_case_rejected() {
        let t = Trace::new("a", vec![]);
        assert!(matches!(
            EventLog::new(vec![t.clone(), t]),
            Err(LogError::DuplicateCase(_))
        ));
    }

    #[test]
    fn mixed_kinds_rejected() {
        let ts = Utc.timestamp_opt(0, 0).unwrap();
        let t = Trace::new(
            "a",
            vec![
                Event::new("x", ts).with_attribute("k", AttributeValue::Integer(1)),
                Event::new("y", ts).with_attribute("k", AttributeValue::Text("1".into())),
            ],
        );
        assert!(matches!(
            EventLog::new(vec![t]),
            Err(LogError::MixedKinds { .. })
        ));
    }

    fn crp_trace(values: &[Option<f64>]) -> EventLog {
        let base = Utc.timestamp_opt(0, 0).unwrap();
        let events = values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let e = Event::new("e", base + Duration::minutes(i as i64));
                match v {
                    Some(x) => e.with_attribute("CRP", AttributeValue::Real(*x)),
                    None => e,
                }
            })
            .collect();
        EventLog::new(vec![Trace::new("c", events)]).unwrap()
    }

    fn crp_values(log: &EventLog) -> Vec<Option<f64>> {
        log.traces()[0]
            .events
            .iter()
            .map(|e| e.attributes.get("CRP").and_then(AttributeValue::as_f64))
            .collect()
    }

    #[test]
    fn fill_missing_forward_then_backward() {
        // values at event 3 and event 7 (1-based)
        let mut vals = vec![None; 9];
        vals[2] = Some(1.0);
        vals[6] = Some(2.0);
        let (filled, report) = crp_trace(&vals).fill_missing(&set(&["CRP"]));
        let expected: Vec<Option<f64>> = [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 2.0, 2.0, 2.0]
            .iter()
            .map(|v| Some(*v))
            .collect();
        assert_eq!(crp_values(&filled), expected);
        assert_eq!(report.filled, 7);
        assert!(report.untouched.is_empty());
    }

    #[test]
    fn fill_missing_noop_when_complete() {
        let log = crp_trace(&[Some(1.0), Some(2.0)]);
        let (filled, report) = log.fill_missing(&set(&["CRP"]));
        assert_eq!(filled, log);
        assert_eq!(report.filled, 0);
    }

    #[test]
    fn fill_missing_reports_untouched() {
        let log = crp_trace(&[None, None]);
        let (filled, report) = log.fill_missing(&set(&["CRP"]));
        assert_eq!(filled, log);
        assert_eq!(report.untouched, vec![("c".to_string(), "CRP".to_string())]);
    }

    #[test]
    fn activity_log_counts_variants() {
        let log = seq_log(&[&["a", "b"], &["a", "b"], &[]]);
        let al = ActivityLog::from(&log);
        assert_eq!(al.trace_count(), 3);
        assert_eq!(al.empty_trace_count(), 1);
        assert_eq!(al.without_empty_traces().trace_count(), 2);
    }
}
