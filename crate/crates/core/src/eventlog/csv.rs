use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use chrono::{DateTime, NaiveDateTime, Utc};

use super::{AttributeValue, Event, EventLog, LogError, Trace, ValueKind};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TimestampFormat {
    /// RFC 3339 / ISO 8601 with offset.
    Rfc3339,
    /// A chrono `strftime` pattern. Patterns without an offset are read as UTC.
    Pattern(String),
}

impl TimestampFormat {
    pub fn parse(&self, raw: &str) -> Result<DateTime<Utc>, String> {
        let raw = raw.trim();
        match self {
            TimestampFormat::Rfc3339 => DateTime::parse_from_rfc3339(raw)
                .map(|t| t.with_timezone(&Utc))
                .map_err(|e| e.to_string()),
            TimestampFormat::Pattern(p) => match DateTime::parse_from_str(raw, p) {
                Ok(t) => Ok(t.with_timezone(&Utc)),
                Err(_) => NaiveDateTime::parse_from_str(raw, p)
                    .map(|n| n.and_utc())
                    .map_err(|e| e.to_string()),
            },
        }
    }
}

impl From<&str> for TimestampFormat {
    fn from(s: &str) -> Self {
        if s.eq_ignore_ascii_case("rfc3339") || s.eq_ignore_ascii_case("iso8601") {
            TimestampFormat::Rfc3339
        } else {
            TimestampFormat::Pattern(s.to_string())
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnMapping {
    pub case_column: String,
    pub activity_column: String,
    pub timestamp_column: String,
    pub timestamp_format: TimestampFormat,
    pub attribute_columns: Vec<(String, ValueKind)>,
}

impl ColumnMapping {
    pub fn new(case: &str, activity: &str, timestamp: &str) -> Self {
        ColumnMapping {
            case_column: case.into(),
            activity_column: activity.into(),
            timestamp_column: timestamp.into(),
            timestamp_format: TimestampFormat::Rfc3339,
            attribute_columns: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), LogError> {
        let cols = [&self.case_column, &self.activity_column, &self.timestamp_column];
        let distinct: BTreeSet<_> = cols.iter().collect();
        if distinct.len() != 3 {
            return Err(LogError::Config(
                "case, activity and timestamp columns must be distinct".into(),
            ));
        }
        Ok(())
    }
}

/// Read an RFC-4180 CSV with a header row. Rows are grouped by case in order
/// of first appearance; unmapped columns are ignored and empty attribute
/// cells are treated as missing values.
pub fn parse_csv<R: Read>(source: R, mapping: &ColumnMapping) -> Result<EventLog, LogError> {
    mapping.validate()?;
    let mut reader = ::csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(source);
    let headers = reader
        .headers()
        .map_err(|e| LogError::Csv {
            row: 1,
            message: e.to_string(),
        })?
        .clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| LogError::Config(format!("missing mapped column '{name}'")))
    };
    let case_idx = column(&mapping.case_column)?;
    let act_idx = column(&mapping.activity_column)?;
    let ts_idx = column(&mapping.timestamp_column)?;
    let attr_idx: Vec<(usize, &str, ValueKind)> = mapping
        .attribute_columns
        .iter()
        .map(|(name, kind)| Ok((column(name)?, name.as_str(), *kind)))
        .collect::<Result<_, LogError>>()?;

    let mut order: Vec<String> = Vec::new();
    let mut grouped: BTreeMap<String, Vec<Event>> = BTreeMap::new();
    for (i, record) in reader.records().enumerate() {
        // header is row 1
        let row = i + 2;
        let record = record.map_err(|e| LogError::Csv {
            row,
            message: e.to_string(),
        })?;
        let field = |idx: usize| record.get(idx).unwrap_or("");
        let case = field(case_idx).to_string();
        let activity = field(act_idx).trim().to_string();
        if activity.is_empty() {
            return Err(LogError::Csv {
                row,
                message: "empty activity".into(),
            });
        }
        let timestamp = mapping
            .timestamp_format
            .parse(field(ts_idx))
            .map_err(|e| LogError::Csv {
                row,
                message: format!("unparseable timestamp '{}': {e}", field(ts_idx)),
            })?;
        let mut event = Event::new(activity, timestamp);
        for &(idx, name, kind) in &attr_idx {
            let raw = field(idx);
            if raw.trim().is_empty() {
                continue;
            }
            let value = AttributeValue::parse_as(kind, raw)
                .map_err(|message| LogError::Csv { row, message })?;
            event.attributes.insert(name.to_string(), value);
        }
        if !grouped.contains_key(&case) {
            order.push(case.clone());
        }
        grouped.entry(case).or_default().push(event);
    }
    let traces = order
        .into_iter()
        .map(|case| {
            let events = grouped.remove(&case).unwrap_or_default();
            Trace::new(case, events)
        })
        .collect();
    EventLog::new(traces)
}
