//! Variant statistics, time guidelines, decision rules and cohorts.

mod cohorts;
mod guidelines;
mod rules;
pub mod table;

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::eventlog::EventLog;

pub use cohorts::{classify_pathway, cohort_stats, CohortReport, Pathway, ADMISSION_IC, ADMISSION_NC, RETURN_ER};
pub use guidelines::{check_time_guideline, GuidelineReport, GuidelineSpec};
pub use rules::{evaluate_rule, Consequent, DecisionRule, Expr, RuleReport, Value};

#[derive(Debug, Error, PartialEq)]
pub enum AnalyticsError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("rule references unknown attribute '{0}'")]
    UnknownAttribute(String),
    #[error("rule syntax error at offset {offset}: {message}")]
    RuleSyntax { offset: usize, message: String },
}

/// Activity renames for the public sepsis log, whose lab activity is spelled
/// differently from the names used by the bundled model.
pub const SEPSIS_ALIASES: &[(&str, &str)] = &[("Leucocytes", "Leukocytes")];

pub fn sepsis_aliases() -> BTreeMap<String, String> {
    SEPSIS_ALIASES
        .iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect()
}

pub(crate) fn hours(d: chrono::Duration) -> f64 {
    d.num_milliseconds() as f64 / 3_600_000.0
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Variant {
    pub signature: Vec<String>,
    pub case_ids: Vec<String>,
    pub frequency: usize,
    pub duration_min_hours: f64,
    pub duration_mean_hours: f64,
    pub duration_max_hours: f64,
}

/// Group traces by activity sequence. Sorted by frequency (descending),
/// then signature.
pub fn extract_variants(log: &EventLog) -> Vec<Variant> {
    let mut groups: BTreeMap<Vec<String>, Vec<usize>> = BTreeMap::new();
    for (i, t) in log.traces().iter().enumerate() {
        groups.entry(t.labels()).or_default().push(i);
    }
    let mut out: Vec<Variant> = groups
        .into_iter()
        .map(|(signature, idx)| {
            let durations: Vec<f64> = idx.iter().map(|&i| hours(log.traces()[i].duration())).collect();
            let n = durations.len() as f64;
            Variant {
                case_ids: idx.iter().map(|&i| log.traces()[i].case_id.clone()).collect(),
                frequency: idx.len(),
                duration_min_hours: durations.iter().copied().fold(f64::INFINITY, f64::min),
                duration_mean_hours: durations.iter().sum::<f64>() / n,
                duration_max_hours: durations.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                signature,
            }
        })
        .collect();
    out.sort_by(|a, b| b.frequency.cmp(&a.frequency).then_with(|| a.signature.cmp(&b.signature)));
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActivityStats {
    pub occurrences: usize,
    pub cases: usize,
    /// Occurrences beyond the first per case.
    pub rework: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LongestTrace {
    pub case_id: String,
    pub events: usize,
    pub duration_hours: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariantStats {
    pub traces: usize,
    pub events: usize,
    pub activities: usize,
    pub variants: usize,
    pub per_activity: BTreeMap<String, ActivityStats>,
    pub longest_trace: Option<LongestTrace>,
    /// Share of traces lasting at least 24 hours.
    pub share_over_one_day: f64,
}

pub fn variant_stats(log: &EventLog) -> VariantStats {
    let mut per_activity: BTreeMap<String, ActivityStats> = BTreeMap::new();
    for t in log.traces() {
        let mut seen = BTreeSet::new();
        for a in t.activities() {
            let s = per_activity.entry(a.to_string()).or_insert(ActivityStats {
                occurrences: 0,
                cases: 0,
                rework: 0,
            });
            s.occurrences += 1;
            if seen.insert(a) {
                s.cases += 1;
            }
        }
    }
    for s in per_activity.values_mut() {
        s.rework = s.occurrences - s.cases;
    }
    // most events first, ties to the earliest case in log order
    let longest = log
        .traces()
        .iter()
        .rev()
        .max_by_key(|t| t.len())
        .map(|t| LongestTrace {
            case_id: t.case_id.clone(),
            events: t.len(),
            duration_hours: hours(t.duration()),
        });
    let over_day = log
        .traces()
        .iter()
        .filter(|t| t.duration() >= chrono::Duration::hours(24))
        .count();
    VariantStats {
        traces: log.len(),
        events: log.event_count(),
        activities: log.alphabet().len(),
        variants: extract_variants(log).len(),
        per_activity,
        longest_trace: longest,
        share_over_one_day: if log.is_empty() { 0.0 } else { over_day as f64 / log.len() as f64 },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log(seqs: &[&[&str]]) -> EventLog {
        let owned: Vec<Vec<&str>> = seqs.iter().map(|s| s.to_vec()).collect();
        EventLog::from_sequences(&owned)
    }

    #[test]
    fn variants_grouped_and_sorted() {
        let v = extract_variants(&log(&[&["a", "b"], &["a"], &["a", "b"]]));
        assert_eq!(v.len(), 2);
        assert_eq!(v[0].frequency, 2);
        assert_eq!(v[0].signature, vec!["a", "b"]);
        assert_eq!(v[0].case_ids, vec!["0", "2"]);
        assert_eq!(v[1].duration_max_hours, 0.0);
        assert!((v[0].duration_mean_hours - 1.0 / 60.0).abs() < 1e-12);
    }

    #[test]
    fn ties_sorted_by_signature() {
        let v = extract_variants(&log(&[&["b"], &["a"]]));
        assert_eq!(v[0].signature, vec!["a"]);
    }

    #[test]
    fn rework() {
        let s = variant_stats(&log(&[&["x", "y", "x", "x"], &["x"]]));
        assert_eq!(s.per_activity["x"].occurrences, 4);
        assert_eq!(s.per_activity["x"].cases, 2);
        assert_eq!(s.per_activity["x"].rework, 2);
        assert_eq!(s.longest_trace.as_ref().unwrap().events, 4);
        assert_eq!(s.longest_trace.unwrap().case_id, "0");
        assert_eq!(s.share_over_one_day, 0.0);
    }
}
