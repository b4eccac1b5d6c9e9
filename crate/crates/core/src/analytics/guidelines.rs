use chrono::Duration;
use serde::Serialize;

use super::{hours, AnalyticsError};
use crate::eventlog::EventLog;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GuidelineSpec {
    pub name: String,
    pub anchor: String,
    pub target: String,
    pub limit_hours: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GuidelineReport {
    pub name: String,
    pub anchor: String,
    pub target: String,
    pub limit_hours: f64,
    pub total_cases: usize,
    pub evaluable_cases: usize,
    pub compliant: usize,
    /// Includes `negative_delays`.
    pub violating: usize,
    /// Target recorded before the anchor.
    pub negative_delays: usize,
    pub non_evaluable: usize,
    pub violation_rate: Option<f64>,
    pub mean_delay_hours: Option<f64>,
}

/// Delay from the first `anchor` to the first `target` per case. Cases
/// lacking either are non-evaluable; delays above the limit or below zero
/// are violations.
pub fn check_time_guideline(log: &EventLog, spec: &GuidelineSpec) -> Result<GuidelineReport, AnalyticsError> {
    if spec.anchor == spec.target {
        return Err(AnalyticsError::Config(format!(
            "guideline '{}': anchor and target are both '{}'",
            spec.name, spec.anchor
        )));
    }
    if spec.limit_hours <= 0.0 || !spec.limit_hours.is_finite() {
        return Err(AnalyticsError::Config(format!(
            "guideline '{}': limit must be positive",
            spec.name
        )));
    }
    let limit = Duration::milliseconds((spec.limit_hours * 3_600_000.0).round() as i64);
    let mut report = GuidelineReport {
        name: spec.name.clone(),
        anchor: spec.anchor.clone(),
        target: spec.target.clone(),
        limit_hours: spec.limit_hours,
        total_cases: log.len(),
        evaluable_cases: 0,
        compliant: 0,
        violating: 0,
        negative_delays: 0,
        non_evaluable: 0,
        violation_rate: None,
        mean_delay_hours: None,
    };
    let mut delay_sum = 0.0;
    for t in log.traces() {
        let (Some(a), Some(b)) = (t.first_occurrence(&spec.anchor), t.first_occurrence(&spec.target)) else {
            report.non_evaluable += 1;
            continue;
        };
        let delay = b.timestamp - a.timestamp;
        report.evaluable_cases += 1;
        delay_sum += hours(delay);
        if delay < Duration::zero() {
            report.violating += 1;
            report.negative_delays += 1;
        } else if delay > limit {
            report.violating += 1;
        } else {
            report.compliant += 1;
        }
    }
    if report.evaluable_cases > 0 {
        let n = report.evaluable_cases as f64;
        report.violation_rate = Some(report.violating as f64 / n);
        report.mean_delay_hours = Some(delay_sum / n);
    }
    Ok(report)
}
