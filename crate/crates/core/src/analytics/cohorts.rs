use std::collections::BTreeMap;

use chrono::Duration;
use serde::Serialize;

use crate::eventlog::{EventLog, Trace};

pub const ADMISSION_NC: &str = "Admission NC";
pub const ADMISSION_IC: &str = "Admission IC";
pub const RETURN_ER: &str = "Return ER";
const RELEASE_PREFIX: &str = "Release ";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pathway {
    /// A release without any admission.
    NoAdmission,
    /// Admitted to normal care, never to intensive care.
    NcOnly,
    /// First admission is to intensive care.
    IcFirst,
    /// Intensive care after an earlier normal-care admission.
    NcThenIc,
    /// Neither admission nor release recorded.
    Unrecorded,
}

fn is_release(a: &str) -> bool {
    a.starts_with(RELEASE_PREFIX)
}

pub fn classify_pathway(t: &Trace) -> Pathway {
    let nc = t.activities().position(|a| a == ADMISSION_NC);
    let ic = t.activities().position(|a| a == ADMISSION_IC);
    match (nc, ic) {
        (None, None) if t.activities().any(is_release) => Pathway::NoAdmission,
        (None, None) => Pathway::Unrecorded,
        (Some(_), None) => Pathway::NcOnly,
        (Some(n), Some(i)) if n < i => Pathway::NcThenIc,
        _ => Pathway::IcFirst,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CohortReport {
    pub total_cases: usize,
    pub pathways: BTreeMap<Pathway, usize>,
    pub discharged_without_admission: usize,
    pub admitted_nc: usize,
    pub admitted_ic: usize,
    pub nc_then_ic: usize,
    pub no_release_recorded: usize,
    /// Cases with a return within 28 days of the preceding release.
    pub returns_within_28_days: usize,
    pub returns_within_one_year: usize,
    /// 28-day returns keyed by the preceding release activity.
    pub returns_28_days_by_release: BTreeMap<String, usize>,
    /// Return events without any earlier release in the case.
    pub returns_without_release: usize,
    pub rates: BTreeMap<String, f64>,
}

/// Release preceding each return, with the elapsed time.
fn returns(t: &Trace) -> Vec<(Option<&str>, Duration)> {
    let mut last_release: Option<(&str, chrono::DateTime<chrono::Utc>)> = None;
    let mut out = Vec::new();
    for e in &t.events {
        if is_release(&e.activity) {
            last_release = Some((&e.activity, e.timestamp));
        } else if e.activity == RETURN_ER {
            match last_release {
                Some((r, ts)) => out.push((Some(r), e.timestamp - ts)),
                None => out.push((None, Duration::zero())),
            }
        }
    }
    out
}

pub fn cohort_stats(log: &EventLog) -> CohortReport {
    let mut pathways: BTreeMap<Pathway, usize> = BTreeMap::new();
    let mut within_28 = 0;
    let mut within_year = 0;
    let mut by_release: BTreeMap<String, usize> = BTreeMap::new();
    let mut without_release = 0;
    for t in log.traces() {
        *pathways.entry(classify_pathway(t)).or_default() += 1;
        let rs = returns(t);
        without_release += rs.iter().filter(|(r, _)| r.is_none()).count();
        let timed: Vec<(&str, Duration)> = rs.iter().filter_map(|(r, d)| r.map(|r| (r, *d))).collect();
        if let Some((release, _)) = timed.iter().find(|(_, d)| *d <= Duration::days(28)) {
            within_28 += 1;
            *by_release.entry(release.to_string()).or_default() += 1;
        }
        if timed.iter().any(|(_, d)| *d <= Duration::days(365)) {
            within_year += 1;
        }
    }
    let get = |p: Pathway| pathways.get(&p).copied().unwrap_or(0);
    let total = log.len();
    let mut report = CohortReport {
        total_cases: total,
        discharged_without_admission: get(Pathway::NoAdmission),
        admitted_nc: get(Pathway::NcOnly),
        admitted_ic: get(Pathway::IcFirst),
        nc_then_ic: get(Pathway::NcThenIc),
        no_release_recorded: get(Pathway::Unrecorded),
        pathways,
        returns_within_28_days: within_28,
        returns_within_one_year: within_year,
        returns_28_days_by_release: by_release,
        returns_without_release: without_release,
        rates: BTreeMap::new(),
    };
    let rate = |n: usize| if total == 0 { 0.0 } else { n as f64 / total as f64 };
    for (k, v) in [
        ("discharged_without_admission", report.discharged_without_admission),
        ("admitted_nc", report.admitted_nc),
        ("admitted_ic", report.admitted_ic),
        ("nc_then_ic", report.nc_then_ic),
        ("returns_within_28_days", report.returns_within_28_days),
        ("returns_within_one_year", report.returns_within_one_year),
    ] {
        report.rates.insert(k.to_string(), rate(v));
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eventlog::Event;
    use chrono::{TimeZone, Utc};

    fn case(id: &str, events: &[(&str, i64)]) -> Trace {
        let t0 = Utc.with_ymd_and_hms(2014, 1, 1, 0, 0, 0).unwrap();
        Trace::new(
            id,
            events
                .iter()
                .map(|(a, d)| Event::new(*a, t0 + Duration::days(*d)))
                .collect(),
        )
    }

    #[test]
    fn pathway_classes() {
        assert_eq!(classify_pathway(&case("a", &[("ER Registration", 0), ("Release A", 0)])), Pathway::NoAdmission);
        assert_eq!(classify_pathway(&case("b", &[("Admission NC", 0), ("Release A", 1)])), Pathway::NcOnly);
        assert_eq!(classify_pathway(&case("c", &[("Admission IC", 0), ("Admission NC", 1)])), Pathway::IcFirst);
        assert_eq!(classify_pathway(&case("d", &[("Admission NC", 0), ("Admission IC", 1)])), Pathway::NcThenIc);
        assert_eq!(classify_pathway(&case("e", &[("ER Registration", 0)])), Pathway::Unrecorded);
    }

    #[test]
    fn returns_attributed_to_preceding_release() {
        let log = EventLog::new(vec![
            case("1", &[("Admission NC", 0), ("Release A", 2), ("Return ER", 20)]),
            case("2", &[("Admission NC", 0), ("Release D", 2), ("Return ER", 100)]),
            case("3", &[("Release A", 0), ("Release E", 1), ("Return ER", 29)]),
            case("4", &[("Return ER", 0)]),
        ])
        .unwrap();
        let r = cohort_stats(&log);
        assert_eq!(r.returns_within_28_days, 2);
        assert_eq!(r.returns_28_days_by_release, BTreeMap::from([("Release A".into(), 1), ("Release E".into(), 1)]));
        assert_eq!(r.returns_within_one_year, 3);
        assert_eq!(r.returns_without_release, 1);
        assert_eq!(r.admitted_nc, 2);
        assert_eq!(r.discharged_without_admission, 1);
        assert_eq!(r.no_release_recorded, 1);
        assert_eq!(r.pathways.values().sum::<usize>(), 4);
    }
}
