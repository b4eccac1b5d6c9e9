use chrono::{Duration, TimeZone, Utc};
use procmine::eventlog::{parse_csv, parse_xes, write_xes, ColumnMapping, TimestampFormat};
use procmine::{AttributeValue, Event, EventLog, Trace, ValueKind};

fn sample() -> EventLog {
    let t0 = Utc.with_ymd_and_hms(2014, 10, 22, 11, 15, 41).unwrap();
    let mut a = Trace::new(
        "A",
        vec![
            Event::new("ER Registration", t0)
                .with_attribute("Age", AttributeValue::Integer(85))
                .with_attribute("SIRSCriteria2OrMore", AttributeValue::Boolean(true))
                .with_attribute("org:group", AttributeValue::Text("A & <B>".into())),
            Event::new("CRP", t0 + Duration::minutes(12)).with_attribute("CRP", AttributeValue::Real(21.5)),
            Event::new("Release A", t0 + Duration::days(3)),
        ],
    );
    a.attributes.insert("InfectionSuspected".into(), AttributeValue::Boolean(false));
    let b = Trace::new("B", vec![Event::new("ER Registration", t0 + Duration::hours(1))]);
    EventLog::new(vec![a, b]).unwrap()
}

#[test]
fn xes_round_trip_keeps_values_and_kinds() {
    let log = sample();
    let back = parse_xes(write_xes(&log).as_bytes()).unwrap();
    assert_eq!(back.traces(), log.traces());
    assert_eq!(back.schema(), log.schema());
    let text = write_xes(&back);
    assert_eq!(write_xes(&parse_xes(text.as_bytes()).unwrap()), text);
}

#[test]
fn csv_and_xes_agree() {
    let csv = "\
case,activity,time,CRP,Age
A,ER Registration,2014-10-22 11:15:41,,85
A,CRP,2014-10-22 11:27:41,21.5,
A,Release A,2014-10-25 11:15:41,,
B,ER Registration,2014-10-22 12:15:41,,
";
    let mut mapping = ColumnMapping::new("case", "activity", "time");
    mapping.timestamp_format = TimestampFormat::Pattern("%Y-%m-%d %H:%M:%S".into());
    mapping.attribute_columns = vec![("CRP".into(), ValueKind::Real), ("Age".into(), ValueKind::Integer)];
    let from_csv = parse_csv(csv.as_bytes(), &mapping).unwrap();
    let xes = sample();
    assert_eq!(from_csv.len(), 2);
    for (c, x) in from_csv.traces().iter().zip(xes.traces()) {
        assert_eq!(c.case_id, x.case_id);
        assert_eq!(c.labels(), x.labels());
        let ct: Vec<_> = c.events.iter().map(|e| e.timestamp).collect();
        let xt: Vec<_> = x.events.iter().map(|e| e.timestamp).collect();
        assert_eq!(ct, xt);
    }
    let crp = &from_csv.traces()[0].events[1].attributes["CRP"];
    assert_eq!(crp, &AttributeValue::Real(21.5));
    assert_eq!(from_csv.schema()["Age"], ValueKind::Integer);
}

#[test]
fn unsorted_events_are_ordered_by_time() {
    let src = r#"<log xes.version="1.0">
<trace><string key="concept:name" value="c"/>
<event><string key="concept:name" value="second"/><date key="time:timestamp" value="2014-01-01T10:00:00.000+01:00"/></event>
<event><string key="concept:name" value="first"/><date key="time:timestamp" value="2014-01-01T08:30:00.000Z"/></event>
</trace></log>"#;
    let log = parse_xes(src.as_bytes()).unwrap();
    assert_eq!(log.traces()[0].labels(), vec!["first", "second"]);
}
