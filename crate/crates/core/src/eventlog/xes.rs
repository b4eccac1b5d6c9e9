//! XES subset: `log`/`trace`/`event` with flat `string`, `date`, `int`,
//! `float` and `boolean` attributes. Extensions, globals and classifiers are
//! skipped, as are children of nested attributes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::Read;

use chrono::{DateTime, Utc};
use quick_xml::escape::escape;
use quick_xml::events::{BytesStart, Event as XmlEvent};
use quick_xml::Reader;

use super::{
    format_timestamp, AttributeValue, Attributes, Event, EventLog, LogError, Trace,
    META_SOURCE_OFFSETS,
};

const NAME_KEY: &str = "concept:name";
const TIME_KEY: &str = "time:timestamp";

fn line_of(bytes: &[u8], pos: usize) -> usize {
    1 + bytes[..pos.min(bytes.len())]
        .iter()
        .filter(|&&b| b == b'\n')
        .count()
}

struct RawAttr {
    key: String,
    value: Option<AttributeValue>,
    offset: Option<String>,
}

fn read_attr(el: &BytesStart<'_>) -> Result<Option<RawAttr>, String> {
    let tag = el.name();
    let kind = match tag.as_ref() {
        b"string" => "string",
        b"date" => "date",
        b"int" => "int",
        b"float" => "float",
        b"boolean" => "boolean",
        b"id" | b"list" | b"container" => "other",
        _ => return Ok(None),
    };
    let mut key = None;
    let mut raw = None;
    for a in el.attributes() {
        let a = a.map_err(|e| e.to_string())?;
        let v = a.unescape_value().map_err(|e| e.to_string())?.into_owned();
        match a.key.as_ref() {
            b"key" => key = Some(v),
            b"value" => raw = Some(v),
            _ => {}
        }
    }
    let key = key.ok_or_else(|| format!("<{kind}> attribute without key"))?;
    let mut offset = None;
    let value = match (kind, raw) {
        ("other", _) | (_, None) => None,
        ("string", Some(v)) => Some(AttributeValue::Text(v)),
        ("int", Some(v)) => Some(AttributeValue::parse_as(super::ValueKind::Integer, &v)?),
        ("float", Some(v)) => Some(AttributeValue::parse_as(super::ValueKind::Real, &v)?),
        ("boolean", Some(v)) => Some(AttributeValue::parse_as(super::ValueKind::Boolean, &v)?),
        ("date", Some(v)) => {
            let parsed = DateTime::parse_from_rfc3339(v.trim())
                .map_err(|e| format!("invalid date '{v}' for key '{key}': {e}"))?;
            offset = Some(parsed.offset().to_string());
            Some(AttributeValue::Timestamp(parsed.with_timezone(&Utc)))
        }
        _ => unreachable!(),
    };
    Ok(Some(RawAttr { key, value, offset }))
}

#[derive(Default)]
struct EventBuilder {
    attrs: Attributes,
}

#[derive(Default)]
struct TraceBuilder {
    attrs: Attributes,
    events: Vec<(Attributes, usize)>,
}

/// Parse an XES document.
pub fn parse_xes<R: Read>(mut source: R) -> Result<EventLog, LogError> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    let mut reader = Reader::from_reader(bytes.as_slice());
    reader.config_mut().trim_text(true);

    let mut log_attrs: Attributes = Attributes::new();
    let mut offsets: BTreeSet<String> = BTreeSet::new();
    let mut trace: Option<TraceBuilder> = None;
    let mut event: Option<EventBuilder> = None;
    let mut traces: Vec<Trace> = Vec::new();
    let mut skip_depth = 0usize;
    let mut seen_log = false;

    loop {
        let pos_before = reader.buffer_position() as usize;
        let ev = reader.read_event().map_err(|e| LogError::Xml {
            line: line_of(&bytes, reader.error_position() as usize),
            message: e.to_string(),
        })?;
        let xml_err = |message: String| LogError::Xml {
            line: line_of(&bytes, pos_before),
            message,
        };
        match ev {
            XmlEvent::Eof => break,
            XmlEvent::Start(_) if skip_depth > 0 => skip_depth += 1,
            XmlEvent::End(_) if skip_depth > 0 => skip_depth -= 1,
            _ if skip_depth > 0 => {}
            XmlEvent::Start(el) | XmlEvent::Empty(el)
                if matches!(el.name().as_ref(), b"log") =>
            {
                seen_log = true;
            }
            XmlEvent::Start(el) => match el.name().as_ref() {
                b"trace" => trace = Some(TraceBuilder::default()),
                b"event" => {
                    if trace.is_none() {
                        return Err(xml_err("<event> outside <trace>".into()));
                    }
                    event = Some(EventBuilder::default());
                }
                b"extension" | b"global" | b"classifier" => skip_depth = 1,
                _ => {
                    let attr = read_attr(&el).map_err(&xml_err)?;
                    if let Some(attr) = attr {
                        assign(attr, &mut event, &mut trace, &mut log_attrs, &mut offsets);
                    }
                    skip_depth = 1;
                }
            },
            XmlEvent::Empty(el) => match el.name().as_ref() {
                b"trace" => traces.push(finish_trace(TraceBuilder::default(), traces.len())?),
                b"event" => {
                    let t = trace
                        .as_mut()
                        .ok_or_else(|| xml_err("<event> outside <trace>".into()))?;
                    let n = t.events.len();
                    t.events.push((Attributes::new(), n));
                }
                _ => {
                    if let Some(attr) = read_attr(&el).map_err(&xml_err)? {
                        assign(attr, &mut event, &mut trace, &mut log_attrs, &mut offsets);
                    }
                }
            },
            XmlEvent::End(el) => match el.name().as_ref() {
                b"event" => {
                    let e = event.take().unwrap_or_default();
                    let t = trace.as_mut().expect("event inside trace");
                    let n = t.events.len();
                    t.events.push((e.attrs, n));
                }
                b"trace" => {
                    let t = trace.take().unwrap_or_default();
                    traces.push(finish_trace(t, traces.len())?);
                }
                _ => {}
            },
            _ => {}
        }
    }
    if !seen_log {
        return Err(LogError::Xml {
            line: line_of(&bytes, bytes.len()),
            message: "missing <log> root element".into(),
        });
    }

    let mut metadata: BTreeMap<String, String> = log_attrs
        .into_iter()
        .map(|(k, v)| (k, v.to_string()))
        .collect();
    if !offsets.is_empty() {
        metadata
            .entry(META_SOURCE_OFFSETS.to_string())
            .or_insert_with(|| offsets.into_iter().collect::<Vec<_>>().join(","));
    }
    let mut log = EventLog::new(traces)?;
    log.metadata = metadata;
    Ok(log)
}

fn assign(
    attr: RawAttr,
    event: &mut Option<EventBuilder>,
    trace: &mut Option<TraceBuilder>,
    log_attrs: &mut Attributes,
    offsets: &mut BTreeSet<String>,
) {
    if let Some(o) = attr.offset {
        offsets.insert(o);
    }
    let Some(value) = attr.value else { return };
    let target = if let Some(e) = event.as_mut() {
        &mut e.attrs
    } else if let Some(t) = trace.as_mut() {
        &mut t.attrs
    } else {
        log_attrs
    };
    target.insert(attr.key, value);
}

fn finish_trace(mut t: TraceBuilder, index: usize) -> Result<Trace, LogError> {
    let case_id = match t.attrs.remove(NAME_KEY) {
        Some(v) => v.to_string(),
        None => format!("trace-{index}"),
    };
    let mut events = Vec::with_capacity(t.events.len());
    for (mut attrs, pos) in t.events {
        let activity = match attrs.remove(NAME_KEY) {
            Some(AttributeValue::Text(s)) if !s.is_empty() => s,
            _ => {
                return Err(LogError::Ingestion {
                    trace: case_id,
                    message: format!("event #{} has no concept:name", pos + 1),
                })
            }
        };
        let timestamp = match attrs.remove(TIME_KEY) {
            Some(AttributeValue::Timestamp(ts)) => ts,
            _ => {
                return Err(LogError::Ingestion {
                    trace: case_id,
                    message: format!("event #{} ('{activity}') has no time:timestamp", pos + 1),
                })
            }
        };
        events.push(Event {
            activity,
            timestamp,
            attributes: attrs,
        });
    }
    let mut trace = Trace::new(case_id, events);
    trace.attributes = t.attrs;
    Ok(trace)
}

fn write_attr(out: &mut String, indent: &str, key: &str, value: &AttributeValue) {
    let tag = match value {
        AttributeValue::Text(_) => "string",
        AttributeValue::Integer(_) => "int",
        AttributeValue::Real(_) => "float",
        AttributeValue::Boolean(_) => "boolean",
        AttributeValue::Timestamp(_) => "date",
    };
    let _ = writeln!(
        out,
        "{indent}<{tag} key=\"{}\" value=\"{}\"/>",
        escape(key),
        escape(value.to_string().as_str())
    );
}

/// Serialize a log to XES. Timestamps are written in UTC with millisecond
/// precision; log metadata becomes log-level string attributes.
pub fn write_xes(log: &EventLog) -> String {
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str("<log xes.version=\"1.0\" xes.features=\"\">\n");
    out.push_str("  <extension name=\"Concept\" prefix=\"concept\" uri=\"http://www.xes-standard.org/concept.xesext\"/>\n");
    out.push_str("  <extension name=\"Time\" prefix=\"time\" uri=\"http://www.xes-standard.org/time.xesext\"/>\n");
    for (k, v) in log.metadata() {
        write_attr(&mut out, "  ", k, &AttributeValue::Text(v.clone()));
    }
    for trace in log.traces() {
        out.push_str("  <trace>\n");
        write_attr(
            &mut out,
            "    ",
            NAME_KEY,
            &AttributeValue::Text(trace.case_id.clone()),
        );
        for (k, v) in &trace.attributes {
            write_attr(&mut out, "    ", k, v);
        }
        for event in &trace.events {
            out.push_str("    <event>\n");
            write_attr(
                &mut out,
                "      ",
                NAME_KEY,
                &AttributeValue::Text(event.activity.clone()),
            );
            let _ = writeln!(
                out,
                "      <date key=\"{TIME_KEY}\" value=\"{}\"/>",
                format_timestamp(&event.timestamp)
            );
            for (k, v) in &event.attributes {
                write_attr(&mut out, "      ", k, v);
            }
            out.push_str("    </event>\n");
        }
        out.push_str("  </trace>\n");
    }
    out.push_str("</log>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"<?xml version="1.0" encoding="UTF-8"?>
<log xes.version="1.0">
  <extension name="Concept" prefix="concept" uri="http://www.xes-standard.org/concept.xesext"/>
  <global scope="event"><string key="concept:name" value="__INVALID__"/></global>
  <trace>
    <string key="concept:name" value="A"/>
    <event>
      <string key="concept:name" value="A"/>
      <date key="time:timestamp" value="2014-10-22T11:15:41.000+02:00"/>
      <float key="CRP" value="21.0"/>
      <int key="Age" value="85"/>
      <boolean key="InfectionSuspected" value="true"/>
    </event>
    <event>
      <string key="concept:name" value="B"/>
      <date key="time:timestamp" value="2014-10-22T11:27:00.000+02:00"/>
      <list key="nested"><values><string key="x" value="y"/></values></list>
    </event>
  </trace>
</log>"#;

    #[test]
    fn minimal_log() {
        let log = parse_xes(MINIMAL.as_bytes()).unwrap();
        assert_eq!(log.len(), 1);
        let alphabet: Vec<_> = log.alphabet().iter().cloned().collect();
        assert_eq!(alphabet, vec!["A", "B"]);
        let e = &log.traces()[0].events[0];
        assert_eq!(e.attributes["CRP"], AttributeValue::Real(21.0));
        assert_eq!(e.attributes["Age"], AttributeValue::Integer(85));
        assert_eq!(e.attributes["InfectionSuspected"], AttributeValue::Boolean(true));
        assert_eq!(e.timestamp.to_rfc3339(), "2014-10-22T09:15:41+00:00");
        assert_eq!(log.metadata()[META_SOURCE_OFFSETS], "+02:00");
        // nested attribute children are not leaked into the event
        assert!(!log.traces()[0].events[1].attributes.contains_key("x"));
    }

    #[test]
    fn empty_log() {
        let log = parse_xes(r#"<log xes.version="1.0"></log>"#.as_bytes()).unwrap();
        assert!(log.is_empty());
        assert!(log.alphabet().is_empty());
        let log = parse_xes(r#"<log/>"#.as_bytes()).unwrap();
        assert!(log.is_empty());
    }

    #[test]
    fn malformed_xml_reports_line() {
        let src = "<log>\n<trace>\n<event>\n</trace>\n</log>";
        match parse_xes(src.as_bytes()) {
            Err(LogError::Xml { line, .. }) => assert!(line >= 3, "line {line}"),
            other => panic!("expected XML error, got {other:?}"),
        }
    }

    #[test]
    fn missing_timestamp_names_trace() {
        let src = r#"<log><trace><string key="concept:name" value="case-7"/>
            <event><string key="concept:name" value="A"/></event></trace></log>"#;
        match parse_xes(src.as_bytes()) {
            Err(LogError::Ingestion { trace, message }) => {
                assert_eq!(trace, "case-7");
                assert!(message.contains("time:timestamp"));
            }
            other => panic!("expected ingestion error, got {other:?}"),
        }
    }

    #[test]
    fn missing_name_names_trace() {
        let src = r#"<log><trace><string key="concept:name" value="c1"/>
            <event><date key="time:timestamp" value="2020-01-01T00:00:00Z"/></event></trace></log>"#;
        assert!(matches!(
            parse_xes(src.as_bytes()),
            Err(LogError::Ingestion { trace, .. }) if trace == "c1"
        ));
    }

    #[test]
    fn round_trip() {
        let log = parse_xes(MINIMAL.as_bytes()).unwrap();
        let again = parse_xes(write_xes(&log).as_bytes()).unwrap();
        assert_eq!(log, again);
    }
}
