use std::collections::BTreeMap;
use std::fmt::Write as _;

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

use super::{NetError, PetriNet, PlaceId, TransitionId};

fn esc(s: &str) -> String {
    quick_xml::escape::escape(s).into_owned()
}

/// Serialize as PNML. Silent transitions carry an empty name and the
/// invisible tool-specific marker; final markings go into `finalmarkings`.
pub fn export_pnml(net: &PetriNet) -> String {
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<pnml>\n");
    out.push_str("  <net id=\"net1\" type=\"http://www.pnml.org/version-2009/grammar/pnmlcoremodel\">\n");
    out.push_str("    <page id=\"page1\">\n");
    let initial = net.initial_marking();
    for p in net.place_ids() {
        let _ = write!(
            out,
            "      <place id=\"p{}\">\n        <name><text>{}</text></name>\n",
            p.0,
            esc(&net.place(p).name)
        );
        if initial.get(p) > 0 {
            let _ = writeln!(
                out,
                "        <initialMarking><text>{}</text></initialMarking>",
                initial.get(p)
            );
        }
        out.push_str("      </place>\n");
    }
    for t in net.transition_ids() {
        let tr = net.transition(t);
        let _ = writeln!(out, "      <transition id=\"t{}\">", t.0);
        match &tr.label {
            Some(label) => {
                let _ = writeln!(out, "        <name><text>{}</text></name>", esc(label));
            }
            None => {
                out.push_str("        <name><text></text></name>\n");
                let _ = writeln!(
                    out,
                    "        <toolspecific tool=\"ProM\" version=\"6.4\" activity=\"$invisible$\" localNodeID=\"{}\"/>",
                    esc(&tr.name)
                );
            }
        }
        out.push_str("      </transition>\n");
    }
    let mut arc = 0;
    let mut write_arc = |out: &mut String, src: String, dst: String, w: u32| {
        let _ = write!(out, "      <arc id=\"a{arc}\" source=\"{src}\" target=\"{dst}\"");
        if w == 1 {
            out.push_str("/>\n");
        } else {
            let _ = writeln!(out, ">\n        <inscription><text>{w}</text></inscription>\n      </arc>");
        }
        arc += 1;
    };
    for t in net.transition_ids() {
        for &(p, w) in net.preset(t) {
            write_arc(&mut out, format!("p{}", p.0), format!("t{}", t.0), w);
        }
        for &(p, w) in net.postset(t) {
            write_arc(&mut out, format!("t{}", t.0), format!("p{}", p.0), w);
        }
    }
    out.push_str("    </page>\n    <finalmarkings>\n      <marking>\n");
    let fin = net.final_marking();
    for p in net.place_ids() {
        if fin.get(p) > 0 {
            let _ = writeln!(
                out,
                "        <place idref=\"p{}\"><text>{}</text></place>",
                p.0,
                fin.get(p)
            );
        }
    }
    out.push_str("      </marking>\n    </finalmarkings>\n  </net>\n</pnml>\n");
    out
}

#[derive(Default)]
struct RawTransition {
    id: String,
    name: String,
    invisible: bool,
    local_id: Option<String>,
}

fn attr(e: &BytesStart, key: &[u8]) -> Result<Option<String>, NetError> {
    for a in e.attributes() {
        let a = a.map_err(|err| NetError::Pnml(err.to_string()))?;
        if a.key.as_ref() == key {
            let v = a
                .unescape_value()
                .map_err(|err| NetError::Pnml(err.to_string()))?;
            return Ok(Some(v.into_owned()));
        }
    }
    Ok(None)
}

fn required(e: &BytesStart, key: &[u8]) -> Result<String, NetError> {
    attr(e, key)?.ok_or_else(|| {
        NetError::Pnml(format!(
            "<{}> without '{}'",
            String::from_utf8_lossy(e.name().as_ref()),
            String::from_utf8_lossy(key)
        ))
    })
}

fn count(text: &str) -> Result<u32, NetError> {
    text.trim()
        .parse()
        .map_err(|_| NetError::Pnml(format!("invalid token count '{}'", text.trim())))
}

/// Read the PNML subset written by [`export_pnml`]: places, transitions,
/// arcs with inscriptions, initial marking and final markings. Transitions
/// with an empty name or the invisible marker are silent.
pub fn import_pnml(source: &str) -> Result<PetriNet, NetError> {
    let mut reader = Reader::from_str(source);
    reader.config_mut().trim_text(true);

    let mut places: Vec<(String, String, u32)> = Vec::new();
    let mut transitions: Vec<RawTransition> = Vec::new();
    let mut arcs: Vec<(String, String, u32)> = Vec::new();
    let mut finals: Vec<(String, u32)> = Vec::new();
    let mut stack: Vec<Vec<u8>> = Vec::new();

    loop {
        let ev = reader
            .read_event()
            .map_err(|e| NetError::Pnml(format!("at byte {}: {e}", reader.error_position())))?;
        let (e, empty) = match &ev {
            Event::Start(e) => (Some(e.clone()), false),
            Event::Empty(e) => (Some(e.clone()), true),
            _ => (None, false),
        };
        if let Some(e) = e {
            let name = e.name().as_ref().to_vec();
            let in_final = stack.iter().any(|s| s == b"finalmarkings");
            match name.as_slice() {
                b"place" if in_final => finals.push((required(&e, b"idref")?, 0)),
                b"place" => places.push((required(&e, b"id")?, String::new(), 0)),
                b"transition" => transitions.push(RawTransition {
                    id: required(&e, b"id")?,
                    ..Default::default()
                }),
                b"arc" => arcs.push((required(&e, b"source")?, required(&e, b"target")?, 1)),
                b"toolspecific" if stack.last().map(|s| s == b"transition").unwrap_or(false) => {
                    if let Some(t) = transitions.last_mut() {
                        if attr(&e, b"activity")?.as_deref() == Some("$invisible$") {
                            t.invisible = true;
                        }
                        t.local_id = attr(&e, b"localNodeID")?;
                    }
                }
                _ => {}
            }
            if !empty {
                stack.push(name);
            }
            continue;
        }
        match ev {
            Event::End(_) => {
                stack.pop();
            }
            Event::Text(t) => {
                let text = t
                    .unescape()
                    .map_err(|e| NetError::Pnml(e.to_string()))?
                    .into_owned();
                let path: Vec<&[u8]> = stack.iter().rev().take(3).map(Vec::as_slice).collect();
                match path.as_slice() {
                    [b"text", b"name", b"place", ..] => {
                        if let Some(p) = places.last_mut() {
                            p.1 = text;
                        }
                    }
                    [b"text", b"initialMarking", b"place", ..] => {
                        if let Some(p) = places.last_mut() {
                            p.2 = count(&text)?;
                        }
                    }
                    [b"text", b"name", b"transition", ..] => {
                        if let Some(t) = transitions.last_mut() {
                            t.name = text;
                        }
                    }
                    [b"text", b"inscription", b"arc", ..] => {
                        if let Some(a) = arcs.last_mut() {
                            a.2 = count(&text)?;
                        }
                    }
                    [b"text", b"place", b"marking", ..] => {
                        if let Some(f) = finals.last_mut() {
                            f.1 = count(&text)?;
                        }
                    }
                    _ => {}
                }
            }
            Event::Eof => break,
            _ => {}
        }
    }
    if !stack.is_empty() {
        return Err(NetError::Pnml("unexpected end of document".into()));
    }

    let mut net = PetriNet::new();
    let mut place_ids: BTreeMap<String, PlaceId> = BTreeMap::new();
    for (id, name, _) in &places {
        let name = if name.is_empty() { id.clone() } else { name.clone() };
        if place_ids.insert(id.clone(), net.add_place(name)).is_some() {
            return Err(NetError::Pnml(format!("duplicate place id '{id}'")));
        }
    }
    let mut transition_ids: BTreeMap<String, TransitionId> = BTreeMap::new();
    for t in &transitions {
        let silent = t.invisible || t.name.is_empty();
        let (name, label) = if silent {
            (t.local_id.clone().unwrap_or_else(|| t.id.clone()), None)
        } else {
            (t.name.clone(), Some(t.name.clone()))
        };
        if transition_ids.insert(t.id.clone(), net.add_transition(name, label)).is_some() {
            return Err(NetError::Pnml(format!("duplicate transition id '{}'", t.id)));
        }
    }
    for (src, dst, w) in arcs {
        match (place_ids.get(&src), transition_ids.get(&dst), transition_ids.get(&src), place_ids.get(&dst)) {
            (Some(&p), Some(&t), _, _) => net.add_input_arc_weighted(p, t, w),
            (_, _, Some(&t), Some(&p)) => net.add_output_arc_weighted(t, p, w),
            _ => return Err(NetError::Pnml(format!("arc {src} -> {dst} references unknown nodes"))),
        }
    }
    for (id, _, tokens) in &places {
        if *tokens > 0 {
            net.set_initial(place_ids[id], *tokens);
        }
    }
    for (id, tokens) in finals {
        let p = place_ids
            .get(&id)
            .ok_or_else(|| NetError::Pnml(format!("final marking references unknown place '{id}'")))?;
        net.set_final(*p, tokens);
    }
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::tree_to_petri;

    #[test]
    fn round_trip_sequence() {
        let net = tree_to_petri(&"Seq(a, b)".parse().unwrap());
        let back = import_pnml(&export_pnml(&net)).unwrap();
        assert_eq!(back, net);
    }

    #[test]
    fn silent_transitions_survive() {
        let net = tree_to_petri(&"Xor(tau, 'a & <b>')".parse().unwrap());
        let text = export_pnml(&net);
        assert!(text.contains("$invisible$"));
        let back = import_pnml(&text).unwrap();
        assert_eq!(back, net);
        assert_eq!(back.transitions().iter().filter(|t| t.is_silent()).count(), 1);
    }

    #[test]
    fn token_counts_and_weights_restored() {
        let mut net = PetriNet::new();
        let p = net.add_place("p");
        let q = net.add_place("q");
        let t = net.add_transition("t", Some("t".into()));
        net.add_input_arc_weighted(p, t, 2);
        net.add_output_arc(t, q);
        net.set_initial(p, 2);
        net.set_final(q, 1);
        let back = import_pnml(&export_pnml(&net)).unwrap();
        assert_eq!(back.initial_marking().get(p), 2);
        assert_eq!(back, net);
    }

    #[test]
    fn malformed_documents_rejected() {
        assert!(import_pnml("<pnml><net><page><place id=\"p\">").is_err());
        assert!(import_pnml("<pnml><net><page><arc id=\"a\" source=\"x\" target=\"y\"/></page></net></pnml>").is_err());
    }
}
