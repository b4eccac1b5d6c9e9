//! Graphviz export.

use std::fmt::Write as _;

use super::PetriNet;
use crate::dfg::DirectlyFollowsGraph;
use crate::heuristics::CausalNet;
use crate::inductive::ProcessTree;

pub trait ToDot {
    fn to_dot(&self) -> String;
}

pub fn export_dot<M: ToDot + ?Sized>(model: &M) -> String {
    model.to_dot()
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

impl ToDot for PetriNet {
    fn to_dot(&self) -> String {
        let mut out = String::from("digraph petri_net {\n  rankdir=LR;\n");
        let initial = self.initial_marking();
        let fin = self.final_marking();
        for p in self.place_ids() {
            let tokens = initial.get(p);
            let label = if tokens > 0 { tokens.to_string() } else { String::new() };
            let periphery = if fin.get(p) > 0 { ", peripheries=2" } else { "" };
            let _ = writeln!(
                out,
                "  p{} [shape=circle, label={}, xlabel={}{}];",
                p.0,
                quote(&label),
                quote(&self.place(p).name),
                periphery
            );
        }
        for t in self.transition_ids() {
            match &self.transition(t).label {
                Some(l) => {
                    let _ = writeln!(out, "  t{} [shape=box, label={}];", t.0, quote(l));
                }
                None => {
                    let _ = writeln!(
                        out,
                        "  t{} [shape=box, style=filled, fillcolor=black, label=\"\", width=0.2];",
                        t.0
                    );
                }
            }
        }
        for t in self.transition_ids() {
            for &(p, w) in self.preset(t) {
                let _ = write!(out, "  p{} -> t{}", p.0, t.0);
                if w > 1 {
                    let _ = write!(out, " [label=\"{w}\"]");
                }
                out.push_str(";\n");
            }
            for &(p, w) in self.postset(t) {
                let _ = write!(out, "  t{} -> p{}", t.0, p.0);
                if w > 1 {
                    let _ = write!(out, " [label=\"{w}\"]");
                }
                out.push_str(";\n");
            }
        }
        out.push_str("}\n");
        out
    }
}

impl ToDot for DirectlyFollowsGraph {
    fn to_dot(&self) -> String {
        let mut out = String::from("digraph dfg {\n");
        let starts = self.start_activities();
        let ends = self.end_activities();
        for (i, n) in self.nodes().iter().enumerate() {
            let _ = write!(out, "  n{i} [shape=box, label={}", quote(n));
            if let Some(c) = starts.get(n.as_str()) {
                let _ = write!(out, ", xlabel=\"start {c}\"");
            }
            if ends.contains_key(n.as_str()) {
                out.push_str(", peripheries=2");
            }
            out.push_str("];\n");
        }
        let pos = |l: &str| self.nodes().iter().position(|n| n == l).unwrap_or(0);
        for (a, b, c) in self.edges() {
            let _ = writeln!(out, "  n{} -> n{} [label=\"{c}\"];", pos(a), pos(b));
        }
        out.push_str("}\n");
        out
    }
}

impl ToDot for ProcessTree {
    fn to_dot(&self) -> String {
        fn walk(t: &ProcessTree, next: &mut usize, out: &mut String) -> usize {
            let id = *next;
            *next += 1;
            match t {
                ProcessTree::Activity(a) => {
                    let _ = writeln!(out, "  n{id} [shape=box, label={}];", quote(a));
                }
                ProcessTree::Silent => {
                    let _ = writeln!(
                        out,
                        "  n{id} [shape=box, style=filled, fillcolor=black, label=\"\", width=0.2];"
                    );
                }
                _ => {
                    let kw = t.op().map(|o| o.keyword()).unwrap_or("");
                    let _ = writeln!(out, "  n{id} [shape=circle, label={}];", quote(kw));
                    for c in t.children() {
                        let child = walk(c, next, out);
                        let _ = writeln!(out, "  n{id} -> n{child};");
                    }
                }
            }
            id
        }
        let mut out = String::from("digraph process_tree {\n");
        let mut next = 0;
        walk(self, &mut next, &mut out);
        out.push_str("}\n");
        out
    }
}

impl ToDot for CausalNet {
    fn to_dot(&self) -> String {
        let mut out = String::from("digraph causal_net {\n  rankdir=LR;\n");
        let ids: Vec<&String> = self.nodes.iter().collect();
        let pos = |l: &str| ids.iter().position(|n| *n == l).unwrap_or(0);
        for (i, n) in ids.iter().enumerate() {
            let _ = writeln!(out, "  n{i} [shape=box, label={}];", quote(n));
        }
        let mut fanned = std::collections::BTreeSet::new();
        let mut fan = 0;
        for (a, bindings) in &self.outputs {
            for binding in bindings.iter().filter(|b| b.len() >= 2) {
                // AND binding: one joined fan through a point node
                let _ = writeln!(out, "  f{fan} [shape=point];");
                let _ = writeln!(out, "  n{} -> f{fan} [arrowhead=none];", pos(a));
                for b in binding {
                    let value = self.arcs.get(&(a.clone(), b.clone())).map(|x| x.value).unwrap_or(0.0);
                    let _ = writeln!(out, "  f{fan} -> n{} [label=\"{value:.3}\"];", pos(b));
                    fanned.insert((a.clone(), b.clone()));
                }
                fan += 1;
            }
        }
        for ((a, b), arc) in &self.arcs {
            if fanned.contains(&(a.clone(), b.clone())) {
                continue;
            }
            let style = if arc.repaired { ", style=dotted" } else { "" };
            let _ = writeln!(
                out,
                "  n{} -> n{} [label=\"{:.3}\"{style}];",
                pos(a),
                pos(b),
                arc.value
            );
        }
        for (a, b) in &self.long_distance_arcs {
            let _ = writeln!(out, "  n{} -> n{} [style=dashed, color=gray];", pos(a), pos(b));
        }
        out.push_str("}\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::tree_to_petri;

    fn count(dot: &str, needle: &str) -> usize {
        dot.lines().filter(|l| l.contains(needle)).count()
    }

    #[test]
    fn single_transition_net() {
        let dot = export_dot(&tree_to_petri(&ProcessTree::activity("a")));
        assert!(dot.starts_with("digraph"));
        assert_eq!(count(&dot, "shape=circle"), 2);
        assert_eq!(count(&dot, "shape=box"), 1);
    }

    #[test]
    fn empty_dfg() {
        let dot = export_dot(&DirectlyFollowsGraph::default());
        assert_eq!(dot, "digraph dfg {\n}\n");
    }

    #[test]
    fn and_net_has_four_boxes() {
        let dot = export_dot(&tree_to_petri(&"And(a, b)".parse().unwrap()));
        assert_eq!(count(&dot, "shape=box"), 4);
        assert_eq!(count(&dot, "fillcolor=black"), 2);
    }

    #[test]
    fn quoting() {
        assert_eq!(quote("a \"b\""), "\"a \\\"b\\\"\"");
        let dot = export_dot(&ProcessTree::activity("x\\y"));
        assert!(dot.contains("\"x\\\\y\""));
    }
}
