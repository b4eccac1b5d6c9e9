use std::collections::BTreeMap;

use super::{NetError, PetriNet, PlaceId, TransitionId};
use crate::heuristics::CausalNet;
use crate::inductive::ProcessTree;

struct TreeBuilder {
    net: PetriNet,
    taus: usize,
}

impl TreeBuilder {
    fn place(&mut self) -> PlaceId {
        let n = self.net.places().len();
        self.net.add_place(format!("p{n}"))
    }

    fn silent(&mut self) -> TransitionId {
        self.taus += 1;
        self.net.add_transition(format!("tau_{}", self.taus), None)
    }

    fn wire(&mut self, from: &[PlaceId], t: TransitionId, to: &[PlaceId]) {
        for &p in from {
            self.net.add_input_arc(p, t);
        }
        for &p in to {
            self.net.add_output_arc(t, p);
        }
    }

    fn build(&mut self, tree: &ProcessTree, entry: PlaceId, exit: PlaceId) {
        match tree {
            ProcessTree::Activity(a) => {
                let t = self.net.add_transition(a.clone(), Some(a.clone()));
                self.wire(&[entry], t, &[exit]);
            }
            ProcessTree::Silent => {
                let t = self.silent();
                self.wire(&[entry], t, &[exit]);
            }
            ProcessTree::Sequence(children) => {
                let mut from = entry;
                for (i, child) in children.iter().enumerate() {
                    let to = if i + 1 == children.len() { exit } else { self.place() };
                    self.build(child, from, to);
                    from = to;
                }
            }
            ProcessTree::Xor(children) => {
                for child in children {
                    self.build(child, entry, exit);
                }
            }
            ProcessTree::Concurrent(children) => {
                let split = self.silent();
                let join = self.silent();
                self.net.add_input_arc(entry, split);
                self.net.add_output_arc(join, exit);
                for child in children {
                    let s = self.place();
                    let e = self.place();
                    self.net.add_output_arc(split, s);
                    self.build(child, s, e);
                    self.net.add_input_arc(e, join);
                }
            }
            ProcessTree::Loop(children) => {
                let start = self.place();
                let end = self.place();
                let enter = self.silent();
                self.wire(&[entry], enter, &[start]);
                self.build(&children[0], start, end);
                for redo in &children[1..] {
                    self.build(redo, end, start);
                }
                let leave = self.silent();
                self.wire(&[end], leave, &[exit]);
            }
        }
    }
}

/// Block-wise translation of a process tree into a workflow net with places
/// `source` (initially marked) and `sink` (finally marked).
pub fn tree_to_petri(tree: &ProcessTree) -> PetriNet {
    let mut b = TreeBuilder {
        net: PetriNet::new(),
        taus: 0,
    };
    let source = b.net.add_place("source");
    let sink = b.net.add_place("sink");
    b.build(tree, source, sink);
    b.net.set_initial(source, 1);
    b.net.set_final(sink, 1);
    b.net
}

/// Translate a causal net. Every binding becomes a silent routing transition
/// over one place per arc; trivial routing steps are then fused away.
/// Long-distance arcs become extra places between the two activities.
pub fn cnet_to_petri(cnet: &CausalNet) -> Result<PetriNet, NetError> {
    let mut net = PetriNet::new();
    let source = net.add_place("source");
    if cnet.is_empty() {
        log::warn!("empty causal net converted to a degenerate net with source = sink");
        net.set_initial(source, 1);
        net.set_final(source, 1);
        return Ok(net);
    }
    for node in &cnet.nodes {
        let empty = |m: &BTreeMap<String, Vec<_>>| m.get(node).map(Vec::is_empty).unwrap_or(true);
        if empty(&cnet.inputs) || empty(&cnet.outputs) {
            return Err(NetError::Disconnected(node.clone()));
        }
    }
    let sink = net.add_place("sink");
    let mut inp = BTreeMap::new();
    let mut out = BTreeMap::new();
    let mut act = BTreeMap::new();
    for node in &cnet.nodes {
        let i = net.add_place(format!("in_{node}"));
        let o = net.add_place(format!("out_{node}"));
        let t = net.add_transition(node.clone(), Some(node.clone()));
        net.add_input_arc(i, t);
        net.add_output_arc(t, o);
        inp.insert(node.as_str(), i);
        out.insert(node.as_str(), o);
        act.insert(node.as_str(), t);
    }
    let mut arc_place = BTreeMap::new();
    for (a, b) in cnet.arcs.keys() {
        let p = net.add_place(format!("{a}->{b}"));
        arc_place.insert((a.as_str(), b.as_str()), p);
    }
    let mut taus = 0;
    let mut tau = |net: &mut PetriNet| {
        taus += 1;
        net.add_transition(format!("tau_{taus}"), None)
    };
    for (a, bindings) in &cnet.outputs {
        for binding in bindings {
            let t = tau(&mut net);
            net.add_input_arc(out[a.as_str()], t);
            if binding.is_empty() {
                net.add_output_arc(t, sink);
            }
            for b in binding {
                net.add_output_arc(t, arc_place[&(a.as_str(), b.as_str())]);
            }
        }
    }
    for (b, bindings) in &cnet.inputs {
        for binding in bindings {
            let t = tau(&mut net);
            net.add_output_arc(t, inp[b.as_str()]);
            if binding.is_empty() {
                net.add_input_arc(source, t);
            }
            for a in binding {
                net.add_input_arc(arc_place[&(a.as_str(), b.as_str())], t);
            }
        }
    }
    for (a, b) in &cnet.long_distance_arcs {
        if let (Some(&ta), Some(&tb)) = (act.get(a.as_str()), act.get(b.as_str())) {
            let p = net.add_place(format!("ld_{a}->{b}"));
            net.add_output_arc(ta, p);
            net.add_input_arc(p, tb);
        }
    }
    net.set_initial(source, 1);
    net.set_final(sink, 1);
    fuse_series(&mut net);
    Ok(net)
}

/// Remove silent transitions that merely pass one token from a place used
/// only by them to a place fed only by them.
fn fuse_series(net: &mut PetriNet) {
    loop {
        let initial = net.initial_marking();
        let fin = net.final_marking();
        let candidate = net.transition_ids().find_map(|t| {
            if !net.transition(t).is_silent() {
                return None;
            }
            let (pre, post) = (net.preset(t), net.postset(t));
            if pre.len() != 1 || post.len() != 1 || pre[0].1 != 1 || post[0].1 != 1 {
                return None;
            }
            let (p, q) = (pre[0].0, post[0].0);
            let ok = p != q
                && net.place_postset(p) == vec![t]
                && net.place_preset(q) == vec![t]
                && !(initial.get(p) > 0 && fin.get(q) > 0);
            ok.then_some((t, p, q))
        });
        let Some((t, p, q)) = candidate else { break };
        net.remove_transition(t);
        if fin.get(q) > 0 || initial.get(q) > 0 {
            // keep the name of the marked place
            let name = net.place(q).name.clone();
            net.places[p.0].name = name;
        }
        net.merge_places(p, q);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heuristics::{discover_heuristics, HeuristicsParams};
    use crate::EventLog;

    fn tree(s: &str) -> ProcessTree {
        s.parse().unwrap()
    }

    #[test]
    fn tree_sizes() {
        let n = tree_to_petri(&tree("a"));
        assert_eq!((n.places().len(), n.transitions().len()), (2, 1));
        let n = tree_to_petri(&tree("Seq(a, b)"));
        assert_eq!((n.places().len(), n.transitions().len()), (3, 2));
        let n = tree_to_petri(&tree("And(a, b)"));
        assert_eq!((n.places().len(), n.transitions().len()), (6, 4));
        let split = n.transition_ids().find(|&t| n.transition(t).is_silent()).unwrap();
        let m = n.fire(&n.initial_marking(), split).unwrap();
        assert_eq!(m.total(), 2);
    }

    #[test]
    fn and_of_three_fires_back_to_one_token() {
        let n = tree_to_petri(&tree("And(a, b, c)"));
        let silent: Vec<_> = n.transition_ids().filter(|&t| n.transition(t).is_silent()).collect();
        assert_eq!(n.preset(silent[0]).len(), 1);
        assert_eq!(n.postset(silent[0]).len(), 3);
        assert_eq!(n.preset(silent[1]).len(), 3);
    }

    fn hm(seqs: &[(&[&str], usize)], t: f64) -> CausalNet {
        let mut all = Vec::new();
        for (s, k) in seqs {
            for _ in 0..*k {
                all.push(s.to_vec());
            }
        }
        let p = HeuristicsParams {
            dependency_threshold: t,
            ..Default::default()
        };
        discover_heuristics(&EventLog::from_sequences(&all), &p).unwrap()
    }

    #[test]
    fn two_node_cnet_is_a_chain() {
        let n = cnet_to_petri(&hm(&[(&["a", "b"], 10)], 0.9)).unwrap();
        assert_eq!((n.places().len(), n.transitions().len()), (3, 2));
        assert!(n.transitions().iter().all(|t| !t.is_silent()));
        assert_eq!(n.source_places().len(), 1);
        assert_eq!(n.sink_places().len(), 1);
    }

    #[test]
    fn xor_bindings_become_silent_branches() {
        let n = cnet_to_petri(&hm(&[(&["a", "b", "d"], 5), (&["a", "c", "d"], 5)], 0.8)).unwrap();
        let a = n.transitions_with_label("a").next().unwrap();
        let out = n.postset(a)[0].0;
        let branches = n.place_postset(out);
        assert_eq!(branches.len(), 2);
        assert!(branches.iter().all(|&t| n.transition(t).is_silent()));
    }

    #[test]
    fn empty_cnet_is_degenerate() {
        let n = cnet_to_petri(&CausalNet::default()).unwrap();
        assert!(n.is_degenerate());
        assert_eq!(n.initial_marking(), n.final_marking());
    }

    #[test]
    fn node_without_bindings_is_an_error() {
        let mut c = hm(&[(&["a", "b"], 10)], 0.9);
        c.nodes.insert("z".into());
        assert_eq!(cnet_to_petri(&c), Err(NetError::Disconnected("z".into())));
    }
}
