//! Petri nets with token semantics, conversions from discovered models,
//! PNML/DOT export and the bundled systematic model.

mod convert;
pub mod dot;
mod pnml;
mod systematic;

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

pub use convert::{cnet_to_petri, tree_to_petri};
pub use dot::{export_dot, ToDot};
pub use pnml::{export_pnml, import_pnml};
pub use systematic::{build_systematic_model, SYSTEMATIC_MODEL_PATH};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NetError {
    #[error("transition {0} is not enabled")]
    NotEnabled(String),
    #[error("causal net node '{0}' has no bindings")]
    Disconnected(String),
    #[error("PNML error: {0}")]
    Pnml(String),
    #[error("model load error: {0}")]
    Load(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PlaceId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TransitionId(pub usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Place {
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub name: String,
    /// `None` for silent transitions.
    pub label: Option<String>,
}

impl Transition {
    pub fn is_silent(&self) -> bool {
        self.label.is_none()
    }
}

/// Token distribution over the places of one net.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Marking(pub Vec<u32>);

impl Marking {
    pub fn empty(places: usize) -> Self {
        Marking(vec![0; places])
    }

    pub fn get(&self, p: PlaceId) -> u32 {
        self.0.get(p.0).copied().unwrap_or(0)
    }

    pub fn set(&mut self, p: PlaceId, tokens: u32) {
        if self.0.len() <= p.0 {
            self.0.resize(p.0 + 1, 0);
        }
        self.0[p.0] = tokens;
    }

    pub fn total(&self) -> u64 {
        self.0.iter().map(|&t| t as u64).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.0.iter().all(|&t| t == 0)
    }

    /// `self ≥ other` place-wise.
    pub fn covers(&self, other: &Marking) -> bool {
        (0..self.0.len().max(other.0.len()))
            .all(|i| self.0.get(i).copied().unwrap_or(0) >= other.0.get(i).copied().unwrap_or(0))
    }
}

impl fmt::Display for Marking {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        let mut first = true;
        for (i, &t) in self.0.iter().enumerate() {
            if t > 0 {
                if !first {
                    f.write_str(", ")?;
                }
                first = false;
                write!(f, "p{i}:{t}")?;
            }
        }
        f.write_str("]")
    }
}

/// Place/transition net with weighted arcs and initial/final markings.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PetriNet {
    places: Vec<Place>,
    transitions: Vec<Transition>,
    pre: Vec<Vec<(PlaceId, u32)>>,
    post: Vec<Vec<(PlaceId, u32)>>,
    initial: Vec<(PlaceId, u32)>,
    final_: Vec<(PlaceId, u32)>,
}

fn bump(arcs: &mut Vec<(PlaceId, u32)>, p: PlaceId, w: u32) {
    match arcs.iter_mut().find(|(q, _)| *q == p) {
        Some((_, x)) => *x += w,
        None => {
            arcs.push((p, w));
            arcs.sort();
        }
    }
}

impl PetriNet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_place(&mut self, name: impl Into<String>) -> PlaceId {
        self.places.push(Place { name: name.into() });
        PlaceId(self.places.len() - 1)
    }

    pub fn add_transition(&mut self, name: impl Into<String>, label: Option<String>) -> TransitionId {
        self.transitions.push(Transition {
            name: name.into(),
            label,
        });
        self.pre.push(Vec::new());
        self.post.push(Vec::new());
        TransitionId(self.transitions.len() - 1)
    }

    pub fn add_input_arc(&mut self, p: PlaceId, t: TransitionId) {
        self.add_input_arc_weighted(p, t, 1);
    }

    pub fn add_output_arc(&mut self, t: TransitionId, p: PlaceId) {
        self.add_output_arc_weighted(t, p, 1);
    }

    pub fn add_input_arc_weighted(&mut self, p: PlaceId, t: TransitionId, weight: u32) {
        bump(&mut self.pre[t.0], p, weight);
    }

    pub fn add_output_arc_weighted(&mut self, t: TransitionId, p: PlaceId, weight: u32) {
        bump(&mut self.post[t.0], p, weight);
    }

    pub fn set_initial(&mut self, p: PlaceId, tokens: u32) {
        self.initial.retain(|(q, _)| *q != p);
        if tokens > 0 {
            self.initial.push((p, tokens));
            self.initial.sort();
        }
    }

    pub fn set_final(&mut self, p: PlaceId, tokens: u32) {
        self.final_.retain(|(q, _)| *q != p);
        if tokens > 0 {
            self.final_.push((p, tokens));
            self.final_.sort();
        }
    }

    pub fn places(&self) -> &[Place] {
        &self.places
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn place(&self, p: PlaceId) -> &Place {
        &self.places[p.0]
    }

    pub fn transition(&self, t: TransitionId) -> &Transition {
        &self.transitions[t.0]
    }

    pub fn transition_ids(&self) -> impl Iterator<Item = TransitionId> {
        (0..self.transitions.len()).map(TransitionId)
    }

    pub fn place_ids(&self) -> impl Iterator<Item = PlaceId> {
        (0..self.places.len()).map(PlaceId)
    }

    pub fn preset(&self, t: TransitionId) -> &[(PlaceId, u32)] {
        &self.pre[t.0]
    }

    pub fn postset(&self, t: TransitionId) -> &[(PlaceId, u32)] {
        &self.post[t.0]
    }

    /// Transitions producing into `p`.
    pub fn place_preset(&self, p: PlaceId) -> Vec<TransitionId> {
        self.transition_ids()
            .filter(|&t| self.post[t.0].iter().any(|(q, _)| *q == p))
            .collect()
    }

    /// Transitions consuming from `p`.
    pub fn place_postset(&self, p: PlaceId) -> Vec<TransitionId> {
        self.transition_ids()
            .filter(|&t| self.pre[t.0].iter().any(|(q, _)| *q == p))
            .collect()
    }

    pub fn arc_count(&self) -> usize {
        self.pre.iter().chain(&self.post).map(Vec::len).sum()
    }

    pub fn initial_marking(&self) -> Marking {
        self.dense(&self.initial)
    }

    pub fn final_marking(&self) -> Marking {
        self.dense(&self.final_)
    }

    fn dense(&self, sparse: &[(PlaceId, u32)]) -> Marking {
        let mut m = Marking::empty(self.places.len());
        for &(p, t) in sparse {
            m.set(p, t);
        }
        m
    }

    /// Visible labels.
    pub fn labels(&self) -> BTreeSet<String> {
        self.transitions.iter().filter_map(|t| t.label.clone()).collect()
    }

    pub fn transitions_with_label<'a>(&'a self, label: &'a str) -> impl Iterator<Item = TransitionId> + 'a {
        self.transition_ids()
            .filter(move |t| self.transitions[t.0].label.as_deref() == Some(label))
    }

    pub fn is_enabled(&self, m: &Marking, t: TransitionId) -> bool {
        self.pre[t.0].iter().all(|&(p, w)| m.get(p) >= w)
    }

    pub fn enabled(&self, m: &Marking) -> Vec<TransitionId> {
        self.transition_ids().filter(|&t| self.is_enabled(m, t)).collect()
    }

    pub fn fire(&self, m: &Marking, t: TransitionId) -> Result<Marking, NetError> {
        if !self.is_enabled(m, t) {
            return Err(NetError::NotEnabled(self.transitions[t.0].name.clone()));
        }
        Ok(self.fire_unchecked(m, t))
    }

    /// Fire without the enabledness check. The caller guarantees the preset
    /// is covered.
    pub(crate) fn fire_unchecked(&self, m: &Marking, t: TransitionId) -> Marking {
        let mut next = m.clone();
        if next.0.len() < self.places.len() {
            next.0.resize(self.places.len(), 0);
        }
        for &(p, w) in &self.pre[t.0] {
            next.0[p.0] -= w;
        }
        for &(p, w) in &self.post[t.0] {
            next.0[p.0] += w;
        }
        next
    }

    /// Places without producers.
    pub fn source_places(&self) -> Vec<PlaceId> {
        self.place_ids().filter(|&p| self.place_preset(p).is_empty()).collect()
    }

    /// Places without consumers.
    pub fn sink_places(&self) -> Vec<PlaceId> {
        self.place_ids().filter(|&p| self.place_postset(p).is_empty()).collect()
    }

    /// A single place serving as both source and sink, as produced for empty
    /// models.
    pub fn is_degenerate(&self) -> bool {
        self.transitions.is_empty() && self.places.len() == 1
    }

    pub(crate) fn remove_transition(&mut self, t: TransitionId) {
        self.transitions.remove(t.0);
        self.pre.remove(t.0);
        self.post.remove(t.0);
    }

    /// Merge place `q` into `p` and drop `q`.
    pub(crate) fn merge_places(&mut self, p: PlaceId, q: PlaceId) {
        let remap = |arcs: &mut Vec<(PlaceId, u32)>| {
            let mut out: Vec<(PlaceId, u32)> = Vec::new();
            for &(x, w) in arcs.iter() {
                let x = if x == q { p } else { x };
                let x = if x.0 > q.0 { PlaceId(x.0 - 1) } else { x };
                bump(&mut out, x, w);
            }
            *arcs = out;
        };
        for arcs in self.pre.iter_mut().chain(self.post.iter_mut()) {
            remap(arcs);
        }
        remap(&mut self.initial);
        remap(&mut self.final_);
        self.places.remove(q.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq_ab() -> (PetriNet, TransitionId, TransitionId) {
        let mut n = PetriNet::new();
        let s = n.add_place("source");
        let m = n.add_place("p1");
        let e = n.add_place("sink");
        let a = n.add_transition("a", Some("a".into()));
        let b = n.add_transition("b", Some("b".into()));
        n.add_input_arc(s, a);
        n.add_output_arc(a, m);
        n.add_input_arc(m, b);
        n.add_output_arc(b, e);
        n.set_initial(s, 1);
        n.set_final(e, 1);
        (n, a, b)
    }

    #[test]
    fn enabled_and_fire() {
        let (n, a, b) = seq_ab();
        let m0 = n.initial_marking();
        assert_eq!(n.enabled(&m0), vec![a]);
        let m1 = n.fire(&m0, a).unwrap();
        assert_eq!(m1, Marking(vec![0, 1, 0]));
        assert_eq!(n.enabled(&m1), vec![b]);
        assert!(n.enabled(&Marking::empty(3)).is_empty());
        assert_eq!(n.fire(&m0, b), Err(NetError::NotEnabled("b".into())));
        let m2 = n.fire(&m1, b).unwrap();
        assert_eq!(m2, n.final_marking());
    }

    #[test]
    fn weighted_arcs_accumulate() {
        let mut n = PetriNet::new();
        let p = n.add_place("p");
        let t = n.add_transition("t", None);
        n.add_input_arc(p, t);
        n.add_input_arc(p, t);
        assert_eq!(n.preset(t), &[(p, 2)]);
        let mut m = Marking::empty(1);
        m.set(p, 1);
        assert!(!n.is_enabled(&m, t));
        m.set(p, 3);
        assert_eq!(n.fire(&m, t).unwrap().get(p), 1);
    }

    #[test]
    fn merge_places_remaps_arcs() {
        let (mut n, a, b) = seq_ab();
        n.merge_places(PlaceId(0), PlaceId(1));
        assert_eq!(n.places().len(), 2);
        assert_eq!(n.postset(a), &[(PlaceId(0), 1)]);
        assert_eq!(n.preset(b), &[(PlaceId(0), 1)]);
        assert_eq!(n.final_marking(), Marking(vec![0, 1]));
    }
}
