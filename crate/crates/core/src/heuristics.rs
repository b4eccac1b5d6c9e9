//! Heuristics Miner: dependency graph, split/join bindings and long-distance
//! dependencies.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::dfg::UnionFind;
use crate::eventlog::{ActivityLog, EventLog};

#[derive(Debug, Error, PartialEq)]
pub enum HeuristicsError {
    #[error("parameter {name} = {value} out of range")]
    InvalidParameter { name: &'static str, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeuristicsParams {
    pub dependency_threshold: f64,
    pub long_distance_threshold: f64,
    pub and_threshold: f64,
    pub min_directly_follows: usize,
    /// Give every activity an incoming and an outgoing arc by adding its best
    /// observed candidate when thresholding left it unconnected.
    pub all_activities_connected: bool,
}

impl Default for HeuristicsParams {
    fn default() -> Self {
        HeuristicsParams {
            dependency_threshold: 0.95,
            long_distance_threshold: 0.98,
            and_threshold: 0.65,
            min_directly_follows: 1,
            all_activities_connected: true,
        }
    }
}

impl HeuristicsParams {
    pub fn validate(&self) -> Result<(), HeuristicsError> {
        for (name, value) in [
            ("dependency_threshold", self.dependency_threshold),
            ("long_distance_threshold", self.long_distance_threshold),
            ("and_threshold", self.and_threshold),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(HeuristicsError::InvalidParameter { name, value });
            }
        }
        if self.min_directly_follows < 1 {
            return Err(HeuristicsError::InvalidParameter {
                name: "min_directly_follows",
                value: self.min_directly_follows as f64,
            });
        }
        Ok(())
    }
}

pub fn dependency_measure(count_ab: usize, count_ba: usize) -> f64 {
    let (ab, ba) = (count_ab as f64, count_ba as f64);
    (ab - ba) / (ab + ba + 1.0)
}

pub fn self_loop_measure(count_aa: usize) -> f64 {
    let aa = count_aa as f64;
    aa / (aa + 1.0)
}

/// `count_aba` and `count_bab` count occurrences of the patterns a,b,a and
/// b,a,b.
pub fn two_loop_measure(count_aba: usize, count_bab: usize) -> f64 {
    let s = (count_aba + count_bab) as f64;
    s / (s + 1.0)
}

/// AND measure for successors (or predecessors) `b`, `c` of `a`.
pub fn and_measure(count_bc: usize, count_cb: usize, count_ab: usize, count_ac: usize) -> f64 {
    (count_bc + count_cb) as f64 / (count_ab + count_ac + 1) as f64
}

pub fn long_distance_measure(count_eventually: usize, count_a: usize, count_b: usize) -> f64 {
    2.0 * count_eventually as f64 / (count_a + count_b + 1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DependencyArc {
    pub value: f64,
    pub repaired: bool,
}

/// Frequencies gathered in one pass over the variants.
#[derive(Debug, Clone, Default, PartialEq)]
struct Counts {
    activities: BTreeMap<String, usize>,
    directly_follows: BTreeMap<(String, String), usize>,
    two_loops: BTreeMap<(String, String), usize>,
    starts: BTreeMap<String, usize>,
    ends: BTreeMap<String, usize>,
}

impl Counts {
    fn of(log: &ActivityLog) -> Counts {
        let mut c = Counts::default();
        for (trace, n) in log.variants() {
            for a in trace {
                *c.activities.entry(a.clone()).or_default() += n;
            }
            if let (Some(f), Some(l)) = (trace.first(), trace.last()) {
                *c.starts.entry(f.clone()).or_default() += n;
                *c.ends.entry(l.clone()).or_default() += n;
            }
            for w in trace.windows(2) {
                *c.directly_follows
                    .entry((w[0].clone(), w[1].clone()))
                    .or_default() += n;
            }
            for w in trace.windows(3) {
                if w[0] == w[2] && w[0] != w[1] {
                    *c.two_loops.entry((w[0].clone(), w[1].clone())).or_default() += n;
                }
            }
        }
        c
    }

    fn df(&self, a: &str, b: &str) -> usize {
        self.directly_follows
            .get(&(a.to_string(), b.to_string()))
            .copied()
            .unwrap_or(0)
    }

    fn two_loop(&self, a: &str, b: &str) -> usize {
        self.two_loops
            .get(&(a.to_string(), b.to_string()))
            .copied()
            .unwrap_or(0)
    }
}

/// Most frequent key, ties to the smallest label.
fn most_frequent(counts: &BTreeMap<String, usize>) -> Option<String> {
    counts
        .iter()
        .max_by(|x, y| x.1.cmp(y.1).then(y.0.cmp(x.0)))
        .map(|(k, _)| k.clone())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DependencyGraph {
    nodes: BTreeSet<String>,
    arcs: BTreeMap<(String, String), DependencyArc>,
    counts: Counts,
    start: Option<String>,
    end: Option<String>,
}

impl DependencyGraph {
    pub fn nodes(&self) -> &BTreeSet<String> {
        &self.nodes
    }

    pub fn arcs(&self) -> &BTreeMap<(String, String), DependencyArc> {
        &self.arcs
    }

    pub fn arc(&self, a: &str, b: &str) -> Option<&DependencyArc> {
        self.arcs.get(&(a.to_string(), b.to_string()))
    }

    /// Directly-follows count underlying the arc values.
    pub fn frequency(&self, a: &str, b: &str) -> usize {
        self.counts.df(a, b)
    }

    pub fn activity_count(&self, a: &str) -> usize {
        self.counts.activities.get(a).copied().unwrap_or(0)
    }

    /// Designated start activity: the most frequent first activity.
    pub fn start(&self) -> Option<&str> {
        self.start.as_deref()
    }

    pub fn end(&self) -> Option<&str> {
        self.end.as_deref()
    }

    pub fn successors(&self, a: &str) -> Vec<&str> {
        self.arcs
            .keys()
            .filter(|(x, _)| x == a)
            .map(|(_, y)| y.as_str())
            .collect()
    }

    pub fn predecessors(&self, b: &str) -> Vec<&str> {
        self.arcs
            .keys()
            .filter(|(_, y)| y == b)
            .map(|(x, _)| x.as_str())
            .collect()
    }

    /// Activities touched by at least one arc that thresholding kept.
    pub fn connected_activities(&self) -> BTreeSet<String> {
        self.arcs
            .iter()
            .filter(|(_, arc)| !arc.repaired)
            .flat_map(|((a, b), _)| [a.clone(), b.clone()])
            .collect()
    }
}

fn dependency_value(counts: &Counts, a: &str, b: &str, threshold: f64) -> f64 {
    if a == b {
        return self_loop_measure(counts.df(a, a));
    }
    let self_loop = |x: &str| self_loop_measure(counts.df(x, x)) >= threshold;
    // length-two loops first, unless either side is a length-one loop
    if !self_loop(a) && !self_loop(b) {
        let l2 = two_loop_measure(counts.two_loop(a, b), counts.two_loop(b, a));
        if l2 >= threshold {
            return l2;
        }
    }
    dependency_measure(counts.df(a, b), counts.df(b, a))
}

pub fn build_dependency_graph(log: &EventLog, params: &HeuristicsParams) -> DependencyGraph {
    build_from_variants(&ActivityLog::from(log), params)
}

fn build_from_variants(log: &ActivityLog, params: &HeuristicsParams) -> DependencyGraph {
    let counts = Counts::of(log);
    let nodes: BTreeSet<String> = counts.activities.keys().cloned().collect();
    let t = params.dependency_threshold;
    let mut arcs = BTreeMap::new();
    for ((a, b), &n) in &counts.directly_follows {
        let value = dependency_value(&counts, a, b, t);
        if value >= t && n >= params.min_directly_follows {
            arcs.insert(
                (a.clone(), b.clone()),
                DependencyArc {
                    value,
                    repaired: false,
                },
            );
        }
    }
    let start = most_frequent(&counts.starts);
    let end = most_frequent(&counts.ends);
    if params.all_activities_connected {
        for a in &nodes {
            let has_in = arcs.keys().any(|(x, y)| y == a && x != a);
            if Some(a) != start.as_ref() && !has_in {
                let pick = best_candidate(&counts, &nodes, t, |x| (x.to_string(), a.clone()))
                    .or_else(|| start.clone().filter(|s| s != a));
                if let Some(p) = pick {
                    let value = dependency_value(&counts, &p, a, t);
                    arcs.insert((p, a.clone()), DependencyArc { value, repaired: true });
                }
            }
            let has_out = arcs.keys().any(|(x, y)| x == a && y != a);
            if Some(a) != end.as_ref() && !has_out {
                let pick = best_candidate(&counts, &nodes, t, |x| (a.clone(), x.to_string()))
                    .or_else(|| end.clone().filter(|e| e != a));
                if let Some(s) = pick {
                    let value = dependency_value(&counts, a, &s, t);
                    arcs.insert((a.clone(), s), DependencyArc { value, repaired: true });
                }
            }
        }
    }
    DependencyGraph {
        nodes,
        arcs,
        counts,
        start,
        end,
    }
}

/// Best-valued observed arc among `pair(x)` for all other activities `x`.
fn best_candidate(
    counts: &Counts,
    nodes: &BTreeSet<String>,
    threshold: f64,
    pair: impl Fn(&str) -> (String, String),
) -> Option<String> {
    let mut best: Option<(f64, String)> = None;
    for x in nodes {
        let (a, b) = pair(x);
        if a == b || counts.df(&a, &b) == 0 {
            continue;
        }
        let v = dependency_value(counts, &a, &b, threshold);
        if best.as_ref().map(|(bv, _)| v > *bv).unwrap_or(true) {
            best = Some((v, x.clone()));
        }
    }
    best.map(|(_, x)| x)
}

/// Causal net: per activity, input and output bindings. Each binding is a set
/// of neighbours activated together; alternative bindings are exclusive. An
/// empty binding lets the start activity begin (inputs) or the end activity
/// finish (outputs).
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CausalNet {
    pub nodes: BTreeSet<String>,
    pub inputs: BTreeMap<String, Vec<BTreeSet<String>>>,
    pub outputs: BTreeMap<String, Vec<BTreeSet<String>>>,
    pub arcs: BTreeMap<(String, String), DependencyArc>,
    pub long_distance_arcs: BTreeSet<(String, String)>,
    pub start: Option<String>,
    pub end: Option<String>,
}

impl CausalNet {
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Bindings reference only graph neighbours, the start has the empty input
    /// binding and the end has the empty output binding.
    pub fn is_valid(&self) -> bool {
        let neighbour_ok = |map: &BTreeMap<String, Vec<BTreeSet<String>>>, outgoing: bool| {
            map.iter().all(|(node, bindings)| {
                bindings.iter().flatten().all(|other| {
                    let key = if outgoing {
                        (node.clone(), other.clone())
                    } else {
                        (other.clone(), node.clone())
                    };
                    self.arcs.contains_key(&key)
                })
            })
        };
        let has_empty = |map: &BTreeMap<String, Vec<BTreeSet<String>>>, n: &Option<String>| match n {
            Some(n) => map.get(n).map(|b| b.iter().any(BTreeSet::is_empty)).unwrap_or(false),
            None => self.nodes.is_empty(),
        };
        neighbour_ok(&self.inputs, false)
            && neighbour_ok(&self.outputs, true)
            && has_empty(&self.inputs, &self.start)
            && has_empty(&self.outputs, &self.end)
    }
}

/// Group neighbours into AND bindings: connected components of the relation
/// "AND measure at least `and_threshold`".
fn group_bindings(
    neighbours: &[&str],
    and_value: impl Fn(&str, &str) -> f64,
    threshold: f64,
) -> Vec<BTreeSet<String>> {
    let mut uf = UnionFind::new(neighbours.len());
    for i in 0..neighbours.len() {
        for j in (i + 1)..neighbours.len() {
            if and_value(neighbours[i], neighbours[j]) >= threshold {
                uf.union(i, j);
            }
        }
    }
    let mut groups: BTreeMap<usize, BTreeSet<String>> = BTreeMap::new();
    for (i, n) in neighbours.iter().enumerate() {
        groups.entry(uf.find(i)).or_default().insert(n.to_string());
    }
    let mut out: Vec<BTreeSet<String>> = groups.into_values().collect();
    out.sort();
    out
}

pub fn bind_splits_joins(graph: &DependencyGraph, params: &HeuristicsParams) -> CausalNet {
    let c = &graph.counts;
    let mut net = CausalNet {
        nodes: graph.nodes.clone(),
        arcs: graph.arcs.clone(),
        start: graph.start.clone(),
        end: graph.end.clone(),
        ..Default::default()
    };
    for a in &graph.nodes {
        let succ = graph.successors(a);
        let mut outs = group_bindings(
            &succ,
            |b, x| and_measure(c.df(b, x), c.df(x, b), c.df(a, b), c.df(a, x)),
            params.and_threshold,
        );
        if graph.end.as_deref() == Some(a) {
            outs.insert(0, BTreeSet::new());
        }
        let pred = graph.predecessors(a);
        let mut ins = group_bindings(
            &pred,
            |b, x| and_measure(c.df(b, x), c.df(x, b), c.df(b, a), c.df(x, a)),
            params.and_threshold,
        );
        if graph.start.as_deref() == Some(a) {
            ins.insert(0, BTreeSet::new());
        }
        net.outputs.insert(a.clone(), outs);
        net.inputs.insert(a.clone(), ins);
    }
    net
}

/// Pairs whose eventually-follows measure reaches the long-distance
/// threshold and that are not already joined by a direct arc.
pub fn long_distance_dependencies(
    log: &EventLog,
    graph: &DependencyGraph,
    params: &HeuristicsParams,
) -> BTreeSet<(String, String)> {
    long_distance_from_variants(&ActivityLog::from(log), graph, params)
}

fn long_distance_from_variants(
    log: &ActivityLog,
    graph: &DependencyGraph,
    params: &HeuristicsParams,
) -> BTreeSet<(String, String)> {
    let mut eventually: BTreeMap<(&str, &str), usize> = BTreeMap::new();
    for (trace, n) in log.variants() {
        let mut pairs: BTreeSet<(&str, &str)> = BTreeSet::new();
        for (i, a) in trace.iter().enumerate() {
            for b in &trace[i + 1..] {
                if a != b {
                    pairs.insert((a.as_str(), b.as_str()));
                }
            }
        }
        for p in pairs {
            *eventually.entry(p).or_default() += n;
        }
    }
    eventually
        .into_iter()
        .filter(|&((a, b), n)| {
            graph.arc(a, b).is_none()
                && long_distance_measure(n, graph.activity_count(a), graph.activity_count(b))
                    >= params.long_distance_threshold
        })
        .map(|((a, b), _)| (a.to_string(), b.to_string()))
        .collect()
}

pub fn discover_heuristics(log: &EventLog, params: &HeuristicsParams) -> Result<CausalNet, HeuristicsError> {
    params.validate()?;
    let variants = ActivityLog::from(log);
    let graph = build_from_variants(&variants, params);
    let mut net = bind_splits_joins(&graph, params);
    net.long_distance_arcs = long_distance_from_variants(&variants, &graph, params);
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log(parts: &[(&[&str], usize)]) -> EventLog {
        let mut seqs = Vec::new();
        for (s, n) in parts {
            for _ in 0..*n {
                seqs.push(s.to_vec());
            }
        }
        EventLog::from_sequences(&seqs)
    }

    fn params(t: f64) -> HeuristicsParams {
        HeuristicsParams {
            dependency_threshold: t,
            ..Default::default()
        }
    }

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn dependency_measure_examples() {
        assert!((dependency_measure(5, 0) - 5.0 / 6.0).abs() < 1e-12);
        assert_eq!(dependency_measure(2, 2), 0.0);
        assert_eq!(dependency_measure(0, 0), 0.0);
    }

    #[test]
    fn single_strong_arc() {
        let g = build_dependency_graph(&log(&[(&["a", "b"], 10)]), &params(0.9));
        let arc = g.arc("a", "b").unwrap();
        assert!((arc.value - 10.0 / 11.0).abs() < 1e-12);
        assert!(!arc.repaired);
        assert_eq!(g.arcs().len(), 1);
    }

    #[test]
    fn symmetric_log_needs_repair() {
        let g = build_dependency_graph(&log(&[(&["a", "b"], 5), (&["b", "a"], 5)]), &params(0.9));
        assert!(!g.arcs().is_empty());
        assert!(g.arcs().values().all(|a| a.repaired));
        let strict = HeuristicsParams {
            all_activities_connected: false,
            ..params(0.9)
        };
        let g = build_dependency_graph(&log(&[(&["a", "b"], 5), (&["b", "a"], 5)]), &strict);
        assert!(g.arcs().is_empty());
    }

    #[test]
    fn empty_log_empty_graph() {
        let g = build_dependency_graph(&log(&[]), &HeuristicsParams::default());
        assert!(g.nodes().is_empty());
        assert!(g.arcs().is_empty());
        let net = discover_heuristics(&log(&[]), &HeuristicsParams::default()).unwrap();
        assert!(net.is_empty());
    }

    #[test]
    fn and_split() {
        let l = log(&[(&["a", "b", "c", "d"], 5), (&["a", "c", "b", "d"], 5)]);
        let p = params(0.8);
        let net = bind_splits_joins(&build_dependency_graph(&l, &p), &p);
        assert_eq!(net.outputs["a"], vec![set(&["b", "c"])]);
        assert_eq!(net.inputs["d"], vec![set(&["b", "c"])]);
    }

    #[test]
    fn xor_split() {
        let l = log(&[(&["a", "b", "d"], 5), (&["a", "c", "d"], 5)]);
        let p = params(0.8);
        let net = bind_splits_joins(&build_dependency_graph(&l, &p), &p);
        assert_eq!(net.outputs["a"], vec![set(&["b"]), set(&["c"])]);
        assert!(net.is_valid());
    }

    #[test]
    fn single_path_bindings() {
        let net = discover_heuristics(&log(&[(&["a", "b"], 10)]), &params(0.9)).unwrap();
        assert_eq!(net.nodes, set(&["a", "b"]));
        assert_eq!(net.outputs["a"], vec![set(&["b"])]);
        assert_eq!(net.inputs["b"], vec![set(&["a"])]);
        assert_eq!(net.inputs["a"], vec![set(&[])]);
        assert_eq!(net.outputs["b"], vec![set(&[])]);
        assert!(net.is_valid());
    }

    #[test]
    fn long_distance() {
        let p = HeuristicsParams {
            long_distance_threshold: 0.95,
            ..params(0.9)
        };
        let l = log(&[(&["a", "x", "b"], 20)]);
        let g = build_dependency_graph(&l, &p);
        assert!((long_distance_measure(20, 20, 20) - 40.0 / 41.0).abs() < 1e-12);
        assert!(long_distance_dependencies(&l, &g, &p).contains(&("a".into(), "b".into())));

        let l = log(&[(&["a", "x", "b"], 1), (&["a", "x", "c"], 1)]);
        let g = build_dependency_graph(&l, &p);
        assert!((long_distance_measure(1, 2, 1) - 0.5).abs() < 1e-12);
        assert!(!long_distance_dependencies(&l, &g, &p).contains(&("a".into(), "b".into())));

        let l = log(&[]);
        let g = build_dependency_graph(&l, &p);
        assert!(long_distance_dependencies(&l, &g, &p).is_empty());
    }

    #[test]
    fn self_and_two_loops() {
        let l = log(&[(&["a", "b", "b", "b", "c"], 10)]);
        let g = build_dependency_graph(&l, &params(0.9));
        assert!(g.arc("b", "b").is_some());
        let l = log(&[(&["a", "b", "c", "b", "c", "b", "d"], 10)]);
        let g = build_dependency_graph(&l, &params(0.9));
        assert!(g.arc("b", "c").is_some());
        assert!(g.arc("c", "b").is_some());
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(discover_heuristics(&log(&[]), &params(1.5)).is_err());
    }
}
