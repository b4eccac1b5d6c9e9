//! Inductive Miner.
//!
//! Recursion per sub-log: base case, otherwise empty-trace handling,
//! otherwise cut detection on the (optionally noise-filtered) DFG followed
//! by a log split, otherwise a fall-through. Mining works on the variant
//! multiset of a log, so the result never depends on trace order.

mod tree;

use std::collections::{BTreeMap, BTreeSet};

use crate::dfg::{DirectlyFollowsGraph, UnionFind};
use crate::eventlog::{ActivityLog, EventLog, Trace};

pub use tree::{Operator, ProcessTree, TreeParseError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cut {
    pub operator: Operator,
    /// Disjoint, non-empty groups covering the DFG nodes. For loops the
    /// first group is the body.
    pub partition: Vec<BTreeSet<String>>,
}

impl Cut {
    fn group_of(&self) -> BTreeMap<&str, usize> {
        self.partition
            .iter()
            .enumerate()
            .flat_map(|(i, g)| g.iter().map(move |a| (a.as_str(), i)))
            .collect()
    }
}

/// Discover a process tree. With `noise_threshold` > 0, DFG edges weaker than
/// that fraction of their source's strongest outgoing edge are ignored while
/// looking for cuts.
pub fn discover_inductive(log: &EventLog, noise_threshold: f64) -> ProcessTree {
    discover_inductive_variants(&ActivityLog::from(log), noise_threshold)
}

pub fn discover_inductive_variants(log: &ActivityLog, noise_threshold: f64) -> ProcessTree {
    let noise = if (0.0..=1.0).contains(&noise_threshold) {
        noise_threshold
    } else {
        log::warn!("noise threshold {noise_threshold} outside [0, 1], clamping");
        noise_threshold.clamp(0.0, 1.0)
    };
    mine(log, noise).canonical()
}

fn mine(log: &ActivityLog, noise: f64) -> ProcessTree {
    if let Some(tree) = base_case_variants(log) {
        return tree;
    }
    if log.empty_trace_count() > 0 {
        return ProcessTree::operator(
            Operator::Xor,
            vec![ProcessTree::Silent, mine(&log.without_empty_traces(), noise)],
        );
    }
    if let Some(cut) = find_cut(log, noise) {
        let subs = split_variants(log, &cut);
        let children = subs.iter().map(|s| mine(s, noise)).collect();
        return ProcessTree::operator(cut.operator, children);
    }
    fall_through_inner(log, noise)
}

fn find_cut(log: &ActivityLog, noise: f64) -> Option<Cut> {
    let dfg = DirectlyFollowsGraph::from_activity_log(log);
    if dfg.is_empty() {
        return None;
    }
    if noise > 0.0 {
        detect_cut(&dfg.filter_infrequent(noise))
    } else {
        detect_cut(&dfg)
    }
}

/// Try the exclusive-choice, sequence, concurrency and loop detectors in that
/// order and return the first cut with at least two groups.
pub fn detect_cut(dfg: &DirectlyFollowsGraph) -> Option<Cut> {
    if dfg.is_empty() {
        return None;
    }
    xor_cut(dfg)
        .or_else(|| sequence_cut(dfg))
        .or_else(|| concurrent_cut(dfg))
        .or_else(|| loop_cut(dfg))
}

fn to_partition(dfg: &DirectlyFollowsGraph, groups: &[Vec<usize>]) -> Vec<BTreeSet<String>> {
    groups
        .iter()
        .map(|g| g.iter().map(|&i| dfg.nodes()[i].clone()).collect())
        .collect()
}

fn groups_from_uf(uf: &mut UnionFind, n: usize) -> Vec<Vec<usize>> {
    let mut by_root: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        by_root.entry(uf.find(i)).or_default().push(i);
    }
    // roots are minimal members, so this is ordered by smallest label
    by_root.into_values().collect()
}

pub(crate) fn xor_cut(dfg: &DirectlyFollowsGraph) -> Option<Cut> {
    let all: BTreeSet<String> = dfg.nodes().iter().cloned().collect();
    let comps = dfg.weak_components(&all, |_, _, _| true);
    (comps.len() >= 2).then_some(Cut {
        operator: Operator::Xor,
        partition: comps,
    })
}

pub(crate) fn sequence_cut(dfg: &DirectlyFollowsGraph) -> Option<Cut> {
    let n = dfg.nodes().len();
    let reach = dfg.closure();
    let mut uf = UnionFind::new(n);
    // strongly connected components
    for i in 0..n {
        for j in (i + 1)..n {
            if reach[i][j] && reach[j][i] {
                uf.union(i, j);
            }
        }
    }
    let sccs = groups_from_uf(&mut uf, n);
    let reaches = |a: &[usize], b: &[usize]| a.iter().any(|&x| b.iter().any(|&y| reach[x][y]));
    // merge pairwise unreachable components
    for x in 0..sccs.len() {
        for y in (x + 1)..sccs.len() {
            if !reaches(&sccs[x], &sccs[y]) && !reaches(&sccs[y], &sccs[x]) {
                uf.union(sccs[x][0], sccs[y][0]);
            }
        }
    }
    let mut groups = groups_from_uf(&mut uf, n);
    if groups.len() < 2 {
        return None;
    }
    let rank = |g: &Vec<usize>, all: &Vec<Vec<usize>>| {
        all.iter()
            .filter(|h| *h != g && reaches(h, g))
            .count()
    };
    let snapshot = groups.clone();
    groups.sort_by_key(|g| (rank(g, &snapshot), g[0]));
    // no later group may reach an earlier one; merge offending ranges
    'outer: loop {
        for i in 0..groups.len() {
            for j in (i + 1)..groups.len() {
                if reaches(&groups[j], &groups[i]) {
                    let merged: Vec<usize> = groups.drain(i..=j).flatten().collect();
                    let mut merged = merged;
                    merged.sort_unstable();
                    groups.insert(i, merged);
                    continue 'outer;
                }
            }
        }
        break;
    }
    (groups.len() >= 2).then(|| Cut {
        operator: Operator::Sequence,
        partition: to_partition(dfg, &groups),
    })
}

pub(crate) fn concurrent_cut(dfg: &DirectlyFollowsGraph) -> Option<Cut> {
    let n = dfg.nodes().len();
    let mut uf = UnionFind::new(n);
    for i in 0..n {
        for j in (i + 1)..n {
            if !(dfg.has_edge_idx(i, j) && dfg.has_edge_idx(j, i)) {
                uf.union(i, j);
            }
        }
    }
    let mut groups = groups_from_uf(&mut uf, n);
    let complete = |g: &Vec<usize>| {
        g.iter().any(|&i| dfg.is_start_idx(i)) && g.iter().any(|&i| dfg.is_end_idx(i))
    };
    while groups.len() >= 2 {
        let Some(pos) = groups.iter().position(|g| !complete(g)) else {
            break;
        };
        let lacking = groups.remove(pos);
        // groups stay ordered by smallest label; index 0 is the smallest other group
        groups[0].extend(lacking);
        groups[0].sort_unstable();
        groups.sort_by_key(|g| g[0]);
    }
    (groups.len() >= 2).then(|| Cut {
        operator: Operator::Concurrent,
        partition: to_partition(dfg, &groups),
    })
}

pub(crate) fn loop_cut(dfg: &DirectlyFollowsGraph) -> Option<Cut> {
    let n = dfg.nodes().len();
    let starts: Vec<usize> = (0..n).filter(|&i| dfg.is_start_idx(i)).collect();
    let ends: Vec<usize> = (0..n).filter(|&i| dfg.is_end_idx(i)).collect();
    if starts.is_empty() || ends.is_empty() {
        return None;
    }
    let mut in_body = vec![false; n];
    for &i in starts.iter().chain(&ends) {
        in_body[i] = true;
    }
    let mut uf = UnionFind::new(n);
    for &(i, j) in dfg.edge_map().keys() {
        if !in_body[i] && !in_body[j] {
            uf.union(i, j);
        }
    }
    let comps: Vec<Vec<usize>> = groups_from_uf(&mut uf, n)
        .into_iter()
        .filter(|g| !in_body[g[0]])
        .collect();

    let mut body: Vec<usize> = (0..n).filter(|&i| in_body[i]).collect();
    let mut redo: Vec<Vec<usize>> = Vec::new();
    for comp in comps {
        let mut merge = false;
        for &a in &comp {
            for b in 0..n {
                if !in_body[b] {
                    continue;
                }
                // a redo part is entered only from end activities and left
                // only towards start activities
                if dfg.has_edge_idx(b, a) && !dfg.is_end_idx(b) {
                    merge = true;
                }
                if dfg.has_edge_idx(a, b) && !dfg.is_start_idx(b) {
                    merge = true;
                }
            }
            let to_starts = starts.iter().filter(|&&s| dfg.has_edge_idx(a, s)).count();
            if to_starts > 0 && to_starts < starts.len() {
                merge = true;
            }
            let from_ends = ends.iter().filter(|&&e| dfg.has_edge_idx(e, a)).count();
            if from_ends > 0 && from_ends < ends.len() {
                merge = true;
            }
        }
        if merge {
            body.extend(comp);
        } else {
            redo.push(comp);
        }
    }
    if redo.is_empty() {
        return None;
    }
    body.sort_unstable();
    let mut groups = vec![body];
    groups.extend(redo);
    Some(Cut {
        operator: Operator::Loop,
        partition: to_partition(dfg, &groups),
    })
}

/// Split one trace into `(group, positions)` fragments according to `cut`.
fn fragments(labels: &[&str], cut: &Cut, group_of: &BTreeMap<&str, usize>) -> Vec<(usize, Vec<usize>)> {
    let groups_n = cut.partition.len();
    let known: Vec<(usize, usize)> = labels
        .iter()
        .enumerate()
        .filter_map(|(pos, a)| group_of.get(a).map(|&g| (pos, g)))
        .collect();
    if known.len() < labels.len() {
        log::warn!(
            "{} event(s) outside the cut partition dropped during split",
            labels.len() - known.len()
        );
    }
    match cut.operator {
        Operator::Xor => {
            let mut counts = vec![0usize; groups_n];
            for &(_, g) in &known {
                counts[g] += 1;
            }
            // majority group, ties to the lowest index
            let best = (0..groups_n)
                .max_by(|&x, &y| counts[x].cmp(&counts[y]).then(y.cmp(&x)))
                .unwrap_or(0);
            vec![(
                best,
                known.iter().filter(|(_, g)| *g == best).map(|(p, _)| *p).collect(),
            )]
        }
        Operator::Sequence | Operator::Concurrent => (0..groups_n)
            .map(|g| {
                (
                    g,
                    known.iter().filter(|(_, x)| *x == g).map(|(p, _)| *p).collect(),
                )
            })
            .collect(),
        Operator::Loop => {
            let mut runs: Vec<(usize, Vec<usize>)> = Vec::new();
            for &(p, g) in &known {
                match runs.last_mut() {
                    Some((last, items)) if *last == g => items.push(p),
                    _ => runs.push((g, vec![p])),
                }
            }
            // keep the body/redo alternation: body first, body last, and a
            // body run between any two redo runs
            let mut out: Vec<(usize, Vec<usize>)> = Vec::new();
            for run in runs {
                let prev_is_body = out.last().map(|(g, _)| *g == 0);
                if run.0 != 0 && prev_is_body != Some(true) {
                    out.push((0, Vec::new()));
                }
                out.push(run);
            }
            if out.last().map(|(g, _)| *g != 0).unwrap_or(true) {
                out.push((0, Vec::new()));
            }
            out
        }
    }
}

pub fn split_variants(log: &ActivityLog, cut: &Cut) -> Vec<ActivityLog> {
    let group_of = cut.group_of();
    let mut subs = vec![ActivityLog::new(); cut.partition.len()];
    for (trace, count) in log.variants() {
        let labels: Vec<&str> = trace.iter().map(String::as_str).collect();
        for (g, positions) in fragments(&labels, cut, &group_of) {
            subs[g].add(positions.iter().map(|&p| trace[p].clone()).collect(), count);
        }
    }
    subs
}

/// Split an event log into one sub-log per cut group. Loop splits may yield
/// several traces per case; their ids get a `#k` suffix.
pub fn split_log(log: &EventLog, cut: &Cut) -> Vec<EventLog> {
    let group_of = cut.group_of();
    let mut subs: Vec<Vec<Trace>> = vec![Vec::new(); cut.partition.len()];
    for trace in log.traces() {
        let labels: Vec<&str> = trace.activities().collect();
        let mut seen = vec![0usize; cut.partition.len()];
        for (g, positions) in fragments(&labels, cut, &group_of) {
            seen[g] += 1;
            let case_id = if cut.operator == Operator::Loop {
                format!("{}#{}", trace.case_id, seen[g])
            } else {
                trace.case_id.clone()
            };
            subs[g].push(Trace {
                case_id,
                attributes: trace.attributes.clone(),
                events: positions.iter().map(|&p| trace.events[p].clone()).collect(),
            });
        }
    }
    subs.into_iter()
        .map(|traces| EventLog::new(traces).expect("split preserves log invariants"))
        .collect()
}

/// Base cases: only empty traces, only `<x>`, or a mix of both.
pub fn base_case(log: &EventLog) -> Option<ProcessTree> {
    base_case_variants(&ActivityLog::from(log))
}

fn base_case_variants(log: &ActivityLog) -> Option<ProcessTree> {
    let mut single: Option<&str> = None;
    let mut has_empty = false;
    for (trace, _) in log.variants() {
        match trace {
            [] => has_empty = true,
            [x] if single.is_none() || single == Some(x.as_str()) => single = Some(x),
            _ => return None,
        }
    }
    match (single, has_empty) {
        (None, _) => Some(ProcessTree::Silent),
        (Some(x), false) => Some(ProcessTree::activity(x)),
        (Some(x), true) => Some(ProcessTree::Xor(vec![
            ProcessTree::Silent,
            ProcessTree::activity(x),
        ])),
    }
}

/// Fall-throughs for logs without a base case or cut: empty traces, an
/// activity occurring once per trace, an activity whose removal exposes a
/// cut, and finally the flower model.
pub fn fall_through(log: &EventLog) -> ProcessTree {
    fall_through_inner(&ActivityLog::from(log), 0.0).canonical()
}

fn fall_through_inner(log: &ActivityLog, noise: f64) -> ProcessTree {
    if log.empty_trace_count() > 0 {
        let rest = log.without_empty_traces();
        if rest.is_empty() {
            return ProcessTree::Silent;
        }
        return ProcessTree::operator(Operator::Xor, vec![ProcessTree::Silent, mine(&rest, noise)]);
    }
    let alphabet = log.alphabet();
    if alphabet.len() >= 2 {
        for a in &alphabet {
            let once = log
                .variants()
                .all(|(t, _)| t.iter().filter(|x| *x == a).count() == 1);
            if once {
                let rest: BTreeSet<String> = alphabet.iter().filter(|x| *x != a).cloned().collect();
                return ProcessTree::operator(
                    Operator::Concurrent,
                    vec![ProcessTree::activity(a.clone()), mine(&log.project(&rest), noise)],
                );
            }
        }
        for a in &alphabet {
            let rest: BTreeSet<String> = alphabet.iter().filter(|x| *x != a).cloned().collect();
            let rest_log = log.project(&rest);
            let rest_nonempty = rest_log.without_empty_traces();
            if base_case_variants(&rest_log).is_some() || find_cut(&rest_nonempty, noise).is_some() {
                let only: BTreeSet<String> = BTreeSet::from([a.clone()]);
                return ProcessTree::operator(
                    Operator::Concurrent,
                    vec![mine(&log.project(&only), noise), mine(&rest_log, noise)],
                );
            }
        }
    }
    let mut children = vec![ProcessTree::Silent];
    children.extend(alphabet.into_iter().map(ProcessTree::Activity));
    ProcessTree::Loop(children)
}
