//! Directly-follows graphs.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use thiserror::Error;

use crate::eventlog::{ActivityLog, EventLog};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DfgError {
    #[error("unknown activity '{0}'")]
    UnknownActivity(String),
}

/// Activity nodes with weighted immediate-succession edges.
///
/// Nodes are kept in sorted order and addressed by index internally; the
/// transitive closure used for reachability queries is computed lazily once.
#[derive(Debug, Default)]
pub struct DirectlyFollowsGraph {
    nodes: Vec<String>,
    index: BTreeMap<String, usize>,
    edges: BTreeMap<(usize, usize), usize>,
    starts: BTreeMap<usize, usize>,
    ends: BTreeMap<usize, usize>,
    closure: OnceLock<Vec<Vec<bool>>>,
}

impl Clone for DirectlyFollowsGraph {
    fn clone(&self) -> Self {
        DirectlyFollowsGraph {
            nodes: self.nodes.clone(),
            index: self.index.clone(),
            edges: self.edges.clone(),
            starts: self.starts.clone(),
            ends: self.ends.clone(),
            closure: OnceLock::new(),
        }
    }
}

impl PartialEq for DirectlyFollowsGraph {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes
            && self.edges == other.edges
            && self.starts == other.starts
            && self.ends == other.ends
    }
}

impl DirectlyFollowsGraph {
    pub fn from_activity_log(log: &ActivityLog) -> Self {
        let nodes: Vec<String> = log.alphabet().into_iter().collect();
        let index: BTreeMap<String, usize> = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        let mut g = DirectlyFollowsGraph {
            nodes,
            index,
            ..Default::default()
        };
        for (trace, count) in log.variants() {
            let ids: Vec<usize> = trace.iter().map(|a| g.index[a]).collect();
            if let (Some(&f), Some(&l)) = (ids.first(), ids.last()) {
                *g.starts.entry(f).or_insert(0) += count;
                *g.ends.entry(l).or_insert(0) += count;
            }
            for w in ids.windows(2) {
                *g.edges.entry((w[0], w[1])).or_insert(0) += count;
            }
        }
        g
    }

    pub fn from_log(log: &EventLog) -> Self {
        Self::from_activity_log(&ActivityLog::from(log))
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, label: &str) -> bool {
        self.index.contains_key(label)
    }

    pub fn edge_count(&self, a: &str, b: &str) -> usize {
        match (self.index.get(a), self.index.get(b)) {
            (Some(&i), Some(&j)) => self.edges.get(&(i, j)).copied().unwrap_or(0),
            _ => 0,
        }
    }

    pub fn edges(&self) -> impl Iterator<Item = (&str, &str, usize)> + '_ {
        self.edges
            .iter()
            .map(|(&(i, j), &c)| (self.nodes[i].as_str(), self.nodes[j].as_str(), c))
    }

    pub fn start_activities(&self) -> BTreeMap<&str, usize> {
        self.starts
            .iter()
            .map(|(&i, &c)| (self.nodes[i].as_str(), c))
            .collect()
    }

    pub fn end_activities(&self) -> BTreeMap<&str, usize> {
        self.ends
            .iter()
            .map(|(&i, &c)| (self.nodes[i].as_str(), c))
            .collect()
    }

    pub(crate) fn idx(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub(crate) fn has_edge_idx(&self, i: usize, j: usize) -> bool {
        self.edges.contains_key(&(i, j))
    }

    pub(crate) fn edge_map(&self) -> &BTreeMap<(usize, usize), usize> {
        &self.edges
    }

    pub(crate) fn is_start_idx(&self, i: usize) -> bool {
        self.starts.contains_key(&i)
    }

    pub(crate) fn is_end_idx(&self, i: usize) -> bool {
        self.ends.contains_key(&i)
    }

    /// Copy without the edges whose count is below `threshold` times the
    /// largest outgoing count of their source. Nodes, starts and ends stay.
    pub fn filter_infrequent(&self, threshold: f64) -> DirectlyFollowsGraph {
        let mut max_out = vec![0usize; self.nodes.len()];
        for (&(i, _), &c) in &self.edges {
            max_out[i] = max_out[i].max(c);
        }
        let mut g = self.clone();
        g.edges
            .retain(|&(i, _), &mut c| (c as f64) >= threshold * max_out[i] as f64);
        g
    }

    pub(crate) fn closure(&self) -> &Vec<Vec<bool>> {
        self.closure.get_or_init(|| {
            let n = self.nodes.len();
            let mut reach = vec![vec![false; n]; n];
            for &(i, j) in self.edges.keys() {
                reach[i][j] = true;
            }
            for k in 0..n {
                for i in 0..n {
                    if reach[i][k] {
                        for j in 0..n {
                            if reach[k][j] {
                                reach[i][j] = true;
                            }
                        }
                    }
                }
            }
            reach
        })
    }

    /// True iff a directed path of length at least one leads from `a` to `b`.
    pub fn reachable(&self, a: &str, b: &str) -> Result<bool, DfgError> {
        let i = self
            .idx(a)
            .ok_or_else(|| DfgError::UnknownActivity(a.to_string()))?;
        let j = self
            .idx(b)
            .ok_or_else(|| DfgError::UnknownActivity(b.to_string()))?;
        Ok(self.closure()[i][j])
    }

    /// Connected components of the undirected view of the edges accepted by
    /// `edge_filter`, restricted to `restricted_to`. Components are returned
    /// in order of their smallest label.
    pub fn weak_components(
        &self,
        restricted_to: &BTreeSet<String>,
        edge_filter: impl Fn(&str, &str, usize) -> bool,
    ) -> Vec<BTreeSet<String>> {
        let members: Vec<usize> = restricted_to
            .iter()
            .filter_map(|l| self.idx(l))
            .collect();
        let inside: BTreeSet<usize> = members.iter().copied().collect();
        let mut uf = UnionFind::new(self.nodes.len());
        for (&(i, j), &c) in &self.edges {
            if inside.contains(&i)
                && inside.contains(&j)
                && edge_filter(&self.nodes[i], &self.nodes[j], c)
            {
                uf.union(i, j);
            }
        }
        let mut groups: BTreeMap<usize, BTreeSet<String>> = BTreeMap::new();
        for &m in &members {
            groups
                .entry(uf.find(m))
                .or_default()
                .insert(self.nodes[m].clone());
        }
        let mut out: Vec<BTreeSet<String>> = groups.into_values().collect();
        out.sort();
        out
    }
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    pub(crate) fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.parent[r] != r {
            r = self.parent[r];
        }
        let mut c = x;
        while self.parent[c] != r {
            let next = self.parent[c];
            self.parent[c] = r;
            c = next;
        }
        r
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // smaller root wins, keeps representatives deterministic
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dfg(seqs: &[&[&str]]) -> DirectlyFollowsGraph {
        let owned: Vec<Vec<&str>> = seqs.iter().map(|s| s.to_vec()).collect();
        DirectlyFollowsGraph::from_activity_log(&ActivityLog::from_sequences(&owned))
    }

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn counts_edges_starts_ends() {
        let g = dfg(&[&["a", "b", "c"], &["a", "b", "c"], &["a", "c", "b"]]);
        assert_eq!(g.edge_count("a", "b"), 2);
        assert_eq!(g.edge_count("b", "c"), 2);
        assert_eq!(g.edge_count("a", "c"), 1);
        assert_eq!(g.edge_count("c", "b"), 1);
        assert_eq!(g.edges().count(), 4);
        assert_eq!(g.start_activities(), BTreeMap::from([("a", 3)]));
        assert_eq!(g.end_activities(), BTreeMap::from([("b", 1), ("c", 2)]));
    }

    #[test]
    fn empty_log_empty_graph() {
        let g = dfg(&[]);
        assert!(g.is_empty());
        assert_eq!(g.edges().count(), 0);
    }

    #[test]
    fn single_event_trace() {
        let g = dfg(&[&["a"]]);
        assert_eq!(g.edges().count(), 0);
        assert_eq!(g.start_activities(), BTreeMap::from([("a", 1)]));
        assert_eq!(g.end_activities(), BTreeMap::from([("a", 1)]));
    }

    #[test]
    fn reachability_on_chain() {
        let g = dfg(&[&["a", "b", "c"]]);
        assert_eq!(g.reachable("a", "c"), Ok(true));
        assert_eq!(g.reachable("c", "a"), Ok(false));
        assert_eq!(g.reachable("a", "a"), Ok(false));
        assert_eq!(
            g.reachable("a", "zz"),
            Err(DfgError::UnknownActivity("zz".into()))
        );
    }

    #[test]
    fn components() {
        let g = dfg(&[&["a", "b"], &["c"]]);
        assert_eq!(
            g.weak_components(&set(&["a", "b", "c"]), |_, _, _| true),
            vec![set(&["a", "b"]), set(&["c"])]
        );
        let g = dfg(&[&["a"], &["b"]]);
        assert_eq!(
            g.weak_components(&set(&["a", "b"]), |_, _, _| true),
            vec![set(&["a"]), set(&["b"])]
        );
        let g = dfg(&[&["a", "b", "c", "a"]]);
        assert_eq!(
            g.weak_components(&set(&["a", "b", "c"]), |_, _, _| true),
            vec![set(&["a", "b", "c"])]
        );
    }

    #[test]
    fn noise_filter_drops_relatively_rare_edges() {
        let mut seqs: Vec<Vec<&str>> = vec![vec!["a", "b"]; 9];
        seqs.push(vec!["a", "c"]);
        let g = DirectlyFollowsGraph::from_activity_log(&ActivityLog::from_sequences(&seqs));
        let f = g.filter_infrequent(0.2);
        assert_eq!(f.edge_count("a", "b"), 9);
        assert_eq!(f.edge_count("a", "c"), 0);
        assert!(f.contains("c"));
    }
}
