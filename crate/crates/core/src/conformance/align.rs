use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap};

use serde::Serialize;
use thiserror::Error;

use crate::models::{Marking, PetriNet, TransitionId};

pub const BUDGET_ENV: &str = "PROCMINE_ALIGN_BUDGET";
pub const DEFAULT_BUDGET: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AlignError {
    #[error("alignment of trace '{case}' exceeded the state budget of {budget}")]
    Budget { case: String, budget: usize },
    #[error("no alignment exists for trace '{case}': final marking unreachable")]
    Unreachable { case: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CostFunction {
    pub log_move: u32,
    pub model_move: u32,
    pub silent_move: u32,
}

impl Default for CostFunction {
    fn default() -> Self {
        CostFunction {
            log_move: 1,
            model_move: 1,
            silent_move: 0,
        }
    }
}

/// State budget from the environment override, else the default.
pub fn budget_from_env() -> usize {
    std::env::var(BUDGET_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_BUDGET)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Move {
    Sync { transition: usize, label: String },
    Model { transition: usize, label: Option<String> },
    Log { label: String },
}

impl Move {
    pub fn log_label(&self) -> Option<&str> {
        match self {
            Move::Sync { label, .. } | Move::Log { label } => Some(label),
            Move::Model { .. } => None,
        }
    }

    pub fn transition(&self) -> Option<TransitionId> {
        match self {
            Move::Sync { transition, .. } | Move::Model { transition, .. } => Some(TransitionId(*transition)),
            Move::Log { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Alignment {
    pub moves: Vec<Move>,
    pub cost: u64,
}

impl Alignment {
    /// Sequence of fired transitions.
    pub fn firing_sequence(&self) -> Vec<TransitionId> {
        self.moves.iter().filter_map(Move::transition).collect()
    }

    /// The aligned trace, recovered from synchronous and log moves.
    pub fn trace(&self) -> Vec<&str> {
        self.moves.iter().filter_map(Move::log_label).collect()
    }
}

struct Node {
    marking: Marking,
    pos: usize,
    g: u64,
    parent: Option<(usize, Move)>,
}

/// Optimal alignment by A* over the synchronous product of `net` and
/// `trace`. The heuristic counts remaining events whose label the model
/// cannot produce. Ties are broken by successor order (synchronous, model,
/// log moves, each by transition id) and then insertion order.
pub fn align(
    net: &PetriNet,
    trace: &[String],
    costs: &CostFunction,
    budget: usize,
    case_id: &str,
) -> Result<Alignment, AlignError> {
    let labels: BTreeSet<String> = net.labels();
    // suffix[i]: log moves forced in trace[i..]
    let mut suffix = vec![0u64; trace.len() + 1];
    for i in (0..trace.len()).rev() {
        suffix[i] = suffix[i + 1] + if labels.contains(&trace[i]) { 0 } else { costs.log_move as u64 };
    }
    let fin = net.final_marking();
    let mut nodes: Vec<Node> = vec![Node {
        marking: net.initial_marking(),
        pos: 0,
        g: 0,
        parent: None,
    }];
    let mut best: HashMap<(Marking, usize), u64> = HashMap::new();
    best.insert((net.initial_marking(), 0), 0);
    let mut open: BinaryHeap<Reverse<(u64, u64, usize)>> = BinaryHeap::new();
    let mut counter = 0u64;
    open.push(Reverse((suffix[0], counter, 0)));
    let mut expanded = 0usize;

    while let Some(Reverse((_, _, id))) = open.pop() {
        let (marking, pos, g) = {
            let n = &nodes[id];
            (n.marking.clone(), n.pos, n.g)
        };
        if best.get(&(marking.clone(), pos)).is_some_and(|&b| b < g) {
            continue;
        }
        if pos == trace.len() && marking == fin {
            let mut moves = Vec::new();
            let mut cur = id;
            while let Some((p, mv)) = &nodes[cur].parent {
                moves.push(mv.clone());
                cur = *p;
            }
            moves.reverse();
            return Ok(Alignment { moves, cost: g });
        }
        expanded += 1;
        if expanded > budget {
            return Err(AlignError::Budget {
                case: case_id.to_string(),
                budget,
            });
        }
        let enabled = net.enabled(&marking);
        let mut succ: Vec<(Marking, usize, u64, Move)> = Vec::new();
        if pos < trace.len() {
            for &t in &enabled {
                if net.transition(t).label.as_deref() == Some(trace[pos].as_str()) {
                    succ.push((
                        net.fire_unchecked(&marking, t),
                        pos + 1,
                        0,
                        Move::Sync {
                            transition: t.0,
                            label: trace[pos].clone(),
                        },
                    ));
                }
            }
        }
        for &t in &enabled {
            let tr = net.transition(t);
            let cost = if tr.is_silent() { costs.silent_move } else { costs.model_move };
            succ.push((
                net.fire_unchecked(&marking, t),
                pos,
                cost as u64,
                Move::Model {
                    transition: t.0,
                    label: tr.label.clone(),
                },
            ));
        }
        if pos < trace.len() {
            succ.push((
                marking.clone(),
                pos + 1,
                costs.log_move as u64,
                Move::Log {
                    label: trace[pos].clone(),
                },
            ));
        }
        for (m, p, c, mv) in succ {
            let ng = g + c;
            let key = (m, p);
            if best.get(&key).is_some_and(|&b| b <= ng) {
                continue;
            }
            best.insert(key.clone(), ng);
            counter += 1;
            nodes.push(Node {
                marking: key.0,
                pos: p,
                g: ng,
                parent: Some((id, mv)),
            });
            open.push(Reverse((ng + suffix[p], counter, nodes.len() - 1)));
        }
    }
    Err(AlignError::Unreachable {
        case: case_id.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::tree_to_petri;

    fn net(s: &str) -> PetriNet {
        tree_to_petri(&s.parse().unwrap())
    }

    fn tr(items: &[&str]) -> Vec<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    fn run(n: &PetriNet, t: &[&str]) -> Alignment {
        align(n, &tr(t), &CostFunction::default(), DEFAULT_BUDGET, "c").unwrap()
    }

    #[test]
    fn skipped_middle_activity() {
        let n = net("Seq(a, b, c)");
        let a = run(&n, &["a", "c"]);
        assert_eq!(a.cost, 1);
        let model: Vec<_> = a.moves.iter().filter(|m| matches!(m, Move::Model { .. })).collect();
        assert_eq!(model.len(), 1);
        assert_eq!(a.trace(), vec!["a", "c"]);
    }

    #[test]
    fn perfect_trace_all_sync() {
        let n = net("Seq(a, And(b, c))");
        let a = run(&n, &["a", "c", "b"]);
        assert_eq!(a.cost, 0);
        assert!(a
            .moves
            .iter()
            .all(|m| matches!(m, Move::Sync { .. } | Move::Model { label: None, .. })));
    }

    #[test]
    fn empty_trace_costs_model_moves() {
        let a = run(&net("Seq(a, b)"), &[]);
        assert_eq!(a.cost, 2);
    }

    #[test]
    fn firing_sequence_reaches_final_marking() {
        let n = net("Loop(a, Xor(b, tau))");
        let a = run(&n, &["a", "x", "a", "b"]);
        let mut m = n.initial_marking();
        for t in a.firing_sequence() {
            m = n.fire(&m, t).unwrap();
        }
        assert_eq!(m, n.final_marking());
        assert_eq!(a.trace(), vec!["a", "x", "a", "b"]);
    }

    #[test]
    fn budget_exhaustion_names_trace() {
        let n = net("Seq(a, b, c)");
        let err = align(&n, &tr(&["c", "b", "a"]), &CostFunction::default(), 1, "case-7").unwrap_err();
        assert_eq!(
            err,
            AlignError::Budget {
                case: "case-7".into(),
                budget: 1
            }
        );
    }
}
