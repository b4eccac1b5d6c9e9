use std::collections::{HashMap, HashSet, VecDeque};

use rayon::prelude::*;
use serde::Serialize;

use crate::eventlog::{ActivityLog, EventLog};
use crate::models::{Marking, PetriNet, TransitionId};

/// Upper bound on markings visited by one silent-transition search.
pub(crate) const SILENT_STATE_CAP: usize = 20_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceReplay {
    pub case_id: String,
    pub produced: u64,
    pub consumed: u64,
    pub missing: u64,
    pub remaining: u64,
    pub fitness: f64,
}

impl TraceReplay {
    pub fn fits(&self) -> bool {
        self.missing == 0 && self.remaining == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplayResult {
    pub traces: Vec<TraceReplay>,
    /// Mean trace fitness; 1.0 for an empty log.
    pub fitness: f64,
    /// Firings per transition, indexed by transition id, over all traces.
    pub transition_counts: Vec<u64>,
}

#[derive(Debug, Clone, Default)]
struct Tally {
    p: u64,
    c: u64,
    m: u64,
    r: u64,
    fired: Vec<u64>,
}

impl Tally {
    fn fire(&mut self, net: &PetriNet, marking: &mut Marking, t: TransitionId) {
        for &(p, w) in net.preset(t) {
            let have = marking.get(p);
            if have < w {
                self.m += (w - have) as u64;
                marking.set(p, w);
            }
            self.c += w as u64;
        }
        self.p += net.postset(t).iter().map(|&(_, w)| w as u64).sum::<u64>();
        *marking = net.fire_unchecked(marking, t);
        self.fired[t.0] += 1;
    }
}

pub(crate) fn silent_transitions(net: &PetriNet) -> Vec<TransitionId> {
    net.transition_ids()
        .filter(|&t| net.transition(t).is_silent())
        .collect()
}

/// Shortest sequence of silent firings from `start` to a marking satisfying
/// `goal`, exploring at most `max_depth` firings.
pub(crate) fn silent_path(
    net: &PetriNet,
    silent: &[TransitionId],
    start: &Marking,
    max_depth: usize,
    goal: impl Fn(&Marking) -> bool,
) -> Option<Vec<TransitionId>> {
    if goal(start) {
        return Some(Vec::new());
    }
    let mut parent: HashMap<Marking, (Marking, TransitionId)> = HashMap::new();
    let mut seen: HashSet<Marking> = HashSet::from([start.clone()]);
    let mut queue = VecDeque::from([(start.clone(), 0usize)]);
    while let Some((m, depth)) = queue.pop_front() {
        if depth >= max_depth {
            continue;
        }
        for &t in silent {
            if !net.is_enabled(&m, t) {
                continue;
            }
            let next = net.fire_unchecked(&m, t);
            if !seen.insert(next.clone()) {
                continue;
            }
            parent.insert(next.clone(), (m.clone(), t));
            if goal(&next) {
                let mut path = Vec::new();
                let mut cur = next;
                while let Some((prev, t)) = parent.get(&cur) {
                    path.push(*t);
                    cur = prev.clone();
                }
                path.reverse();
                return Some(path);
            }
            if seen.len() >= SILENT_STATE_CAP {
                return None;
            }
            queue.push_back((next, depth + 1));
        }
    }
    None
}

fn replay_variant(net: &PetriNet, silent: &[TransitionId], trace: &[String]) -> Tally {
    let mut tally = Tally {
        fired: vec![0; net.transitions().len()],
        ..Default::default()
    };
    let mut marking = net.initial_marking();
    tally.p += marking.total();
    let depth = silent.len();
    for label in trace {
        let candidates: Vec<TransitionId> = net.transitions_with_label(label).collect();
        if candidates.is_empty() {
            // label unknown to the model
            tally.m += 1;
            tally.c += 1;
            tally.p += 1;
            tally.r += 1;
            continue;
        }
        if let Some(&t) = candidates.iter().find(|&&t| net.is_enabled(&marking, t)) {
            tally.fire(net, &mut marking, t);
            continue;
        }
        let path = silent_path(net, silent, &marking, depth, |m| {
            candidates.iter().any(|&t| net.is_enabled(m, t))
        });
        if let Some(path) = path {
            for t in path {
                tally.fire(net, &mut marking, t);
            }
            let t = *candidates
                .iter()
                .find(|&&t| net.is_enabled(&marking, t))
                .expect("search goal enables a candidate");
            tally.fire(net, &mut marking, t);
            continue;
        }
        let missing = |t: TransitionId| -> u64 {
            net.preset(t)
                .iter()
                .map(|&(p, w)| w.saturating_sub(marking.get(p)) as u64)
                .sum()
        };
        let t = *candidates
            .iter()
            .min_by_key(|&&t| (missing(t), t))
            .expect("non-empty candidates");
        tally.fire(net, &mut marking, t);
    }
    let fin = net.final_marking();
    let path = silent_path(net, silent, &marking, depth, |m| *m == fin)
        .or_else(|| silent_path(net, silent, &marking, depth, |m| m.covers(&fin)));
    if let Some(path) = path {
        for t in path {
            tally.fire(net, &mut marking, t);
        }
    }
    for p in net.place_ids() {
        let need = fin.get(p);
        let have = marking.get(p);
        tally.c += need as u64;
        if have < need {
            tally.m += (need - have) as u64;
        } else {
            tally.r += (have - need) as u64;
        }
    }
    tally
}

fn trace_fitness(t: &Tally) -> f64 {
    let part = |num: u64, den: u64| if den == 0 { 1.0 } else { 1.0 - num as f64 / den as f64 };
    (0.5 * part(t.m, t.c) + 0.5 * part(t.r, t.p)).clamp(0.0, 1.0)
}

/// Token-based replay of every trace. Labels without an enabled transition
/// are first approached through silent transitions, then force-fired.
pub fn token_replay(net: &PetriNet, log: &EventLog) -> ReplayResult {
    let silent = silent_transitions(net);
    let variants = ActivityLog::from(log);
    let keys: Vec<&[String]> = variants.variants().map(|(t, _)| t).collect();
    let tallies: Vec<Tally> = keys
        .par_iter()
        .map(|t| replay_variant(net, &silent, t))
        .collect();
    let by_variant: HashMap<&[String], &Tally> = keys.iter().copied().zip(tallies.iter()).collect();

    let mut counts = vec![0u64; net.transitions().len()];
    let mut traces = Vec::with_capacity(log.len());
    for trace in log.traces() {
        let labels = trace.labels();
        let tally = by_variant[labels.as_slice()];
        for (c, f) in counts.iter_mut().zip(&tally.fired) {
            *c += f;
        }
        traces.push(TraceReplay {
            case_id: trace.case_id.clone(),
            produced: tally.p,
            consumed: tally.c,
            missing: tally.m,
            remaining: tally.r,
            fitness: trace_fitness(tally),
        });
    }
    let fitness = if traces.is_empty() {
        1.0
    } else {
        traces.iter().map(|t| t.fitness).sum::<f64>() / traces.len() as f64
    };
    ReplayResult {
        traces,
        fitness,
        transition_counts: counts,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::tree_to_petri;

    fn replay(tree: &str, seqs: &[&[&str]]) -> ReplayResult {
        let owned: Vec<Vec<&str>> = seqs.iter().map(|s| s.to_vec()).collect();
        token_replay(&tree_to_petri(&tree.parse().unwrap()), &EventLog::from_sequences(&owned))
    }

    #[test]
    fn perfect_fit() {
        let r = replay("Seq(a, b)", &[&["a", "b"]]);
        assert!(r.traces[0].fits());
        assert_eq!(r.fitness, 1.0);
    }

    #[test]
    fn missing_last_step() {
        let r = replay("Seq(a, b)", &[&["a"]]);
        let t = &r.traces[0];
        assert_eq!((t.produced, t.consumed, t.missing, t.remaining), (2, 2, 1, 1));
        assert_eq!(t.fitness, 0.5);
    }

    #[test]
    fn silent_transitions_are_searched() {
        let r = replay(
            "Seq(Xor(tau, a), And(b, Loop(c, tau)), Xor(d, tau))",
            &[&["b", "c"], &["a", "c", "c", "b", "d"], &["c", "b"]],
        );
        assert!(r.traces.iter().all(TraceReplay::fits), "{r:?}");
    }

    #[test]
    fn unknown_label_counts_one_pair() {
        let r = replay("Seq(a, b)", &[&["a", "z", "b"]]);
        let t = &r.traces[0];
        assert_eq!((t.missing, t.remaining), (1, 1));
        assert!(t.fitness < 1.0);
    }

    #[test]
    fn empty_log() {
        let r = replay("a", &[]);
        assert_eq!(r.fitness, 1.0);
        assert!(r.traces.is_empty());
    }

    #[test]
    fn transition_counts_follow_frequencies() {
        let r = replay("Seq(a, b)", &[&["a", "b"], &["a", "b"], &["a"]]);
        assert_eq!(r.transition_counts, vec![3, 2]);
    }
}
