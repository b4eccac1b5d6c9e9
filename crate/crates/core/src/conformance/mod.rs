//! Log-model quality: token replay, alignments, precision, generalization
//! and simplicity.

mod align;
mod replay;

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};

use rayon::prelude::*;
use serde::Serialize;

use crate::eventlog::{ActivityLog, EventLog};
use crate::models::{Marking, PetriNet, TransitionId};

pub use align::{align, budget_from_env, AlignError, Alignment, CostFunction, Move, BUDGET_ENV, DEFAULT_BUDGET};
pub use replay::{token_replay, ReplayResult, TraceReplay};

use replay::{silent_transitions, SILENT_STATE_CAP};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConformanceConfig {
    pub costs: CostFunction,
    /// Maximum A* expansions per trace.
    pub align_budget: usize,
}

impl Default for ConformanceConfig {
    fn default() -> Self {
        ConformanceConfig {
            costs: CostFunction::default(),
            align_budget: budget_from_env(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlignmentFitness {
    pub fitness: f64,
    /// Cases whose alignment failed (budget or unreachable final marking).
    pub excluded: Vec<String>,
}

/// Per variant: alignment or error, keyed by the variant.
type AlignedVariants = BTreeMap<Vec<String>, (usize, Result<Alignment, AlignError>)>;

fn align_variants(net: &PetriNet, log: &ActivityLog, config: &ConformanceConfig) -> AlignedVariants {
    let keys: Vec<(&[String], usize)> = log.variants().collect();
    let results: Vec<Result<Alignment, AlignError>> = keys
        .par_iter()
        .map(|(t, _)| {
            let case = t.join(",");
            align(net, t, &config.costs, config.align_budget, &case)
        })
        .collect();
    keys.into_iter()
        .zip(results)
        .map(|((t, n), r)| (t.to_vec(), (n, r)))
        .collect()
}

/// Alignment fitness: per trace `1 - cost / (|trace| * log-move cost + cost
/// of the cheapest model run)`, averaged over traces.
pub fn fitness_alignment(net: &PetriNet, log: &EventLog, config: &ConformanceConfig) -> Result<AlignmentFitness, AlignError> {
    if log.is_empty() {
        log::warn!("alignment fitness of an empty log defined as 1.0");
        return Ok(AlignmentFitness {
            fitness: 1.0,
            excluded: Vec::new(),
        });
    }
    let empty = align(net, &[], &config.costs, config.align_budget, "<empty trace>")?.cost;
    let variants = ActivityLog::from(log);
    let aligned = align_variants(net, &variants, config);
    let mut total = 0.0;
    let mut counted = 0usize;
    let mut excluded = Vec::new();
    for trace in log.traces() {
        let labels = trace.labels();
        match &aligned[&labels].1 {
            Ok(a) => {
                let den = labels.len() as u64 * config.costs.log_move as u64 + empty;
                total += if den == 0 { 1.0 } else { 1.0 - a.cost as f64 / den as f64 };
                counted += 1;
            }
            Err(e) => {
                log::warn!("{e}");
                excluded.push(trace.case_id.clone());
            }
        }
    }
    let fitness = if counted == 0 { 0.0 } else { (total / counted as f64).clamp(0.0, 1.0) };
    Ok(AlignmentFitness { fitness, excluded })
}

/// Visible labels enabled after any sequence of silent firings from `m`.
fn enabled_visible(net: &PetriNet, silent: &[TransitionId], m: &Marking) -> BTreeSet<String> {
    let mut labels = BTreeSet::new();
    let mut seen: HashSet<Marking> = HashSet::from([m.clone()]);
    let mut queue = VecDeque::from([m.clone()]);
    while let Some(cur) = queue.pop_front() {
        for t in net.enabled(&cur) {
            if let Some(l) = &net.transition(t).label {
                labels.insert(l.clone());
            }
        }
        for &t in silent {
            if net.is_enabled(&cur, t) && seen.len() < SILENT_STATE_CAP {
                let next = net.fire_unchecked(&cur, t);
                if seen.insert(next.clone()) {
                    queue.push_back(next);
                }
            }
        }
    }
    labels
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrecisionResult {
    pub precision: f64,
    pub excluded: Vec<String>,
}

/// Escaping-edges precision. Each observed prefix is mapped to the model
/// state its alignment reaches right after the prefix's last event; the
/// visible labels enabled there but never observed next are escaping.
/// Prefixes are weighted by their frequency.
pub fn precision_escaping(net: &PetriNet, log: &EventLog, config: &ConformanceConfig) -> PrecisionResult {
    let variants = ActivityLog::from(log);
    let aligned = align_variants(net, &variants, config);
    let silent = silent_transitions(net);

    struct PrefixInfo {
        state: Marking,
        weight: usize,
        next: BTreeSet<String>,
    }
    let mut prefixes: BTreeMap<Vec<String>, PrefixInfo> = BTreeMap::new();
    let mut failed: BTreeSet<&[String]> = BTreeSet::new();
    for (trace, (count, result)) in &aligned {
        let alignment = match result {
            Ok(a) => a,
            Err(e) => {
                log::warn!("{e}");
                failed.insert(trace);
                continue;
            }
        };
        // states[k]: marking right after the move consuming event k-1
        let mut states = vec![net.initial_marking()];
        let mut m = net.initial_marking();
        for mv in &alignment.moves {
            if let Some(t) = mv.transition() {
                m = net.fire_unchecked(&m, t);
            }
            if mv.log_label().is_some() {
                states.push(m.clone());
            }
        }
        for k in 0..=trace.len() {
            let key = trace[..k].to_vec();
            let info = prefixes.entry(key).or_insert_with(|| PrefixInfo {
                state: states[k].clone(),
                weight: 0,
                next: BTreeSet::new(),
            });
            info.weight += count;
            if k < trace.len() {
                info.next.insert(trace[k].clone());
            }
        }
    }
    let infos: Vec<&PrefixInfo> = prefixes.values().collect();
    let sums: Vec<(f64, f64)> = infos
        .par_iter()
        .map(|info| {
            let enabled = enabled_visible(net, &silent, &info.state);
            let escaping = enabled.difference(&info.next).count();
            (
                (escaping * info.weight) as f64,
                (enabled.len() * info.weight) as f64,
            )
        })
        .collect();
    let (esc, en) = sums.iter().fold((0.0, 0.0), |acc, x| (acc.0 + x.0, acc.1 + x.1));
    let precision = if en == 0.0 { 1.0 } else { 1.0 - esc / en };
    let excluded = log
        .traces()
        .iter()
        .filter(|t| failed.contains(t.labels().as_slice()))
        .map(|t| t.case_id.clone())
        .collect();
    PrecisionResult {
        precision: precision.clamp(0.0, 1.0),
        excluded,
    }
}

/// `1 - mean over transitions of 1/sqrt(executions)`, with never-executed
/// transitions contributing 1.
pub fn generalization_from_counts(counts: &[u64]) -> f64 {
    if counts.is_empty() {
        log::warn!("generalization of a net without transitions defined as 1.0");
        return 1.0;
    }
    let s: f64 = counts
        .iter()
        .map(|&c| if c == 0 { 1.0 } else { 1.0 / (c as f64).sqrt() })
        .sum();
    (1.0 - s / counts.len() as f64).clamp(0.0, 1.0)
}

pub fn generalization(net: &PetriNet, log: &EventLog) -> f64 {
    generalization_from_counts(&token_replay(net, log).transition_counts)
}

/// `1 / (1 + max(0, d - 2))` for the mean arc degree `d` over all nodes.
pub fn simplicity(net: &PetriNet) -> f64 {
    let nodes = net.places().len() + net.transitions().len();
    if nodes == 0 {
        log::warn!("simplicity of an empty net defined as 1.0");
        return 1.0;
    }
    let d = 2.0 * net.arc_count() as f64 / nodes as f64;
    1.0 / (1.0 + (d - 2.0).max(0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QualityReport {
    /// Token-replay fitness.
    pub fitness: f64,
    pub precision: f64,
    pub generalization: f64,
    pub simplicity: f64,
    pub alignment_fitness: Option<f64>,
    /// Cases left out of alignment-based metrics.
    pub excluded: Vec<String>,
    pub warnings: Vec<String>,
}

impl QualityReport {
    pub fn is_partial(&self) -> bool {
        !self.excluded.is_empty()
    }
}

/// All four quality dimensions plus alignment fitness when requested.
pub fn quality_report(
    net: &PetriNet,
    log: &EventLog,
    config: &ConformanceConfig,
    with_alignment_fitness: bool,
) -> (QualityReport, ReplayResult) {
    let mut warnings = Vec::new();
    let unknown: BTreeSet<&String> = log.alphabet().iter().filter(|a| !net.labels().contains(*a)).collect();
    if !unknown.is_empty() {
        warnings.push(format!(
            "log activities absent from the model: {}",
            unknown.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
        ));
    }
    let replay = token_replay(net, log);
    let precision = precision_escaping(net, log, config);
    let mut excluded = precision.excluded.clone();
    let alignment_fitness = if with_alignment_fitness {
        match fitness_alignment(net, log, config) {
            Ok(f) => {
                excluded.extend(f.excluded);
                Some(f.fitness)
            }
            Err(e) => {
                warnings.push(e.to_string());
                None
            }
        }
    } else {
        None
    };
    excluded.sort();
    excluded.dedup();
    let report = QualityReport {
        fitness: replay.fitness,
        precision: precision.precision,
        generalization: generalization_from_counts(&replay.transition_counts),
        simplicity: simplicity(net),
        alignment_fitness,
        excluded,
        warnings,
    };
    (report, replay)
}
