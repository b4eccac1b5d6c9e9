//! Random model generators and brute-force oracles shared by the test
//! suites.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

use procmine::conformance::{align, token_replay, CostFunction, DEFAULT_BUDGET};
use procmine::inductive::{discover_inductive, ProcessTree};
use procmine::models::{tree_to_petri, Marking, PetriNet, PlaceId, TransitionId};
use procmine::EventLog;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

pub type Language = BTreeSet<Vec<String>>;

const LABELS: [&str; 8] = ["a", "b", "c", "d", "e", "f", "g", "h"];

fn split_labels<R: Rng>(rng: &mut R, labels: &[String], parts: usize) -> Vec<Vec<String>> {
    let mut shuffled = labels.to_vec();
    shuffled.shuffle(rng);
    let mut groups: Vec<Vec<String>> = vec![Vec::new(); parts];
    for (i, l) in shuffled.into_iter().enumerate() {
        let g = if i < parts { i } else { rng.gen_range(0..parts) };
        groups[g].push(l);
    }
    for g in &mut groups {
        g.sort();
    }
    groups
}

fn gen_tree<R: Rng>(rng: &mut R, labels: &[String], level: usize, max_depth: usize, parent_loop: bool) -> ProcessTree {
    if labels.len() == 1 && (level == max_depth || rng.gen_bool(0.6)) {
        return ProcessTree::Activity(labels[0].clone());
    }
    let remaining = max_depth - level;
    if labels.len() > 1 && remaining <= 1 {
        // flat operator over leaves
        let children = labels.iter().cloned().map(ProcessTree::Activity).collect();
        return if rng.gen_bool(0.5) {
            ProcessTree::Sequence(children)
        } else {
            ProcessTree::Xor(children)
        };
    }
    let choices: &[u8] = if parent_loop { &[0, 1, 2] } else { &[0, 1, 2, 3] };
    let op = *choices.choose(rng).unwrap();
    let leaf_tau = |rng: &mut R| rng.gen_bool(0.25);
    match op {
        3 => {
            // loop: body plus one redo; a silent part if only one label
            if labels.len() == 1 {
                let body = ProcessTree::Activity(labels[0].clone());
                return if rng.gen_bool(0.5) {
                    ProcessTree::Loop(vec![body, ProcessTree::Silent])
                } else {
                    ProcessTree::Loop(vec![ProcessTree::Silent, body])
                };
            }
            let g = split_labels(rng, labels, 2);
            ProcessTree::Loop(vec![
                gen_tree(rng, &g[0], level + 1, max_depth, true),
                gen_tree(rng, &g[1], level + 1, max_depth, true),
            ])
        }
        1 if labels.len() == 1 || leaf_tau(rng) => {
            // optional part
            let inner = gen_tree(rng, labels, level + 1, max_depth, false);
            ProcessTree::Xor(vec![inner, ProcessTree::Silent])
        }
        _ if labels.len() == 1 => ProcessTree::Activity(labels[0].clone()),
        _ => {
            let parts = rng.gen_range(2..=labels.len().min(3));
            let g = split_labels(rng, labels, parts);
            let children = g
                .iter()
                .map(|l| gen_tree(rng, l, level + 1, max_depth, false))
                .collect();
            match op {
                0 => ProcessTree::Sequence(children),
                1 => ProcessTree::Xor(children),
                _ => ProcessTree::Concurrent(children),
            }
        }
    }
}

/// Random tree over up to `max_activities` distinct labels with depth at
/// most `max_depth` (at least 2). Loops never sit directly under loops.
pub fn random_tree<R: Rng>(rng: &mut R, max_activities: usize, max_depth: usize) -> ProcessTree {
    let n = rng.gen_range(1..=max_activities.clamp(1, LABELS.len()));
    let labels: Vec<String> = LABELS[..n].iter().map(|s| s.to_string()).collect();
    gen_tree(rng, &labels, 1, max_depth.max(2), false)
}

fn concat(a: &Language, b: &Language, cap: usize) -> Option<Language> {
    let mut out = Language::new();
    for x in a {
        for y in b {
            let mut t = x.clone();
            t.extend(y.iter().cloned());
            out.insert(t);
            if out.len() > cap {
                return None;
            }
        }
    }
    Some(out)
}

fn shuffle_into(x: &[String], y: &[String], prefix: &mut Vec<String>, out: &mut Language) {
    if x.is_empty() || y.is_empty() {
        let mut t = prefix.clone();
        t.extend(x.iter().chain(y).cloned());
        out.insert(t);
        return;
    }
    prefix.push(x[0].clone());
    shuffle_into(&x[1..], y, prefix, out);
    prefix.pop();
    prefix.push(y[0].clone());
    shuffle_into(x, &y[1..], prefix, out);
    prefix.pop();
}

fn interleave(a: &Language, b: &Language, cap: usize) -> Option<Language> {
    let mut out = Language::new();
    for x in a {
        for y in b {
            shuffle_into(x, y, &mut Vec::new(), &mut out);
            if out.len() > cap {
                return None;
            }
        }
    }
    Some(out)
}

/// Traces of `tree` with every loop iterating its redo part at most
/// `unrollings` times. `None` when more than `cap` traces arise.
pub fn enumerate_language(tree: &ProcessTree, unrollings: usize, cap: usize) -> Option<Language> {
    match tree {
        ProcessTree::Activity(a) => Some(Language::from([vec![a.clone()]])),
        ProcessTree::Silent => Some(Language::from([Vec::new()])),
        ProcessTree::Sequence(c) => {
            let mut acc = Language::from([Vec::new()]);
            for child in c {
                acc = concat(&acc, &enumerate_language(child, unrollings, cap)?, cap)?;
            }
            Some(acc)
        }
        ProcessTree::Xor(c) => {
            let mut acc = Language::new();
            for child in c {
                acc.extend(enumerate_language(child, unrollings, cap)?);
            }
            (acc.len() <= cap).then_some(acc)
        }
        ProcessTree::Concurrent(c) => {
            let mut acc = Language::from([Vec::new()]);
            for child in c {
                acc = interleave(&acc, &enumerate_language(child, unrollings, cap)?, cap)?;
            }
            Some(acc)
        }
        ProcessTree::Loop(c) => {
            let body = enumerate_language(&c[0], unrollings, cap)?;
            let mut redo = Language::new();
            for r in &c[1..] {
                redo.extend(enumerate_language(r, unrollings, cap)?);
            }
            let mut acc = body.clone();
            let mut layer = body.clone();
            for _ in 0..unrollings {
                layer = concat(&concat(&layer, &redo, cap)?, &body, cap)?;
                acc.extend(layer.iter().cloned());
                if acc.len() > cap {
                    return None;
                }
            }
            Some(acc)
        }
    }
}

/// Unbounded membership test for `trace` in the language of `tree`.
pub fn tree_accepts(tree: &ProcessTree, trace: &[String]) -> bool {
    let mut memo = HashMap::new();
    accepts(tree, trace, &mut memo)
}

fn accepts(tree: &ProcessTree, trace: &[String], memo: &mut HashMap<(*const ProcessTree, Vec<String>), bool>) -> bool {
    let key = (tree as *const ProcessTree, trace.to_vec());
    if let Some(&v) = memo.get(&key) {
        return v;
    }
    let result = match tree {
        ProcessTree::Activity(a) => trace.len() == 1 && &trace[0] == a,
        ProcessTree::Silent => trace.is_empty(),
        ProcessTree::Xor(c) => c.iter().any(|x| accepts(x, trace, memo)),
        ProcessTree::Sequence(c) => seq_accepts(c, trace, memo),
        ProcessTree::Concurrent(c) => {
            // each label belongs to exactly one child when labels are unique;
            // otherwise try every assignment
            and_accepts(c, trace, memo)
        }
        ProcessTree::Loop(c) => loop_accepts(&c[0], &c[1..], trace, memo),
    };
    memo.insert(key, result);
    result
}

fn seq_accepts(children: &[ProcessTree], trace: &[String], memo: &mut HashMap<(*const ProcessTree, Vec<String>), bool>) -> bool {
    match children {
        [] => trace.is_empty(),
        [only] => accepts(only, trace, memo),
        [first, rest @ ..] => (0..=trace.len()).any(|k| accepts(first, &trace[..k], memo) && seq_accepts(rest, &trace[k..], memo)),
    }
}

fn and_accepts(children: &[ProcessTree], trace: &[String], memo: &mut HashMap<(*const ProcessTree, Vec<String>), bool>) -> bool {
    let k = children.len();
    let n = trace.len();
    let total = (k as u64).checked_pow(n as u32).unwrap_or(u64::MAX);
    assert!(total <= 5_000_000, "membership oracle: trace too long for concurrency check");
    let mut assign = vec![0usize; n];
    loop {
        let parts: Vec<Vec<String>> = (0..k)
            .map(|c| (0..n).filter(|&i| assign[i] == c).map(|i| trace[i].clone()).collect())
            .collect();
        if children.iter().zip(&parts).all(|(ch, p)| accepts(ch, p, memo)) {
            return true;
        }
        let mut i = 0;
        loop {
            if i == n {
                return false;
            }
            assign[i] += 1;
            if assign[i] < k {
                break;
            }
            assign[i] = 0;
            i += 1;
        }
    }
}

fn loop_accepts(body: &ProcessTree, redo: &[ProcessTree], trace: &[String], memo: &mut HashMap<(*const ProcessTree, Vec<String>), bool>) -> bool {
    // body_end[i]: trace[..i] is body (redo body)*
    let n = trace.len();
    let mut body_end = vec![false; n + 1];
    let mut redo_end = vec![false; n + 1];
    redo_end[0] = true;
    // iterate to a fixpoint; silent parts may match empty segments
    let mut changed = true;
    while changed {
        changed = false;
        for j in 0..=n {
            if !body_end[j] && (0..=j).any(|i| redo_end[i] && accepts(body, &trace[i..j], memo)) {
                body_end[j] = true;
                changed = true;
            }
            if !redo_end[j]
                && (0..=j).any(|i| body_end[i] && redo.iter().any(|r| accepts(r, &trace[i..j], memo)))
            {
                redo_end[j] = true;
                changed = true;
            }
        }
    }
    body_end[n]
}

/// Visible traces of complete runs (ending in the final marking) of length
/// at most `max_len`. `None` if more than `state_cap` search states.
pub fn net_language(net: &PetriNet, max_len: usize, state_cap: usize) -> Option<Language> {
    let fin = net.final_marking();
    let mut out = Language::new();
    let mut seen: HashSet<(Marking, Vec<String>)> = HashSet::new();
    let mut queue = VecDeque::from([(net.initial_marking(), Vec::<String>::new())]);
    seen.insert((net.initial_marking(), Vec::new()));
    while let Some((m, trace)) = queue.pop_front() {
        if m == fin {
            out.insert(trace.clone());
        }
        for t in net.enabled(&m) {
            let mut next_trace = trace.clone();
            if let Some(l) = &net.transition(t).label {
                if trace.len() == max_len {
                    continue;
                }
                next_trace.push(l.clone());
            }
            let next = net.fire(&m, t).ok()?;
            if seen.insert((next.clone(), next_trace.clone())) {
                if seen.len() > state_cap {
                    return None;
                }
                queue.push_back((next, next_trace));
            }
        }
    }
    Some(out)
}

/// Explore the reachability graph; `None` when it exceeds `cap` markings or
/// any place exceeds `bound` tokens.
pub fn reachable_markings(net: &PetriNet, cap: usize, bound: u32) -> Option<HashSet<Marking>> {
    let start = net.initial_marking();
    let mut seen = HashSet::from([start.clone()]);
    let mut queue = VecDeque::from([start]);
    while let Some(m) = queue.pop_front() {
        for t in net.enabled(&m) {
            let next = net.fire(&m, t).ok()?;
            if next.0.iter().any(|&x| x > bound) {
                return None;
            }
            if seen.insert(next.clone()) {
                if seen.len() > cap {
                    return None;
                }
                queue.push_back(next);
            }
        }
    }
    Some(seen)
}

fn random_label_tree<R: Rng>(rng: &mut R, depth: usize) -> ProcessTree {
    let labels = ["a", "b", "c", "d"];
    if depth == 0 || rng.gen_bool(0.35) {
        return if rng.gen_bool(0.15) {
            ProcessTree::Silent
        } else {
            ProcessTree::Activity(labels.choose(rng).unwrap().to_string())
        };
    }
    let k = rng.gen_range(2..=3);
    let children: Vec<ProcessTree> = (0..k).map(|_| random_label_tree(rng, depth - 1)).collect();
    match rng.gen_range(0..4) {
        0 => ProcessTree::Sequence(children),
        1 => ProcessTree::Xor(children),
        2 => ProcessTree::Concurrent(children),
        _ => ProcessTree::Loop(children[..2].to_vec()),
    }
}

/// Random bounded net with at most `max_transitions` transitions whose final
/// marking is reachable. Labels may repeat; silent transitions occur.
/// Block-structured nets are sometimes perturbed with an extra arc.
pub fn random_net<R: Rng>(rng: &mut R, max_transitions: usize) -> PetriNet {
    loop {
        let tree = random_label_tree(rng, 3);
        let mut net = tree_to_petri(&tree);
        if net.transitions().len() > max_transitions || net.transitions().is_empty() {
            continue;
        }
        if rng.gen_bool(0.3) {
            let p = PlaceId(rng.gen_range(0..net.places().len()));
            let t = TransitionId(rng.gen_range(0..net.transitions().len()));
            if rng.gen_bool(0.5) {
                net.add_input_arc(p, t);
            } else {
                net.add_output_arc(t, p);
            }
        }
        let Some(states) = reachable_markings(&net, 2_000, 3) else {
            continue;
        };
        if states.contains(&net.final_marking()) {
            return net;
        }
    }
}

/// Random trace over the net's labels plus an occasional foreign label.
pub fn random_trace<R: Rng>(rng: &mut R, net: &PetriNet, max_len: usize) -> Vec<String> {
    let mut labels: Vec<String> = net.labels().into_iter().collect();
    labels.push("zz".into());
    let n = rng.gen_range(0..=max_len);
    (0..n).map(|_| labels.choose(rng).unwrap().clone()).collect()
}

/// Exhaustive 0-1 breadth-first search over the synchronous product.
pub fn brute_force_alignment_cost(net: &PetriNet, trace: &[String], costs: &CostFunction) -> Option<u64> {
    assert!(costs.log_move <= 1 && costs.model_move <= 1 && costs.silent_move <= 1, "0-1 costs only");
    let fin = net.final_marking();
    let start = (net.initial_marking(), 0usize);
    let mut dist: HashMap<(Marking, usize), u64> = HashMap::from([(start.clone(), 0)]);
    let mut deque = VecDeque::from([(start, 0u64)]);
    let mut best: Option<u64> = None;
    while let Some(((m, pos), d)) = deque.pop_front() {
        if dist.get(&(m.clone(), pos)).is_some_and(|&x| x < d) {
            continue;
        }
        if pos == trace.len() && m == fin {
            best = Some(best.map_or(d, |b: u64| b.min(d)));
        }
        let mut edges: Vec<((Marking, usize), u64)> = Vec::new();
        if pos < trace.len() {
            edges.push(((m.clone(), pos + 1), costs.log_move as u64));
        }
        for t in net.enabled(&m) {
            let next = net.fire(&m, t).expect("enabled");
            let tr = net.transition(t);
            match &tr.label {
                None => edges.push(((next, pos), costs.silent_move as u64)),
                Some(l) => {
                    if pos < trace.len() && *l == trace[pos] {
                        edges.push(((next.clone(), pos + 1), 0));
                    }
                    edges.push(((next, pos), costs.model_move as u64));
                }
            }
        }
        for (state, w) in edges {
            let nd = d + w;
            if dist.get(&state).is_none_or(|&x| nd < x) {
                dist.insert(state.clone(), nd);
                if w == 0 {
                    deque.push_front((state, nd));
                } else {
                    deque.push_back((state, nd));
                }
            }
        }
    }
    best
}

/// One rediscovery instance: random tree, its bounded language as a log,
/// inductive discovery at zero noise, conversion and token replay. Returns
/// the tree and replay fitness, or a description of what went wrong.
pub fn rediscovery_instance(seed: u64) -> Result<(ProcessTree, f64), String> {
    let mut rng = StdRng::seed_from_u64(seed);
    let tree = loop {
        let t = random_tree(&mut rng, 8, 4);
        if enumerate_language(&t, 2, 5_000).is_some() {
            break t;
        }
    };
    let lang = enumerate_language(&tree, 2, 5_000).expect("checked above");
    let sequences: Vec<Vec<String>> = lang.into_iter().collect();
    let log = EventLog::from_sequences(&sequences);
    let found = discover_inductive(&log, 0.0);
    let net = tree_to_petri(&found);
    let replay = token_replay(&net, &log);
    if replay.fitness != 1.0 {
        let bad: Vec<String> = replay
            .traces
            .iter()
            .filter(|t| !t.fits())
            .map(|t| t.case_id.clone())
            .collect();
        return Err(format!(
            "seed {seed}: tree {tree} mined as {found}, fitness {} (non-fitting cases {bad:?})",
            replay.fitness
        ));
    }
    Ok((tree, replay.fitness))
}

/// One alignment instance: random net and trace, A* cost against the
/// exhaustive oracle. Returns both costs.
pub fn alignment_instance(seed: u64) -> Result<(u64, u64), String> {
    let mut rng = StdRng::seed_from_u64(seed);
    let net = random_net(&mut rng, 8);
    let trace = random_trace(&mut rng, &net, 6);
    let costs = CostFunction::default();
    let oracle = brute_force_alignment_cost(&net, &trace, &costs)
        .ok_or_else(|| format!("seed {seed}: oracle found no alignment"))?;
    let found = align(&net, &trace, &costs, DEFAULT_BUDGET, &format!("seed-{seed}"))
        .map_err(|e| format!("seed {seed}: {e}"))?;
    if found.cost != oracle {
        return Err(format!("seed {seed}: trace {trace:?} cost {} but oracle {oracle}", found.cost));
    }
    Ok((found.cost, oracle))
}
