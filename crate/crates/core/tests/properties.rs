use std::collections::BTreeSet;

use procmine::analytics::{check_time_guideline, cohort_stats, extract_variants, variant_stats, GuidelineSpec};
use procmine::conformance::{quality_report, token_replay, ConformanceConfig, CostFunction};
use procmine::heuristics::{dependency_measure, discover_heuristics, HeuristicsParams};
use procmine::inductive::discover_inductive;
use procmine::models::{export_pnml, import_pnml, tree_to_petri};
use procmine::EventLog;
use procmine_testkit::{net_language, random_net, random_trace, random_tree};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

fn sequences(alphabet: &'static [&'static str], max_traces: usize, max_len: usize) -> impl Strategy<Value = Vec<Vec<String>>> {
    prop::collection::vec(
        prop::collection::vec(prop::sample::select(alphabet).prop_map(String::from), 0..=max_len),
        1..=max_traces,
    )
}

const SEPSISH: &[&str] = &["ER Registration", "Admission NC", "Admission IC", "Release A", "Return ER", "CRP"];

fn config() -> ConformanceConfig {
    ConformanceConfig {
        costs: CostFunction::default(),
        align_budget: 200_000,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dependency_is_antisymmetric_and_bounded(ab in 0usize..500, ba in 0usize..500) {
        let d = dependency_measure(ab, ba);
        prop_assert!((d + dependency_measure(ba, ab)).abs() < 1e-12);
        prop_assert!(d > -1.0 && d < 1.0);
        prop_assert!(dependency_measure(ab + 1, ba) >= d);
    }

    #[test]
    fn quality_metrics_stay_in_unit_interval(seed in any::<u64>(), n in 1usize..6) {
        let mut rng = StdRng::seed_from_u64(seed);
        let net = random_net(&mut rng, 8);
        let seqs: Vec<Vec<String>> = (0..n).map(|_| random_trace(&mut rng, &net, 6)).collect();
        let log = EventLog::from_sequences(&seqs);
        let (report, replay) = quality_report(&net, &log, &config(), true);
        for v in [report.fitness, report.precision, report.generalization, report.simplicity, report.alignment_fitness.unwrap_or(0.0)] {
            prop_assert!((0.0..=1.0).contains(&v), "{report:?}");
        }
        for t in &replay.traces {
            prop_assert!(t.missing <= t.consumed && t.remaining <= t.produced, "{t:?}");
            prop_assert!((0.0..=1.0).contains(&t.fitness));
        }
    }

    #[test]
    fn language_traces_replay_without_deviation(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let net = tree_to_petri(&random_tree(&mut rng, 6, 4));
        if let Some(lang) = net_language(&net, 5, 50_000) {
            let seqs: Vec<Vec<String>> = lang.into_iter().take(20).collect();
            prop_assume!(!seqs.is_empty());
            let replay = token_replay(&net, &EventLog::from_sequences(&seqs));
            for t in &replay.traces {
                prop_assert!(t.fits(), "{t:?}");
            }
        }
    }

    #[test]
    fn duplicating_a_fitting_variant_never_lowers_fitness(seed in any::<u64>(), extra in sequences(&["a", "b", "c", "x"], 4, 5)) {
        let mut rng = StdRng::seed_from_u64(seed);
        let tree = random_tree(&mut rng, 3, 3);
        let net = tree_to_petri(&tree);
        let lang = net_language(&net, 4, 50_000).unwrap_or_default();
        prop_assume!(!lang.is_empty());
        let fitting = lang.into_iter().next().unwrap();
        let mut seqs = extra.clone();
        let before = token_replay(&net, &EventLog::from_sequences(&seqs)).fitness;
        seqs.push(fitting);
        let after = token_replay(&net, &EventLog::from_sequences(&seqs)).fitness;
        prop_assert!(after >= before - 1e-12, "{before} -> {after}");
    }

    #[test]
    fn discovery_ignores_trace_order(seqs in sequences(&["a", "b", "c", "d"], 8, 5), rot in 0usize..8) {
        let mut shuffled = seqs.clone();
        shuffled.reverse();
        let k = rot % shuffled.len();
        shuffled.rotate_left(k);
        let a = EventLog::from_sequences(&seqs);
        let b = EventLog::from_sequences(&shuffled);
        prop_assert_eq!(discover_inductive(&a, 0.0), discover_inductive(&b, 0.0));
        prop_assert_eq!(discover_inductive(&a, 0.2), discover_inductive(&b, 0.2));
        let params = HeuristicsParams::default();
        prop_assert_eq!(discover_heuristics(&a, &params).unwrap(), discover_heuristics(&b, &params).unwrap());
    }

    #[test]
    fn variants_partition_the_cases(seqs in sequences(SEPSISH, 12, 6)) {
        let log = EventLog::from_sequences(&seqs);
        let variants = extract_variants(&log);
        let mut ids: Vec<String> = variants.iter().flat_map(|v| v.case_ids.clone()).collect();
        prop_assert_eq!(variants.iter().map(|v| v.frequency).sum::<usize>(), log.len());
        ids.sort();
        let mut expected: Vec<String> = log.traces().iter().map(|t| t.case_id.clone()).collect();
        expected.sort();
        prop_assert_eq!(ids, expected);
        let sigs: BTreeSet<&Vec<String>> = variants.iter().map(|v| &v.signature).collect();
        prop_assert_eq!(sigs.len(), variants.len());
    }

    #[test]
    fn rework_is_occurrences_minus_cases(seqs in sequences(SEPSISH, 12, 8)) {
        let log = EventLog::from_sequences(&seqs);
        let stats = variant_stats(&log);
        prop_assert_eq!(stats.per_activity.values().map(|s| s.occurrences).sum::<usize>(), log.event_count());
        for (a, s) in &stats.per_activity {
            let cases = log.traces().iter().filter(|t| t.contains_activity(a)).count();
            prop_assert_eq!(s.cases, cases);
            prop_assert_eq!(s.rework, s.occurrences - cases);
        }
    }

    #[test]
    fn guideline_buckets_cover_all_cases(seqs in sequences(SEPSISH, 12, 6), limit in 0.01f64..0.2) {
        let log = EventLog::from_sequences(&seqs);
        let spec = GuidelineSpec {
            name: "g".into(),
            anchor: "ER Registration".into(),
            target: "CRP".into(),
            limit_hours: limit,
        };
        let r = check_time_guideline(&log, &spec).unwrap();
        prop_assert_eq!(r.compliant + r.violating, r.evaluable_cases);
        prop_assert_eq!(r.evaluable_cases + r.non_evaluable, r.total_cases);
        prop_assert!(r.negative_delays <= r.violating);
        if let Some(v) = r.violation_rate {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn cohort_classes_cover_all_cases(seqs in sequences(SEPSISH, 12, 6)) {
        let log = EventLog::from_sequences(&seqs);
        let r = cohort_stats(&log);
        prop_assert_eq!(r.pathways.values().sum::<usize>(), r.total_cases);
        prop_assert!(r.returns_within_28_days <= r.returns_within_one_year);
        prop_assert_eq!(r.returns_28_days_by_release.values().sum::<usize>(), r.returns_within_28_days);
    }

    #[test]
    fn pnml_round_trip_preserves_nets(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let net = random_net(&mut rng, 8);
        let text = export_pnml(&net);
        let back = import_pnml(&text).unwrap();
        prop_assert_eq!(&export_pnml(&back), &text);
        prop_assert_eq!(net_language(&back, 4, 50_000), net_language(&net, 4, 50_000));
    }
}
