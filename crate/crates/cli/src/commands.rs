use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use procmine::analytics::{
    check_time_guideline, cohort_stats, evaluate_rule, extract_variants, sepsis_aliases, table, variant_stats,
    CohortReport, DecisionRule, GuidelineReport, GuidelineSpec, RuleReport,
};
use procmine::conformance::{quality_report, ConformanceConfig};
use procmine::eventlog::{parse_csv, parse_xes, write_xes, ColumnMapping, TimestampFormat};
use procmine::heuristics::build_dependency_graph;
use procmine::models::{build_systematic_model, cnet_to_petri, export_dot, export_pnml, import_pnml, tree_to_petri};
use procmine::{discover_heuristics, discover_inductive, EventLog, HeuristicsParams, PetriNet, ProcessTree, ValueKind};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::output::Outputs;
use crate::{Algorithm, Command, InputArgs, LogFormat, ModelArgs, ModelFormat, ReportArgs, ReportFormat};

pub fn dispatch(command: Command, config: &RunConfig) -> Result<()> {
    match command {
        Command::Convert { input, output } => {
            let log = load_log(&input, config)?;
            let mut out = Outputs::new();
            out.add(output.as_deref(), write_xes(&log).as_bytes())?;
            out.commit()
        }
        Command::Discover {
            input,
            algorithm,
            noise,
            dependency_threshold,
            long_distance_threshold,
            and_threshold,
            min_directly_follows,
            output_dir,
        } => {
            let d = &config.discovery;
            let algorithm = match algorithm {
                Some(a) => a,
                None => match d.algorithm.as_deref() {
                    None | Some("inductive") => Algorithm::Inductive,
                    Some("heuristics") => Algorithm::Heuristics,
                    Some(other) => bail!("unknown discovery algorithm '{other}' (expected inductive or heuristics)"),
                },
            };
            let mut params = HeuristicsParams::default();
            let pick = |flag: Option<f64>, key: Option<f64>, default: f64| flag.or(key).unwrap_or(default);
            params.dependency_threshold = pick(dependency_threshold, d.dependency_threshold, params.dependency_threshold);
            params.long_distance_threshold =
                pick(long_distance_threshold, d.long_distance_threshold, params.long_distance_threshold);
            params.and_threshold = pick(and_threshold, d.and_threshold, params.and_threshold);
            params.min_directly_follows = min_directly_follows
                .or(d.min_directly_follows)
                .unwrap_or(params.min_directly_follows);
            params.all_activities_connected = d.all_activities_connected.unwrap_or(params.all_activities_connected);
            let noise = noise.or(d.noise_threshold).unwrap_or(0.0);
            if !(0.0..=1.0).contains(&noise) {
                bail!("noise threshold {noise} outside [0, 1]");
            }
            let dir = output_dir
                .or_else(|| config.model.output_dir.clone())
                .unwrap_or_else(|| PathBuf::from("."));
            let log = load_log(&input, config)?;
            discover(&log, algorithm, noise, &params, &dir)
        }
        Command::Conformance {
            input,
            model,
            report,
            per_trace,
            alignment_fitness,
            align_budget,
        } => {
            let net = load_model(&model, config)?;
            let log = load_log(&input, config)?;
            let r = &config.report;
            let mut conf = ConformanceConfig::default();
            if let Some(b) = align_budget.or(r.align_budget) {
                conf.align_budget = b;
            }
            let (format, path) = report_target(&report, config, "conformance")?;
            conformance(
                &net,
                &log,
                &conf,
                per_trace || r.per_trace,
                alignment_fitness || r.alignment_fitness,
                format,
                path.as_deref(),
            )
        }
        Command::Variants { input, report, top } => {
            let log = load_log(&input, config)?;
            let (format, path) = report_target(&report, config, "variants")?;
            let text = variants_report(&log, top.or(config.report.top), format)?;
            let mut out = Outputs::new();
            out.add(path.as_deref(), text.as_bytes())?;
            out.commit()
        }
        Command::Guidelines {
            input,
            report,
            guidelines,
            rules,
            sepsis_preset,
        } => {
            let mut specs: Vec<GuidelineSpec> = config
                .guidelines
                .iter()
                .map(|g| GuidelineSpec {
                    name: g.name.clone(),
                    anchor: g.anchor.clone(),
                    target: g.target.clone(),
                    limit_hours: g.limit_hours,
                })
                .collect();
            for g in &guidelines {
                specs.push(parse_guideline(g)?);
            }
            let mut rule_texts: Vec<String> = config.rules.iter().map(|r| r.rule.clone()).collect();
            rule_texts.extend(rules);
            if sepsis_preset {
                specs.extend(sepsis_guidelines());
                rule_texts.extend(SEPSIS_RULES.iter().map(|s| s.to_string()));
            }
            if specs.is_empty() && rule_texts.is_empty() {
                bail!("no guidelines or rules configured (use --guideline, --rule, --sepsis-preset or the config file)");
            }
            let parsed: Vec<DecisionRule> = rule_texts
                .iter()
                .map(|r| r.parse().with_context(|| format!("rule '{r}'")))
                .collect::<Result<_>>()?;
            let log = load_log(&input, config)?;
            let (format, path) = report_target(&report, config, "guidelines")?;
            let text = guidelines_report(&log, &specs, &parsed, format)?;
            let mut out = Outputs::new();
            out.add(path.as_deref(), text.as_bytes())?;
            out.commit()
        }
        Command::Cohorts { input, report } => {
            let log = load_log(&input, config)?;
            let (format, path) = report_target(&report, config, "cohorts")?;
            let text = cohorts_report(&cohort_stats(&log), format)?;
            let mut out = Outputs::new();
            out.add(path.as_deref(), text.as_bytes())?;
            out.commit()
        }
        Command::Export { model, to, output } => {
            let net = load_model(&model, config)?;
            let text = match to {
                ModelFormat::Dot => export_dot(&net),
                ModelFormat::Pnml => export_pnml(&net),
            };
            let mut out = Outputs::new();
            out.add(output.as_deref(), text.as_bytes())?;
            out.commit()
        }
    }
}

fn load_log(args: &InputArgs, config: &RunConfig) -> Result<EventLog> {
    let c = &config.input;
    let path = args
        .input
        .clone()
        .or_else(|| c.path.clone())
        .ok_or_else(|| anyhow!("no input log (use --input or [input] path)"))?;
    let format = match args.log_format {
        Some(f) => f,
        None => match c.format.as_deref() {
            Some("xes") => LogFormat::Xes,
            Some("csv") => LogFormat::Csv,
            Some(other) => bail!("unknown log format '{other}' (expected xes or csv)"),
            None => match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
                Some("csv") => LogFormat::Csv,
                Some("xes") | Some("xml") => LogFormat::Xes,
                _ => bail!("cannot infer the format of {}; pass --log-format", path.display()),
            },
        },
    };
    let file = File::open(&path).with_context(|| format!("opening {}", path.display()))?;
    let reader = BufReader::new(file);
    let log = match format {
        LogFormat::Xes => parse_xes(reader),
        LogFormat::Csv => {
            let pick = |flag: &Option<String>, key: &Option<String>, default: &str| {
                flag.clone().or_else(|| key.clone()).unwrap_or_else(|| default.to_string())
            };
            let mut mapping = ColumnMapping::new(
                &pick(&args.case_column, &c.case_column, "case:concept:name"),
                &pick(&args.activity_column, &c.activity_column, "concept:name"),
                &pick(&args.timestamp_column, &c.timestamp_column, "time:timestamp"),
            );
            mapping.timestamp_format = TimestampFormat::from(pick(&args.timestamp_format, &c.timestamp_format, "rfc3339").as_str());
            let mut attrs: BTreeMap<String, String> = c.attributes.clone();
            for a in &args.attributes {
                let (name, kind) = a
                    .rsplit_once(':')
                    .ok_or_else(|| anyhow!("attribute '{a}' must look like NAME:KIND"))?;
                attrs.insert(name.to_string(), kind.to_string());
            }
            for (name, kind) in attrs {
                mapping.attribute_columns.push((name, kind.parse::<ValueKind>()?));
            }
            parse_csv(reader, &mapping)
        }
    }
    .with_context(|| format!("reading {}", path.display()))?;
    log::info!(
        "loaded {}: {} traces, {} events, {} activities",
        path.display(),
        log.len(),
        log.event_count(),
        log.alphabet().len()
    );
    Ok(if args.sepsis_aliases || c.sepsis_aliases {
        log.rename(&sepsis_aliases())
    } else {
        log
    })
}

fn load_model(args: &ModelArgs, config: &RunConfig) -> Result<PetriNet> {
    if args.systematic || (args.model.is_none() && config.model.systematic) {
        return Ok(build_systematic_model()?);
    }
    let path = args
        .model
        .clone()
        .or_else(|| config.model.input.clone())
        .ok_or_else(|| anyhow!("no model (use --model, --systematic or [model] input)"))?;
    let text = std::fs::read_to_string(&path).with_context(|| format!("opening {}", path.display()))?;
    import_pnml(&text).with_context(|| format!("reading {}", path.display()))
}

fn report_target(args: &ReportArgs, config: &RunConfig, command: &str) -> Result<(ReportFormat, Option<PathBuf>)> {
    let format = match args.format {
        Some(f) => f,
        None => match config.report.format.as_deref() {
            None | Some("text") => ReportFormat::Text,
            Some("json") => ReportFormat::Json,
            Some(other) => bail!("unknown report format '{other}' (expected text or json)"),
        },
    };
    let ext = match format {
        ReportFormat::Text => "txt",
        ReportFormat::Json => "json",
    };
    let path = args
        .output
        .clone()
        .or_else(|| config.report.output_dir.as_ref().map(|d| d.join(format!("{command}.{ext}"))));
    Ok((format, path))
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn net_summary(net: &PetriNet) -> Value {
    json!({
        "activities": net.labels().len(),
        "places": net.places().len(),
        "transitions": net.transitions().len(),
        "silent_transitions": net.transitions().iter().filter(|t| t.is_silent()).count(),
        "arcs": net.arc_count(),
    })
}

fn count_operators(tree: &ProcessTree, counts: &mut BTreeMap<&'static str, usize>) {
    if let Some(op) = tree.op() {
        *counts.entry(op.keyword()).or_default() += 1;
    }
    for c in tree.children() {
        count_operators(c, counts);
    }
}

fn discover(log: &EventLog, algorithm: Algorithm, noise: f64, params: &HeuristicsParams, dir: &Path) -> Result<()> {
    let log_info = json!({
        "traces": log.len(),
        "events": log.event_count(),
        "activities": log.alphabet().len(),
    });
    let (net, summary) = match algorithm {
        Algorithm::Inductive => {
            let tree = discover_inductive(log, noise);
            let mut ops = BTreeMap::new();
            count_operators(&tree, &mut ops);
            let net = tree_to_petri(&tree);
            let summary = json!({
                "algorithm": "inductive",
                "parameters": { "noise_threshold": noise },
                "log": log_info,
                "tree": tree.to_string(),
                "operators": ops,
                "model": net_summary(&net),
            });
            (net, summary)
        }
        Algorithm::Heuristics => {
            let cnet = discover_heuristics(log, params)?;
            let graph = build_dependency_graph(log, params);
            let net = cnet_to_petri(&cnet)?;
            let repaired = cnet.arcs.values().filter(|a| a.repaired).count();
            let summary = json!({
                "algorithm": "heuristics",
                "parameters": {
                    "dependency_threshold": params.dependency_threshold,
                    "long_distance_threshold": params.long_distance_threshold,
                    "and_threshold": params.and_threshold,
                    "min_directly_follows": params.min_directly_follows,
                    "all_activities_connected": params.all_activities_connected,
                },
                "log": log_info,
                "dependency_graph": {
                    "activities": graph.connected_activities().len(),
                    "arcs": cnet.arcs.len() - repaired,
                    "repaired_arcs": repaired,
                    "long_distance_arcs": cnet.long_distance_arcs.len(),
                },
                "causal_net": {
                    "nodes": cnet.nodes.len(),
                    "input_bindings": cnet.inputs.values().map(Vec::len).sum::<usize>(),
                    "output_bindings": cnet.outputs.values().map(Vec::len).sum::<usize>(),
                    "start": cnet.start,
                    "end": cnet.end,
                },
                "model": net_summary(&net),
            });
            (net, summary)
        }
    };
    let mut out = Outputs::new();
    out.add(Some(&dir.join("model.pnml")), export_pnml(&net).as_bytes())?;
    out.add(Some(&dir.join("model.dot")), export_dot(&net).as_bytes())?;
    out.add(Some(&dir.join("summary.json")), to_json(&summary)?.as_bytes())?;
    out.commit()
}

fn conformance(
    net: &PetriNet,
    log: &EventLog,
    config: &ConformanceConfig,
    per_trace: bool,
    alignment_fitness: bool,
    format: ReportFormat,
    path: Option<&Path>,
) -> Result<()> {
    if log.is_empty() {
        log::warn!("empty log: fitness is vacuously 1");
    }
    let (report, replay) = quality_report(net, log, config, alignment_fitness);
    for w in &report.warnings {
        log::warn!("{w}");
    }
    if report.is_partial() {
        log::warn!("{} traces excluded from alignment-based metrics", report.excluded.len());
    }
    let text = match format {
        ReportFormat::Json => {
            let mut v = serde_json::to_value(&report)?;
            v["partial"] = json!(report.is_partial());
            if per_trace {
                v["traces"] = serde_json::to_value(&replay.traces)?;
            }
            to_json(&v)?
        }
        ReportFormat::Text => {
            let mut rows = vec![vec!["fitness".to_string(), format!("{:.4}", report.fitness)]];
            if let Some(a) = report.alignment_fitness {
                rows.push(vec!["alignment_fitness".into(), format!("{a:.4}")]);
            }
            rows.push(vec!["precision".into(), format!("{:.4}", report.precision)]);
            rows.push(vec!["generalization".into(), format!("{:.4}", report.generalization)]);
            rows.push(vec!["simplicity".into(), format!("{:.4}", report.simplicity)]);
            rows.push(vec!["excluded".into(), report.excluded.len().to_string()]);
            let mut s = table::render(&["metric", "value"], &rows);
            for w in &report.warnings {
                s.push_str(&format!("warning: {w}\n"));
            }
            if report.is_partial() {
                s.push_str(&format!("partial: excluded {}\n", report.excluded.join(", ")));
            }
            if per_trace {
                let rows: Vec<Vec<String>> = replay
                    .traces
                    .iter()
                    .map(|t| {
                        vec![
                            t.case_id.clone(),
                            t.produced.to_string(),
                            t.consumed.to_string(),
                            t.missing.to_string(),
                            t.remaining.to_string(),
                            format!("{:.4}", t.fitness),
                        ]
                    })
                    .collect();
                s.push('\n');
                s.push_str(&table::render(&["case", "produced", "consumed", "missing", "remaining", "fitness"], &rows));
            }
            s
        }
    };
    let mut out = Outputs::new();
    out.add(path, text.as_bytes())?;
    out.commit()
}

fn variants_report(log: &EventLog, top: Option<usize>, format: ReportFormat) -> Result<String> {
    let stats = variant_stats(log);
    let mut variants = extract_variants(log);
    if let Some(n) = top {
        variants.truncate(n);
    }
    if format == ReportFormat::Json {
        return to_json(&json!({ "stats": stats, "variants": variants }));
    }
    let mut s = table::render(
        &["measure", "value"],
        &[
            vec!["traces".into(), stats.traces.to_string()],
            vec!["events".into(), stats.events.to_string()],
            vec!["activities".into(), stats.activities.to_string()],
            vec!["variants".into(), stats.variants.to_string()],
            vec!["share_over_one_day".into(), format!("{:.1}%", stats.share_over_one_day * 100.0)],
        ],
    );
    let total = log.len().max(1) as f64;
    let rows: Vec<Vec<String>> = variants
        .iter()
        .enumerate()
        .map(|(i, v)| {
            vec![
                (i + 1).to_string(),
                v.frequency.to_string(),
                format!("{:.1}%", v.frequency as f64 / total * 100.0),
                v.signature.len().to_string(),
                format!("{:.2}", v.duration_mean_hours),
                v.signature.join(", "),
            ]
        })
        .collect();
    s.push('\n');
    s.push_str(&table::render(&["rank", "cases", "share", "events", "mean_hours", "variant"], &rows));
    let rows: Vec<Vec<String>> = stats
        .per_activity
        .iter()
        .map(|(a, st)| vec![a.clone(), st.occurrences.to_string(), st.cases.to_string(), st.rework.to_string()])
        .collect();
    s.push('\n');
    s.push_str(&table::render(&["activity", "occurrences", "cases", "rework"], &rows));
    Ok(s)
}

const SEPSIS_RULES: &[&str] = &[
    r#"SIRSCriteria2OrMore = true => contains "IV Antibiotics""#,
    r#"SIRSCriteria2OrMore = true => contains "IV Liquid""#,
];

fn sepsis_guidelines() -> Vec<GuidelineSpec> {
    vec![
        GuidelineSpec {
            name: "antibiotics-1h".into(),
            anchor: "ER Sepsis Triage".into(),
            target: "IV Antibiotics".into(),
            limit_hours: 1.0,
        },
        GuidelineSpec {
            name: "lactic-acid-3h".into(),
            anchor: "ER Sepsis Triage".into(),
            target: "LacticAcid".into(),
            limit_hours: 3.0,
        },
    ]
}

fn parse_guideline(s: &str) -> Result<GuidelineSpec> {
    let err = || anyhow!("guideline '{s}' must look like NAME=ANCHOR->TARGET@HOURS");
    let (name, rest) = s.split_once('=').ok_or_else(err)?;
    let (acts, hours) = rest.rsplit_once('@').ok_or_else(err)?;
    let (anchor, target) = acts.split_once("->").ok_or_else(err)?;
    Ok(GuidelineSpec {
        name: name.trim().into(),
        anchor: anchor.trim().into(),
        target: target.trim().into(),
        limit_hours: hours.trim().parse().map_err(|_| err())?,
    })
}

fn opt(v: Option<f64>, scale: f64, suffix: &str) -> String {
    v.map(|x| format!("{:.2}{suffix}", x * scale)).unwrap_or_else(|| "n/a".into())
}

fn guidelines_report(log: &EventLog, specs: &[GuidelineSpec], rules: &[DecisionRule], format: ReportFormat) -> Result<String> {
    let guidelines: Vec<GuidelineReport> = specs
        .iter()
        .map(|g| check_time_guideline(log, g))
        .collect::<Result<_, _>>()?;
    let rules: Vec<RuleReport> = rules
        .iter()
        .map(|r| evaluate_rule(log, r, 5))
        .collect::<Result<_, _>>()?;
    if format == ReportFormat::Json {
        return to_json(&json!({ "guidelines": guidelines, "rules": rules }));
    }
    let mut s = String::new();
    if !guidelines.is_empty() {
        let rows: Vec<Vec<String>> = guidelines
            .iter()
            .map(|g| {
                vec![
                    g.name.clone(),
                    g.evaluable_cases.to_string(),
                    g.compliant.to_string(),
                    g.violating.to_string(),
                    g.negative_delays.to_string(),
                    g.non_evaluable.to_string(),
                    opt(g.violation_rate, 100.0, "%"),
                    opt(g.mean_delay_hours, 1.0, ""),
                    format!("{} -> {} within {}h", g.anchor, g.target, g.limit_hours),
                ]
            })
            .collect();
        s.push_str(&table::render(
            &["guideline", "evaluable", "compliant", "violating", "negative", "non_evaluable", "violation_rate", "mean_delay_h", "definition"],
            &rows,
        ));
    }
    if !rules.is_empty() {
        if !s.is_empty() {
            s.push('\n');
        }
        let rows: Vec<Vec<String>> = rules
            .iter()
            .map(|r| {
                vec![
                    r.support.to_string(),
                    r.satisfied.to_string(),
                    opt(r.confidence, 100.0, "%"),
                    r.rule.clone(),
                ]
            })
            .collect();
        s.push_str(&table::render(&["support", "satisfied", "confidence", "rule"], &rows));
    }
    Ok(s)
}

fn cohorts_report(r: &CohortReport, format: ReportFormat) -> Result<String> {
    if format == ReportFormat::Json {
        return to_json(r);
    }
    let pct = |k: &str| format!("{:.1}%", r.rates.get(k).copied().unwrap_or(0.0) * 100.0);
    let row = |name: &str, n: usize, key: Option<&str>| {
        vec![name.to_string(), n.to_string(), key.map(pct).unwrap_or_default()]
    };
    let rows = vec![
        row("cases", r.total_cases, None),
        row("discharged_without_admission", r.discharged_without_admission, Some("discharged_without_admission")),
        row("admitted_nc", r.admitted_nc, Some("admitted_nc")),
        row("admitted_ic", r.admitted_ic, Some("admitted_ic")),
        row("nc_then_ic", r.nc_then_ic, Some("nc_then_ic")),
        row("no_release_recorded", r.no_release_recorded, None),
        row("returns_within_28_days", r.returns_within_28_days, Some("returns_within_28_days")),
        row("returns_within_one_year", r.returns_within_one_year, Some("returns_within_one_year")),
        row("returns_without_release", r.returns_without_release, None),
    ];
    let mut s = table::render(&["cohort", "cases", "rate"], &rows);
    if !r.returns_28_days_by_release.is_empty() {
        let rows: Vec<Vec<String>> = r
            .returns_28_days_by_release
            .iter()
            .map(|(k, v)| vec![k.clone(), v.to_string()])
            .collect();
        s.push('\n');
        s.push_str(&table::render(&["release_before_return", "returns_28_days"], &rows));
    }
    Ok(s)
}
