use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};

mod commands;
mod config;
mod output;

use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "procmine", version, about = "Process discovery, conformance checking and log analytics")]
struct Cli {
    /// TOML run configuration. Command-line flags override its keys.
    #[arg(long, short = 'c', global = true)]
    config: Option<PathBuf>,

    /// Worker threads for per-trace work [default: all cores].
    #[arg(long, global = true, env = "PROCMINE_THREADS")]
    threads: Option<usize>,

    /// More diagnostics on stderr (-v info, -vv debug).
    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Event log (.xes or .csv).
    #[arg(long, short = 'i')]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub log_format: Option<LogFormat>,
    /// CSV case column [default: case:concept:name].
    #[arg(long)]
    pub case_column: Option<String>,
    /// CSV activity column [default: concept:name].
    #[arg(long)]
    pub activity_column: Option<String>,
    /// CSV timestamp column [default: time:timestamp].
    #[arg(long)]
    pub timestamp_column: Option<String>,
    /// `rfc3339` or a strftime pattern [default: rfc3339].
    #[arg(long)]
    pub timestamp_format: Option<String>,
    /// Extra CSV column as NAME:KIND (text, integer, real, boolean, timestamp).
    #[arg(long = "attribute", value_name = "NAME:KIND")]
    pub attributes: Vec<String>,
    /// Rename activities and attributes of the public sepsis log to the
    /// spelling used by the bundled model.
    #[arg(long)]
    pub sepsis_aliases: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LogFormat {
    Xes,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Algorithm {
    Inductive,
    Heuristics,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelFormat {
    Dot,
    Pnml,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// PNML model.
    #[arg(long, short = 'm')]
    pub model: Option<PathBuf>,
    /// Use the bundled sepsis reference model.
    #[arg(long, conflicts_with = "model")]
    pub systematic: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Report file [default: standard output, or <report.output_dir>/<command>.<ext>].
    #[arg(long, short = 'o')]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<ReportFormat>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Read a CSV or XES log and write it as XES.
    Convert {
        #[command(flatten)]
        input: InputArgs,
        /// Output XES file [default: standard output].
        #[arg(long, short = 'o')]
        output: Option<PathBuf>,
    },
    /// Discover a Petri net; writes model.pnml, model.dot and summary.json.
    Discover {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, value_enum)]
        algorithm: Option<Algorithm>,
        /// Inductive miner noise threshold in [0, 1] [default: 0].
        #[arg(long)]
        noise: Option<f64>,
        /// Heuristics miner dependency threshold [default: 0.95].
        #[arg(long)]
        dependency_threshold: Option<f64>,
        /// Heuristics miner long-distance threshold [default: 0.98].
        #[arg(long)]
        long_distance_threshold: Option<f64>,
        /// Heuristics miner AND threshold [default: 0.65].
        #[arg(long)]
        and_threshold: Option<f64>,
        /// Heuristics miner minimum directly-follows count [default: 1].
        #[arg(long)]
        min_directly_follows: Option<usize>,
        /// Directory for the model files [default: current directory].
        #[arg(long, short = 'o')]
        output_dir: Option<PathBuf>,
    },
    /// Fitness, precision, generalization and simplicity of a model.
    Conformance {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        report: ReportArgs,
        /// Include per-trace replay diagnostics.
        #[arg(long)]
        per_trace: bool,
        /// Also compute alignment-based fitness.
        #[arg(long)]
        alignment_fitness: bool,
        /// Search-state budget per alignment [default: $PROCMINE_ALIGN_BUDGET or 1000000].
        #[arg(long)]
        align_budget: Option<usize>,
    },
    /// Trace variants with frequencies, durations and rework.
    Variants {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        report: ReportArgs,
        /// Show only the most frequent variants.
        #[arg(long)]
        top: Option<usize>,
    },
    /// Time guidelines and decision rules.
    Guidelines {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        report: ReportArgs,
        /// NAME=ANCHOR->TARGET@HOURS, e.g. "ab=ER Sepsis Triage->IV Antibiotics@1".
        #[arg(long = "guideline", value_name = "SPEC")]
        guidelines: Vec<String>,
        /// Decision rule, e.g. 'SIRSCriteria2OrMore = true => contains "IV Liquid"'.
        #[arg(long = "rule", value_name = "RULE")]
        rules: Vec<String>,
        /// Add the sepsis treatment guidelines and rules.
        #[arg(long)]
        sepsis_preset: bool,
    },
    /// Admission pathways and return rates.
    Cohorts {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        report: ReportArgs,
    },
    /// Render a PNML model (or the bundled one) as DOT or PNML.
    Export {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, default_value = "dot")]
        to: ModelFormat,
        #[arg(long, short = 'o')]
        output: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().context("starting worker threads")?;
    pool.install(|| commands::dispatch(cli.command, &config))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }
}
