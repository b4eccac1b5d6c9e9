//! TOML run configuration.
//!
//! ```toml
//! [input]
//! path = "sepsis.xes"
//! sepsis_aliases = true
//!
//! [discovery]
//! algorithm = "inductive"
//! noise_threshold = 0.2
//!
//! [model]
//! output_dir = "out/model"
//!
//! [report]
//! output_dir = "out/reports"
//! format = "json"
//!
//! [[guidelines]]
//! name = "antibiotics-1h"
//! anchor = "ER Sepsis Triage"
//! target = "IV Antibiotics"
//! limit_hours = 1.0
//!
//! [[rules]]
//! rule = 'SIRSCriteria2OrMore = true => contains "IV Antibiotics"'
//! ```
//!
//! Relative paths are resolved against the directory holding the file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Deserialize;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub input: InputConfig,
    #[serde(default)]
    pub discovery: DiscoveryConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub report: ReportConfig,
    #[serde(default)]
    pub guidelines: Vec<GuidelineConfig>,
    #[serde(default)]
    pub rules: Vec<RuleConfig>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    pub path: Option<PathBuf>,
    /// `xes` or `csv`; inferred from the extension when absent.
    pub format: Option<String>,
    pub case_column: Option<String>,
    pub activity_column: Option<String>,
    pub timestamp_column: Option<String>,
    pub timestamp_format: Option<String>,
    /// Extra CSV columns and their kinds.
    #[serde(default)]
    pub attributes: BTreeMap<String, String>,
    #[serde(default)]
    pub sepsis_aliases: bool,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscoveryConfig {
    pub algorithm: Option<String>,
    pub noise_threshold: Option<f64>,
    pub dependency_threshold: Option<f64>,
    pub long_distance_threshold: Option<f64>,
    pub and_threshold: Option<f64>,
    pub min_directly_follows: Option<usize>,
    pub all_activities_connected: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// PNML model for conformance and export.
    pub input: Option<PathBuf>,
    /// Use the bundled sepsis reference model instead of `input`.
    #[serde(default)]
    pub systematic: bool,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportConfig {
    pub output_dir: Option<PathBuf>,
    /// `text` or `json`.
    pub format: Option<String>,
    #[serde(default)]
    pub per_trace: bool,
    #[serde(default)]
    pub alignment_fitness: bool,
    pub align_budget: Option<usize>,
    pub top: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GuidelineConfig {
    pub name: String,
    pub anchor: String,
    pub target: String,
    pub limit_hours: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleConfig {
    pub rule: String,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut config: RunConfig = toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut Option<PathBuf>| {
            if let Some(inner) = p {
                if inner.is_relative() {
                    *inner = base.join(&*inner);
                }
            }
        };
        resolve(&mut config.input.path);
        resolve(&mut config.model.input);
        resolve(&mut config.model.output_dir);
        resolve(&mut config.report.output_dir);
        Ok(config)
    }
}
