//! Run configuration: a TOML document plus command-line overrides.
//!
//! ```toml
//! dataset = "data.csv"          # relative paths resolve against this file
//! target = "income"
//! positive_label = ">50K"       # optional; otherwise the target must hold 0/1
//! sensitive = ["race", "sex"]   # ordered; levels are the sorted distinct values
//! categorical = ["workclass"]   # one-hot, first sorted level is the reference
//! exclude = ["fnlwgt"]          # columns to ignore
//! output_dir = "out"
//! seed = 7                      # master seed for every derived seed
//! method = "postprocess"        # or "inprocess"
//! lambda = [0.2, -0.2]          # optional fixed multipliers for fit/postprocess
//!
//! [fairness]
//! notion = "DP"                 # DP, EO, PE, AP or EqualizedOdds
//! measure = "MD"                # MD or MR
//! delta = 0.05
//! mode = "intersectional"       # or "independent"
//!
//! [pipeline]                    # any PipelineConfig field except fairness and seed
//! c = 0.5
//! attribute = "blind"
//! grid = { points_per_axis = 21 }
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use fairbayes::fairness::{FairnessSpec, Measure, Notion};
use fairbayes::groups::GroupMode;
use fairbayes::pipeline::{AttributeMode, Method, PipelineConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const DEFAULT_OUTPUT_DIR: &str = "fairbayes-out";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FairnessSection {
    pub notion: Notion,
    pub measure: Measure,
    pub delta: f64,
    pub mode: GroupMode,
}

impl Default for FairnessSection {
    fn default() -> Self {
        Self {
            notion: Notion::DemographicParity,
            measure: Measure::MeanDifference,
            delta: 0.05,
            mode: GroupMode::Intersectional,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub target: Option<String>,
    pub positive_label: Option<String>,
    pub sensitive: Vec<String>,
    pub categorical: Vec<String>,
    pub exclude: Vec<String>,
    pub output_dir: Option<PathBuf>,
    pub seed: u64,
    pub method: Method,
    pub lambda: Option<Vec<f64>>,
    pub fairness: FairnessSection,
    pub pipeline: toml::Table,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {}", path.display(), e)))?;
        let mut config: RunConfig = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("invalid config {}: {}", path.display(), e)))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut config.dataset, &mut config.output_dir].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }

    pub fn fairness_spec(&self) -> CliResult<FairnessSpec> {
        let f = &self.fairness;
        FairnessSpec::with_mode(f.notion, f.measure, f.delta, f.mode).map_err(|e| CliError::Config(e.to_string()))
    }

    /// The `[pipeline]` table with the top-level fairness spec and seed filled in.
    pub fn pipeline_config(&self) -> CliResult<PipelineConfig> {
        for key in ["fairness", "seed"] {
            if self.pipeline.contains_key(key) {
                return Err(CliError::Config(format!(
                    "'{}' belongs at the top level of the config, not in [pipeline]",
                    key
                )));
            }
        }
        let mut config: PipelineConfig = toml::Value::Table(self.pipeline.clone())
            .try_into()
            .map_err(|e| CliError::Config(format!("invalid [pipeline] section: {}", e)))?;
        config.fairness = self.fairness_spec()?;
        config.seed = self.seed;
        config.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(config)
    }

    pub fn dataset_path(&self) -> CliResult<&Path> {
        self.dataset
            .as_deref()
            .ok_or_else(|| CliError::Config("no dataset given (config 'dataset' or --dataset)".into()))
    }

    pub fn target_column(&self) -> CliResult<&str> {
        self.target
            .as_deref()
            .ok_or_else(|| CliError::Config("no target column given (config 'target' or --target)".into()))
    }

    /// Output directory, created if missing.
    pub fn prepare_output_dir(&self) -> CliResult<PathBuf> {
        let dir = self.output_dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR));
        fs::create_dir_all(&dir)
            .map_err(|e| CliError::Config(format!("output directory {} is not writable: {}", dir.display(), e)))?;
        Ok(dir)
    }
}

fn parse_list(s: &str) -> Vec<String> {
    s.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect()
}

fn parse_numbers(s: &str) -> CliResult<Vec<f64>> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Config(format!("'{}' is not a number", v.trim())))
        })
        .collect()
}

/// Options shared by the commands that run on a dataset; each overrides the config.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub target: Option<String>,
    /// Target value read as the positive class.
    #[arg(long)]
    pub positive_label: Option<String>,
    /// Comma-separated, in order.
    #[arg(long)]
    pub sensitive: Option<String>,
    /// Comma-separated.
    #[arg(long)]
    pub categorical: Option<String>,
    /// Comma-separated.
    #[arg(long)]
    pub exclude: Option<String>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub notion: Option<String>,
    #[arg(long)]
    pub measure: Option<String>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// intersectional or independent.
    #[arg(long)]
    pub mode: Option<String>,
    /// blind or aware.
    #[arg(long)]
    pub attribute: Option<String>,
    /// Cost of a false positive.
    #[arg(long)]
    pub c: Option<f64>,
    /// Acceptance probability on ties.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Explicit grid: points separated by ';', components by ','; a single
    /// component is broadcast to every axis.
    #[arg(long)]
    pub grid: Option<String>,
    /// Cartesian grid points per axis.
    #[arg(long)]
    pub grid_resolution: Option<usize>,
    /// postprocess or inprocess.
    #[arg(long)]
    pub method: Option<String>,
    /// Fixed multipliers, comma-separated; skips the grid search.
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<String>,
}

impl RunArgs {
    /// The config file (if any) with every given flag applied on top.
    pub fn resolve(&self) -> CliResult<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let cfg_err = |e: fairbayes::FairError| CliError::Config(e.to_string());
        if let Some(v) = &self.dataset {
            c.dataset = Some(v.clone());
        }
        if let Some(v) = &self.target {
            c.target = Some(v.clone());
        }
        if let Some(v) = &self.positive_label {
            c.positive_label = Some(v.clone());
        }
        if let Some(v) = &self.sensitive {
            c.sensitive = parse_list(v);
        }
        if let Some(v) = &self.categorical {
            c.categorical = parse_list(v);
        }
        if let Some(v) = &self.exclude {
            c.exclude = parse_list(v);
        }
        if let Some(v) = &self.output_dir {
            c.output_dir = Some(v.clone());
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = &self.notion {
            c.fairness.notion = v.parse().map_err(cfg_err)?;
        }
        if let Some(v) = &self.measure {
            c.fairness.measure = v.parse().map_err(cfg_err)?;
        }
        if let Some(v) = self.delta {
            c.fairness.delta = v;
        }
        if let Some(v) = &self.mode {
            c.fairness.mode = match v.to_ascii_lowercase().as_str() {
                "intersectional" => GroupMode::Intersectional,
                "independent" => GroupMode::Independent,
                _ => return Err(CliError::Config(format!("unknown group mode '{}'", v))),
            };
        }
        if let Some(v) = &self.method {
            c.method = match v.to_ascii_lowercase().as_str() {
                "postprocess" => Method::Postprocess,
                "inprocess" => Method::Inprocess,
                _ => return Err(CliError::Config(format!("unknown method '{}'", v))),
            };
        }
        if let Some(v) = &self.lambda {
            c.lambda = Some(parse_numbers(v)?);
        }
        let table = &mut c.pipeline;
        if let Some(v) = &self.attribute {
            let mode = match v.to_ascii_lowercase().as_str() {
                "blind" => AttributeMode::Blind,
                "aware" => AttributeMode::Aware,
                _ => return Err(CliError::Config(format!("unknown attribute mode '{}'", v))),
            };
            table.insert("attribute".into(), toml::Value::try_from(mode).expect("serializable"));
        }
        if let Some(v) = self.c {
            table.insert("c".into(), toml::Value::Float(v));
        }
        if let Some(v) = self.alpha {
            table.insert("alpha".into(), toml::Value::Float(v));
        }
        if self.grid.is_some() || self.grid_resolution.is_some() {
            let grid = table
                .entry("grid")
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            let grid = grid
                .as_table_mut()
                .ok_or_else(|| CliError::Config("[pipeline] grid must be a table".into()))?;
            if let Some(points) = &self.grid {
                let parsed = points
                    .split(';')
                    .map(|p| parse_numbers(p).map(|v| toml::Value::Array(v.into_iter().map(toml::Value::Float).collect())))
                    .collect::<CliResult<Vec<_>>>()?;
                grid.insert("points".into(), toml::Value::Array(parsed));
            }
            if let Some(r) = self.grid_resolution {
                grid.insert("points_per_axis".into(), toml::Value::Integer(r as i64));
            }
        }
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn document_parses_and_flags_override() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        fs::write(
            &path,
            r#"
dataset = "data.csv"
target = "y"
sensitive = ["a", "b"]
seed = 3

[fairness]
notion = "EO"
measure = "MR"
delta = 0.8

[pipeline]
c = 0.4
grid = { points_per_axis = 5 }
"#,
        )
        .unwrap();
        let args = RunArgs {
            config: Some(path),
            delta: Some(0.9),
            alpha: Some(0.5),
            grid: Some("0;0.5,-0.5".into()),
            ..Default::default()
        };
        let run = args.resolve().unwrap();
        assert_eq!(run.dataset.as_deref(), Some(dir.path().join("data.csv").as_path()));
        let p = run.pipeline_config().unwrap();
        assert_eq!(p.fairness.notion, Notion::EqualOpportunity);
        assert_eq!(p.fairness.delta, 0.9);
        assert_eq!((p.c, p.alpha, p.seed), (0.4, 0.5, 3));
        assert_eq!(p.grid.points_per_axis, Some(5));
        assert_eq!(p.grid.points, Some(vec![vec![0.0], vec![0.5, -0.5]]));
    }

    #[test]
    fn misplaced_and_unknown_keys_are_config_errors() {
        let mut run = RunConfig::default();
        run.pipeline.insert("seed".into(), toml::Value::Integer(1));
        assert_eq!(run.pipeline_config().unwrap_err().exit_code(), 1);
        assert!(toml::from_str::<RunConfig>("bogus = 1").is_err());
        let bad = RunArgs {
            notion: Some("XYZ".into()),
            ..Default::default()
        };
        assert_eq!(bad.resolve().unwrap_err().exit_code(), 1);
    }
}
