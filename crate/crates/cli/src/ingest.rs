//! CSV ingestion with a deterministic, reusable encoding schema.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::path::Path;

use fairbayes::data::{Dataset, Sample};
use fairbayes::groups::{GroupMode, SensitiveFeature, SensitiveSpec};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

/// A CSV file held as strings.
#[derive(Debug, Clone)]
pub struct Table {
    pub source: String,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn read(path: &Path) -> CliResult<Self> {
        let source = path.display().to_string();
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| CliError::Data(format!("cannot read {}: {}", source, e)))?;
        let headers: Vec<String> = reader
            .headers()
            .map_err(|e| CliError::Data(format!("{}: bad header: {}", source, e)))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record.map_err(|e| CliError::Data(format!("{}: row {}: {}", source, i + 1, e)))?;
            rows.push(record.iter().map(str::to_string).collect());
        }
        Ok(Self { source, headers, rows })
    }

    pub fn column(&self, name: &str) -> CliResult<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Data(format!("{}: no column named '{}'", self.source, name)))
    }

    fn cell_error(&self, row: usize, column: usize, message: impl std::fmt::Display) -> CliError {
        CliError::Data(format!(
            "{}: row {} (line {}), column '{}': {}",
            self.source,
            row + 1,
            row + 2,
            self.headers[column],
            message
        ))
    }

    /// Sorted distinct values of a column.
    pub fn levels(&self, column: usize) -> Vec<String> {
        let set: BTreeSet<&str> = self.rows.iter().map(|r| r[column].as_str()).collect();
        let mut levels: Vec<String> = set.into_iter().map(str::to_string).collect();
        levels.sort_by(|a, b| compare_levels(a, b));
        levels
    }

    /// Values of a numeric column in `[0, 1]`.
    pub fn probabilities(&self, name: &str) -> CliResult<Vec<f64>> {
        let col = self.column(name)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| match r[col].parse::<f64>() {
                Ok(v) if (0.0..=1.0).contains(&v) => Ok(v),
                _ => Err(self.cell_error(i, col, format!("'{}' is not a probability in [0, 1]", r[col]))),
            })
            .collect()
    }
}

/// Numeric order when both values parse as numbers, text order otherwise.
fn compare_levels(a: &str, b: &str) -> Ordering {
    match (a.parse::<f64>(), b.parse::<f64>()) {
        (Ok(x), Ok(y)) => x.total_cmp(&y).then_with(|| a.cmp(b)),
        _ => a.cmp(b),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureColumn {
    Numeric { name: String },
    /// One indicator per level after the first, which is the reference.
    Categorical { name: String, levels: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitiveColumn {
    pub name: String,
    pub levels: Vec<String>,
}

/// How a CSV maps onto features, sensitive codes and labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub target: String,
    pub positive_label: Option<String>,
    pub features: Vec<FeatureColumn>,
    pub sensitive: Vec<SensitiveColumn>,
    pub mode: GroupMode,
}

impl Schema {
    /// Infers the schema: features are every column not claimed as target,
    /// sensitive, excluded or listed in `also_excluded`, in file order.
    pub fn infer(table: &Table, config: &RunConfig, also_excluded: &[String]) -> CliResult<Self> {
        let target = config.target_column()?.to_string();
        table.column(&target)?;
        if config.sensitive.is_empty() {
            return Err(CliError::Config("at least one sensitive column is required".into()));
        }
        let mut claimed: Vec<&str> = vec![target.as_str()];
        for name in config.sensitive.iter().chain(&config.exclude).chain(also_excluded) {
            table.column(name)?;
            claimed.push(name);
        }
        for (i, a) in claimed.iter().enumerate() {
            if claimed[..i].contains(a) && !config.exclude.iter().chain(also_excluded).any(|e| e == a) {
                return Err(CliError::Config(format!("column '{}' is claimed twice", a)));
            }
        }
        for name in &config.categorical {
            table.column(name)?;
            if claimed.contains(&name.as_str()) {
                return Err(CliError::Config(format!(
                    "categorical column '{}' is also the target, sensitive or excluded",
                    name
                )));
            }
        }
        let sensitive = config
            .sensitive
            .iter()
            .map(|name| {
                let levels = table.levels(table.column(name)?);
                if levels.len() < 2 {
                    return Err(CliError::Data(format!(
                        "sensitive column '{}' has {} distinct value(s); at least 2 are required",
                        name,
                        levels.len()
                    )));
                }
                Ok(SensitiveColumn {
                    name: name.clone(),
                    levels,
                })
            })
            .collect::<CliResult<Vec<_>>>()?;
        let features = table
            .headers
            .iter()
            .enumerate()
            .filter(|(_, h)| !claimed.contains(&h.as_str()))
            .map(|(i, h)| {
                if config.categorical.contains(h) {
                    FeatureColumn::Categorical {
                        name: h.clone(),
                        levels: table.levels(i),
                    }
                } else {
                    FeatureColumn::Numeric { name: h.clone() }
                }
            })
            .collect();
        Ok(Self {
            target,
            positive_label: config.positive_label.clone(),
            features,
            sensitive,
            mode: config.fairness.mode,
        })
    }

    /// Encoded feature names; indicators are named `column=level`.
    pub fn feature_names(&self) -> Vec<String> {
        self.features
            .iter()
            .flat_map(|f| match f {
                FeatureColumn::Numeric { name } => vec![name.clone()],
                FeatureColumn::Categorical { name, levels } => {
                    levels.iter().skip(1).map(|l| format!("{}={}", name, l)).collect()
                }
            })
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.feature_names().len()
    }

    pub fn sensitive_spec(&self) -> CliResult<SensitiveSpec> {
        Ok(SensitiveSpec::new(
            self.sensitive
                .iter()
                .map(|s| SensitiveFeature {
                    name: s.name.clone(),
                    cardinality: s.levels.len(),
                })
                .collect(),
            self.mode,
        )?)
    }

    fn label(&self, table: &Table, row: usize, col: usize) -> CliResult<u8> {
        let raw = table.rows[row][col].as_str();
        match &self.positive_label {
            Some(positive) => Ok((raw.trim_end_matches('.') == positive.trim_end_matches('.')) as u8),
            None => match raw {
                "0" => Ok(0),
                "1" => Ok(1),
                _ => Err(table.cell_error(row, col, format!("'{}' is not a binary label (expected 0 or 1)", raw))),
            },
        }
    }

    /// Features and sensitive codes of every row, plus labels when the target column is present.
    pub fn encode(&self, table: &Table) -> CliResult<(Vec<Sample>, bool)> {
        let target = table.headers.iter().position(|h| *h == self.target);
        let feature_cols = self
            .features
            .iter()
            .map(|f| match f {
                FeatureColumn::Numeric { name } | FeatureColumn::Categorical { name, .. } => table.column(name),
            })
            .collect::<CliResult<Vec<_>>>()?;
        let sensitive_cols = self
            .sensitive
            .iter()
            .map(|s| table.column(&s.name))
            .collect::<CliResult<Vec<_>>>()?;
        let mut samples = Vec::with_capacity(table.rows.len());
        for (i, row) in table.rows.iter().enumerate() {
            let mut features = Vec::with_capacity(self.dim());
            for (f, &col) in self.features.iter().zip(&feature_cols) {
                let cell = row[col].as_str();
                match f {
                    FeatureColumn::Numeric { .. } => match cell.parse::<f64>() {
                        Ok(v) if v.is_finite() => features.push(v),
                        _ => return Err(table.cell_error(i, col, format!("'{}' is not a number", cell))),
                    },
                    FeatureColumn::Categorical { levels, .. } => {
                        let at = levels
                            .iter()
                            .position(|l| l == cell)
                            .ok_or_else(|| table.cell_error(i, col, format!("unknown level '{}'", cell)))?;
                        features.extend((1..levels.len()).map(|k| (k == at) as u8 as f64));
                    }
                }
            }
            let sensitive = self
                .sensitive
                .iter()
                .zip(&sensitive_cols)
                .map(|(s, &col)| {
                    s.levels
                        .iter()
                        .position(|l| *l == row[col])
                        .ok_or_else(|| table.cell_error(i, col, format!("unknown sensitive level '{}'", row[col])))
                })
                .collect::<CliResult<Vec<_>>>()?;
            let label = match target {
                Some(col) => self.label(table, i, col)?,
                None => 0,
            };
            samples.push(Sample {
                features,
                sensitive,
                label,
            });
        }
        Ok((samples, target.is_some()))
    }

    /// Labelled dataset; the target column must be present.
    pub fn dataset(&self, table: &Table) -> CliResult<Dataset> {
        let (samples, labelled) = self.encode(table)?;
        if !labelled {
            return Err(CliError::Data(format!("{}: no column named '{}'", table.source, self.target)));
        }
        if samples.is_empty() {
            return Err(CliError::Data(format!("{}: no data rows", table.source)));
        }
        Dataset::new(self.sensitive_spec()?, samples).map_err(|e| CliError::Data(e.to_string()))
    }
}

/// Reads the configured dataset and encodes it.
pub fn ingest(config: &RunConfig, also_excluded: &[String]) -> CliResult<(Schema, Dataset)> {
    let table = Table::read(config.dataset_path()?)?;
    let schema = Schema::infer(&table, config, also_excluded)?;
    let dataset = schema.dataset(&table)?;
    Ok((schema, dataset))
}
