//! Versioned on-disk record of a fitted classifier.

use std::fs;
use std::path::Path;

use fairbayes::fairness::FairnessSpec;
use fairbayes::pipeline::FairClassifier;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::ingest::Schema;

pub const RECORD_FORMAT: &str = "fairbayes-model";
pub const RECORD_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub format: String,
    pub version: u32,
    pub schema: Schema,
    pub fairness: FairnessSpec,
    pub c: f64,
    pub seed: u64,
    pub classifier: FairClassifier,
}

impl ModelRecord {
    pub fn new(schema: Schema, fairness: FairnessSpec, c: f64, seed: u64, classifier: FairClassifier) -> Self {
        Self {
            format: RECORD_FORMAT.into(),
            version: RECORD_VERSION,
            schema,
            fairness,
            c,
            seed,
            classifier,
        }
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        let text = serde_json::to_string_pretty(self).expect("record serializes");
        fs::write(path, text).map_err(|e| CliError::Config(format!("cannot write {}: {}", path.display(), e)))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read model {}: {}", path.display(), e)))?;
        let header: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{} is not JSON: {}", path.display(), e)))?;
        if header["format"] != RECORD_FORMAT {
            return Err(CliError::Config(format!("{} is not a {} record", path.display(), RECORD_FORMAT)));
        }
        if header["version"] != RECORD_VERSION {
            return Err(CliError::Config(format!(
                "{} has record version {}, expected {}",
                path.display(),
                header["version"],
                RECORD_VERSION
            )));
        }
        serde_json::from_value(header).map_err(|e| CliError::Config(format!("invalid model record {}: {}", path.display(), e)))
    }
}
