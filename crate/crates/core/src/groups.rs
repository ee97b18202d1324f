//! Sensitive features and the composite group index.
//!
//! Several sensitive features `A_1..A_K` are folded into one composite feature
//! `S` with `M = |A_1| * ... * |A_K|` values, one per intersection of levels.
//! The encoding is mixed radix with the first declared feature most significant,
//! so group numbers are stable across runs.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// How fairness is evaluated when several sensitive features are present.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum GroupMode {
    /// One constraint set over all intersections of feature levels.
    #[default]
    Intersectional,
    /// One constraint set per sensitive feature, over overlapping groups.
    Independent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensitiveFeature {
    pub name: String,
    pub cardinality: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensitiveSpec {
    features: Vec<SensitiveFeature>,
    mode: GroupMode,
}

impl SensitiveSpec {
    pub fn new(features: Vec<SensitiveFeature>, mode: GroupMode) -> Result<Self> {
        if features.is_empty() {
            return domain("at least one sensitive feature is required");
        }
        for f in &features {
            if f.cardinality < 2 {
                return domain(format!(
                    "sensitive feature '{}' has cardinality {} (< 2)",
                    f.name, f.cardinality
                ));
            }
        }
        if features
            .iter()
            .try_fold(1usize, |acc, f| acc.checked_mul(f.cardinality))
            .is_none()
        {
            return domain("composite group count overflows");
        }
        Ok(Self { features, mode })
    }

    /// Shorthand for unnamed features, named `a1`, `a2`, ...
    pub fn from_cardinalities(cards: &[usize], mode: GroupMode) -> Result<Self> {
        let features = cards
            .iter()
            .enumerate()
            .map(|(i, &cardinality)| SensitiveFeature {
                name: format!("a{}", i + 1),
                cardinality,
            })
            .collect();
        Self::new(features, mode)
    }

    pub fn features(&self) -> &[SensitiveFeature] {
        &self.features
    }

    pub fn mode(&self) -> GroupMode {
        self.mode
    }

    /// Number of sensitive features `K`.
    pub fn num_features(&self) -> usize {
        self.features.len()
    }

    pub fn cardinalities(&self) -> Vec<usize> {
        self.features.iter().map(|f| f.cardinality).collect()
    }

    /// Number of intersectional groups `M`.
    pub fn num_groups(&self) -> usize {
        self.features.iter().map(|f| f.cardinality).product()
    }

    /// Composite index of a 1-based level tuple, itself 1-based in `[1, M]`.
    pub fn composite_index(&self, tuple: &[usize]) -> Result<usize> {
        if tuple.len() != self.features.len() {
            return domain(format!(
                "sensitive tuple has arity {}, expected {}",
                tuple.len(),
                self.features.len()
            ));
        }
        if let Some((f, &v)) = self
            .features
            .iter()
            .zip(tuple)
            .find(|(f, &v)| v == 0 || v > f.cardinality)
        {
            return domain(format!(
                "value {} of '{}' is outside [1, {}]",
                v, f.name, f.cardinality
            ));
        }
        let zero_based: Vec<usize> = tuple.iter().map(|v| v - 1).collect();
        Ok(self.group_of(&zero_based)? + 1)
    }

    /// Zero-based group of a zero-based level tuple.
    pub fn group_of(&self, codes: &[usize]) -> Result<usize> {
        if codes.len() != self.features.len() {
            return domain(format!(
                "sensitive tuple has arity {}, expected {}",
                codes.len(),
                self.features.len()
            ));
        }
        let mut index = 0usize;
        for (f, &code) in self.features.iter().zip(codes) {
            if code >= f.cardinality {
                return domain(format!(
                    "level code {} of '{}' is outside [0, {})",
                    code, f.name, f.cardinality
                ));
            }
            index = index * f.cardinality + code;
        }
        Ok(index)
    }

    /// Inverse of [`group_of`](Self::group_of).
    pub fn decode(&self, group: usize) -> Result<Vec<usize>> {
        if group >= self.num_groups() {
            return domain(format!(
                "group {} is outside [0, {})",
                group,
                self.num_groups()
            ));
        }
        let mut rest = group;
        let mut codes = vec![0; self.features.len()];
        for (slot, f) in codes.iter_mut().zip(&self.features).rev() {
            *slot = rest % f.cardinality;
            rest /= f.cardinality;
        }
        Ok(codes)
    }

    /// Level of feature `k` held by composite group `group`.
    pub fn level_of(&self, group: usize, k: usize) -> Result<usize> {
        if k >= self.features.len() {
            return domain(format!("feature index {} out of range", k));
        }
        Ok(self.decode(group)?[k])
    }
}
