//! Labelled samples with sensitive attributes.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::groups::SensitiveSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub features: Vec<f64>,
    /// Zero-based level code per sensitive feature.
    pub sensitive: Vec<usize>,
    pub label: u8,
}

/// A finite sample `{(x_i, s_i, y_i)}` sharing one feature dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    spec: SensitiveSpec,
    dim: usize,
    samples: Vec<Sample>,
    groups: Vec<usize>,
}

impl Dataset {
    pub fn new(spec: SensitiveSpec, samples: Vec<Sample>) -> Result<Self> {
        let dim = samples.first().map_or(0, |s| s.features.len());
        let mut groups = Vec::with_capacity(samples.len());
        for (i, s) in samples.iter().enumerate() {
            if s.features.len() != dim {
                return domain(format!(
                    "row {} has {} features, expected {}",
                    i,
                    s.features.len(),
                    dim
                ));
            }
            if s.label > 1 {
                return domain(format!("row {} has non-binary label {}", i, s.label));
            }
            if let Some(v) = s.features.iter().find(|v| !v.is_finite()) {
                return domain(format!("row {} has non-finite feature {}", i, v));
            }
            groups.push(spec.group_of(&s.sensitive).map_err(|e| {
                crate::FairError::Domain(format!("row {}: {}", i, e))
            })?);
        }
        Ok(Self {
            spec,
            dim,
            samples,
            groups,
        })
    }

    pub fn spec(&self) -> &SensitiveSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn num_groups(&self) -> usize {
        self.spec.num_groups()
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    /// Composite (zero-based) group of every row.
    pub fn groups(&self) -> &[usize] {
        &self.groups
    }

    pub fn labels(&self) -> Vec<u8> {
        self.samples.iter().map(|s| s.label).collect()
    }

    pub fn features(&self) -> Vec<&[f64]> {
        self.samples.iter().map(|s| s.features.as_slice()).collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            spec: self.spec.clone(),
            dim: self.dim,
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            groups: indices.iter().map(|&i| self.groups[i]).collect(),
        }
    }

    /// Shuffled split into consecutive parts with the given fractions.
    ///
    /// Fractions are normalized; the last part takes the rounding remainder.
    pub fn split(&self, fractions: &[f64], seed: u64) -> Result<Vec<Self>> {
        if fractions.is_empty() || fractions.iter().any(|f| !(*f > 0.0)) {
            return domain("split fractions must be positive");
        }
        let total: f64 = fractions.iter().sum();
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut parts = Vec::with_capacity(fractions.len());
        let mut start = 0usize;
        let mut acc = 0.0;
        for (i, f) in fractions.iter().enumerate() {
            acc += f / total;
            let end = if i + 1 == fractions.len() {
                self.len()
            } else {
                ((acc * self.len() as f64).round() as usize).min(self.len())
            };
            parts.push(self.subset(&order[start..end]));
            start = end;
        }
        Ok(parts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::GroupMode;

    fn spec() -> SensitiveSpec {
        SensitiveSpec::from_cardinalities(&[2], GroupMode::Intersectional).unwrap()
    }

    fn sample(x: f64, s: usize, y: u8) -> Sample {
        Sample {
            features: vec![x],
            sensitive: vec![s],
            label: y,
        }
    }

    #[test]
    fn rejects_inconsistent_rows() {
        assert!(Dataset::new(spec(), vec![sample(0.0, 0, 2)]).is_err());
        assert!(Dataset::new(spec(), vec![sample(0.0, 2, 0)]).is_err());
        let mut bad = sample(0.0, 0, 1);
        bad.features.push(1.0);
        assert!(Dataset::new(spec(), vec![sample(0.0, 0, 1), bad]).is_err());
    }

    #[test]
    fn split_partitions_rows() {
        let rows = (0..101).map(|i| sample(i as f64, i % 2, (i % 3 == 0) as u8)).collect();
        let ds = Dataset::new(spec(), rows).unwrap();
        let parts = ds.split(&[0.5, 0.25, 0.25], 3).unwrap();
        assert_eq!(parts.iter().map(Dataset::len).sum::<usize>(), 101);
        let mut xs: Vec<f64> = parts
            .iter()
            .flat_map(|p| p.samples().iter().map(|s| s.features[0]))
            .collect();
        xs.sort_by(f64::total_cmp);
        assert_eq!(xs, (0..101).map(|i| i as f64).collect::<Vec<_>>());
        assert_eq!(parts, ds.split(&[0.5, 0.25, 0.25], 3).unwrap());
    }
}
