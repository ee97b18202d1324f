//! Finite-support joint laws over `(x, s, y)` and the marginals derived from them.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{domain, FairError, Result};
use crate::groups::SensitiveSpec;

/// Tolerance on the total mass of a distribution.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// Exact joint distribution over a finite list of support points.
///
/// Masses are stored densely as `mass[(i * M + m) * 2 + y]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteJointDistribution {
    num_points: usize,
    num_groups: usize,
    mass: Vec<f64>,
    points: Option<Vec<Vec<f64>>>,
}

impl DiscreteJointDistribution {
    pub fn new(num_points: usize, num_groups: usize, mass: Vec<f64>) -> Result<Self> {
        if num_points == 0 || num_groups == 0 {
            return domain("distribution needs at least one point and one group");
        }
        if mass.len() != num_points * num_groups * 2 {
            return Err(FairError::DimensionMismatch {
                expected: num_points * num_groups * 2,
                got: mass.len(),
            });
        }
        if let Some(v) = mass.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return domain(format!("mass {} is negative or non-finite", v));
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return domain(format!("masses sum to {}, not 1", total));
        }
        Ok(Self {
            num_points,
            num_groups,
            mass,
            points: None,
        })
    }

    /// Builds the table from `mass(i, m, y)`.
    pub fn from_fn(
        num_points: usize,
        num_groups: usize,
        mass: impl Fn(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut table = Vec::with_capacity(num_points * num_groups * 2);
        for i in 0..num_points {
            for m in 0..num_groups {
                for y in 0..2 {
                    table.push(mass(i, m, y));
                }
            }
        }
        Self::new(num_points, num_groups, table)
    }

    /// Attaches feature vectors to the support points.
    pub fn with_points(mut self, points: Vec<Vec<f64>>) -> Result<Self> {
        if points.len() != self.num_points {
            return Err(FairError::DimensionMismatch {
                expected: self.num_points,
                got: points.len(),
            });
        }
        self.points = Some(points);
        Ok(self)
    }

    pub fn num_points(&self) -> usize {
        self.num_points
    }

    pub fn num_groups(&self) -> usize {
        self.num_groups
    }

    pub fn points(&self) -> Option<&[Vec<f64>]> {
        self.points.as_deref()
    }

    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    #[inline]
    pub fn mass(&self, i: usize, m: usize, y: usize) -> f64 {
        self.mass[(i * self.num_groups + m) * 2 + y]
    }

    /// `P(X = x_i)`.
    pub fn point_mass(&self, i: usize) -> f64 {
        let start = i * self.num_groups * 2;
        self.mass[start..start + self.num_groups * 2].iter().sum()
    }

    /// `P(X = x_i, Y = y)`.
    pub fn point_label_mass(&self, i: usize, y: usize) -> f64 {
        (0..self.num_groups).map(|m| self.mass(i, m, y)).sum()
    }

    /// `P(E_{y,m}) = P(Y = y, S = m)`.
    pub fn event_mass(&self, m: usize, y: usize) -> f64 {
        (0..self.num_points).map(|i| self.mass(i, m, y)).sum()
    }

    /// `η(x_i) = P(Y = 1 | X = x_i)`, `None` when `x_i` has no mass.
    pub fn eta(&self, i: usize) -> Option<f64> {
        let px = self.point_mass(i);
        (px > 0.0).then(|| self.point_label_mass(i, 1) / px)
    }

    /// `η(x_i, s) = P(Y = 1 | X = x_i, S = s)`.
    pub fn eta_given_group(&self, i: usize, s: usize) -> Option<f64> {
        let pxs = self.mass(i, s, 0) + self.mass(i, s, 1);
        (pxs > 0.0).then(|| self.mass(i, s, 1) / pxs)
    }

    /// `P(S = m, Y = y | X = x_i)` for every group, `None` when `x_i` has no mass.
    pub fn group_posterior(&self, i: usize) -> Option<Vec<[f64; 2]>> {
        let px = self.point_mass(i);
        (px > 0.0).then(|| {
            (0..self.num_groups)
                .map(|m| [self.mass(i, m, 0) / px, self.mass(i, m, 1) / px])
                .collect()
        })
    }

    pub fn marginals(&self) -> MarginalSet {
        MarginalSet::of(self)
    }

    /// Collapses composite groups onto the levels of sensitive feature `k`.
    pub fn project(&self, spec: &SensitiveSpec, k: usize) -> Result<Self> {
        if spec.num_groups() != self.num_groups {
            return Err(FairError::DimensionMismatch {
                expected: self.num_groups,
                got: spec.num_groups(),
            });
        }
        let levels = spec
            .features()
            .get(k)
            .ok_or_else(|| FairError::Domain(format!("feature index {} out of range", k)))?
            .cardinality;
        let level: Vec<usize> = (0..self.num_groups)
            .map(|g| spec.level_of(g, k))
            .collect::<Result<_>>()?;
        let mut mass = vec![0.0; self.num_points * levels * 2];
        for i in 0..self.num_points {
            for (m, &l) in level.iter().enumerate() {
                for y in 0..2 {
                    mass[(i * levels + l) * 2 + y] += self.mass(i, m, y);
                }
            }
        }
        Ok(Self {
            num_points: self.num_points,
            num_groups: levels,
            mass,
            points: self.points.clone(),
        })
    }
}

/// Marginals of a [`DiscreteJointDistribution`].
///
/// Conditionals on zero-mass events are `None` rather than 0 or NaN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalSet {
    /// `P(X = x_i)`.
    pub p_x: Vec<f64>,
    /// `η(x_i)`.
    pub eta: Vec<Option<f64>>,
    /// `p⁺ = P(Y = 1)`.
    pub p_pos: f64,
    /// `p⁻ = P(Y = 0)`.
    pub p_neg: f64,
    /// `P_S(m)`.
    pub p_s: Vec<f64>,
    /// `P(E_{y,m})`, indexed `[m][y]`.
    pub p_event: Vec<[f64; 2]>,
    /// `P_{Y|S=m}(y)`, indexed `[m][y]`.
    pub p_y_given_s: Vec<Option<[f64; 2]>>,
    /// `P_{S|Y=y}(m)`, indexed `[y][m]`.
    pub p_s_given_y: [Option<Vec<f64>>; 2],
}

impl MarginalSet {
    pub fn of(dist: &DiscreteJointDistribution) -> Self {
        let n = dist.num_points();
        let groups = dist.num_groups();
        let p_x: Vec<f64> = (0..n).map(|i| dist.point_mass(i)).collect();
        let eta = (0..n).map(|i| dist.eta(i)).collect();
        let p_event: Vec<[f64; 2]> = (0..groups)
            .map(|m| [dist.event_mass(m, 0), dist.event_mass(m, 1)])
            .collect();
        Self::from_event_masses(p_x, eta, p_event)
    }

    /// Derives every group marginal from the table `P(E_{y,m})`.
    pub fn from_event_masses(
        p_x: Vec<f64>,
        eta: Vec<Option<f64>>,
        p_event: Vec<[f64; 2]>,
    ) -> Self {
        let p_neg: f64 = p_event.iter().map(|e| e[0]).sum();
        let p_pos: f64 = p_event.iter().map(|e| e[1]).sum();
        let p_s: Vec<f64> = p_event.iter().map(|e| e[0] + e[1]).collect();
        let p_y_given_s = p_event
            .iter()
            .zip(&p_s)
            .map(|(e, &ps)| (ps > 0.0).then(|| [e[0] / ps, e[1] / ps]))
            .collect();
        let by_label = |y: usize, py: f64| {
            (py > 0.0).then(|| p_event.iter().map(|e| e[y] / py).collect::<Vec<_>>())
        };
        let p_s_given_y = [by_label(0, p_neg), by_label(1, p_pos)];
        Self {
            p_x,
            eta,
            p_pos,
            p_neg,
            p_s,
            p_event,
            p_y_given_s,
            p_s_given_y,
        }
    }

    pub fn num_groups(&self) -> usize {
        self.p_s.len()
    }

    pub fn event(&self, m: usize, y: usize) -> f64 {
        self.p_event[m][y]
    }

    /// `P_{Y|S=m}(y)`, or an error when `P(S = m) = 0`.
    pub fn y_given_s(&self, m: usize, y: usize) -> Result<f64> {
        self.p_y_given_s[m]
            .map(|p| p[y])
            .ok_or_else(|| FairError::UndefinedMarginal {
                name: format!("P(Y={}|S={})", y, m + 1),
            })
    }

    /// `P_{S|Y=y}(m)`, or an error when `P(Y = y) = 0`.
    pub fn s_given_y(&self, y: usize, m: usize) -> Result<f64> {
        self.p_s_given_y[y]
            .as_ref()
            .map(|p| p[m])
            .ok_or_else(|| FairError::UndefinedMarginal {
                name: format!("P(S={}|Y={})", m + 1, y),
            })
    }

    /// Whether `E_{y,m}` has positive mass, so it can be conditioned on.
    pub fn event_defined(&self, m: usize, y: usize) -> bool {
        self.p_event[m][y] > 0.0
    }
}

/// Relative frequencies of a dataset as a joint distribution.
///
/// Distinct feature vectors become distinct support points, in order of first
/// appearance. With `grid = Some(w)` every coordinate is first snapped to the
/// nearest multiple of `w`.
pub fn empirical_distribution(
    dataset: &Dataset,
    grid: Option<f64>,
) -> Result<DiscreteJointDistribution> {
    if dataset.is_empty() {
        return domain("empirical distribution of an empty dataset");
    }
    if let Some(w) = grid {
        if !(w > 0.0 && w.is_finite()) {
            return domain(format!("discretization width {} must be positive", w));
        }
    }
    let snap = |x: &[f64]| -> Vec<f64> {
        match grid {
            Some(w) => x.iter().map(|v| (v / w).round() * w + 0.0).collect(),
            None => x.iter().map(|v| v + 0.0).collect(),
        }
    };
    let groups = dataset.num_groups();
    let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut points: Vec<Vec<f64>> = Vec::new();
    let mut counts: Vec<f64> = Vec::new();
    for (sample, &g) in dataset.samples().iter().zip(dataset.groups()) {
        let x = snap(&sample.features);
        let key: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
        let i = *index.entry(key).or_insert_with(|| {
            points.push(x);
            counts.extend(std::iter::repeat_n(0.0, groups * 2));
            points.len() - 1
        });
        counts[(i * groups + g) * 2 + sample.label as usize] += 1.0;
    }
    let total = dataset.len() as f64;
    let mass = counts.into_iter().map(|c| c / total).collect();
    DiscreteJointDistribution::new(points.len(), groups, mass)?.with_points(points)
}

/// A randomized classifier over the support points of a distribution:
/// `accept[i]` is the probability of predicting 1 at `x_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomizedClassifier {
    accept: Vec<f64>,
}

impl RandomizedClassifier {
    pub fn new(accept: Vec<f64>) -> Result<Self> {
        if let Some(p) = accept.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return domain(format!("acceptance probability {} outside [0, 1]", p));
        }
        Ok(Self { accept })
    }

    pub fn constant(num_points: usize, p: f64) -> Result<Self> {
        Self::new(vec![p; num_points])
    }

    /// Deterministic classifier from a bit pattern over the support.
    pub fn from_bits(num_points: usize, bits: u64) -> Self {
        Self {
            accept: (0..num_points)
                .map(|i| ((bits >> i) & 1) as f64)
                .collect(),
        }
    }

    /// `1 - f`.
    pub fn complement(&self) -> Self {
        Self {
            accept: self.accept.iter().map(|p| 1.0 - p).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.accept.len()
    }

    pub fn is_empty(&self) -> bool {
        self.accept.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        self.accept[i]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.accept
    }

    pub(crate) fn check_support(&self, dist: &DiscreteJointDistribution) -> Result<()> {
        if self.accept.len() != dist.num_points() {
            return Err(FairError::DimensionMismatch {
                expected: dist.num_points(),
                got: self.accept.len(),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Sample;
    use crate::fixtures::d1;
    use crate::groups::GroupMode;

    #[test]
    fn uniform_cube_is_symmetric() {
        let d = DiscreteJointDistribution::from_fn(2, 2, |_, _, _| 0.125).unwrap();
        let m = d.marginals();
        assert_eq!(m.p_pos, 0.5);
        assert_eq!(m.p_s[0], 0.5);
        assert!(m.eta.iter().all(|e| *e == Some(0.5)));
    }

    #[test]
    fn d1_marginals() {
        let m = d1().marginals();
        assert!((m.p_pos - 0.5).abs() < 1e-15);
        assert!((m.eta[0].unwrap() - 0.30).abs() < 1e-12);
        assert!((m.eta[1].unwrap() - 0.70).abs() < 1e-12);
        assert!((m.y_given_s(0, 1).unwrap() - 0.6).abs() < 1e-12);
        assert!((m.s_given_y(1, 0).unwrap() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn zero_mass_events_are_flagged() {
        // No mass on (y = 1, s = 2).
        let d = DiscreteJointDistribution::new(1, 2, vec![0.25, 0.25, 0.5, 0.0]).unwrap();
        let m = d.marginals();
        assert_eq!(m.s_given_y(1, 1).unwrap(), 0.0);
        assert!(!m.event_defined(1, 1));
        assert!(m.y_given_s(1, 1).is_ok());
        let d = DiscreteJointDistribution::new(1, 2, vec![0.5, 0.5, 0.0, 0.0]).unwrap();
        assert!(matches!(
            d.marginals().y_given_s(1, 0),
            Err(FairError::UndefinedMarginal { .. })
        ));
    }

    #[test]
    fn invalid_tables_are_rejected() {
        assert!(DiscreteJointDistribution::new(1, 1, vec![0.5, 0.4]).is_err());
        assert!(DiscreteJointDistribution::new(1, 1, vec![1.5, -0.5]).is_err());
        assert!(DiscreteJointDistribution::new(1, 1, vec![1.0]).is_err());
        assert!(RandomizedClassifier::new(vec![1.2]).is_err());
    }

    #[test]
    fn empirical_frequencies() {
        let spec = SensitiveSpec::from_cardinalities(&[2], GroupMode::Intersectional).unwrap();
        let row = |x: f64, y: u8| Sample {
            features: vec![x],
            sensitive: vec![0],
            label: y,
        };
        let same = Dataset::new(spec.clone(), vec![row(1.0, 1); 4]).unwrap();
        let d = empirical_distribution(&same, None).unwrap();
        assert_eq!(d.num_points(), 1);
        assert_eq!(d.point_mass(0), 1.0);

        let two = Dataset::new(spec.clone(), vec![row(1.0, 1), row(2.0, 0)]).unwrap();
        let d = empirical_distribution(&two, None).unwrap();
        assert_eq!(d.num_points(), 2);
        assert_eq!(d.point_mass(0), 0.5);
        assert_eq!(d.point_mass(1), 0.5);

        let snapped = empirical_distribution(&two, Some(10.0)).unwrap();
        assert_eq!(snapped.num_points(), 1);

        let empty = Dataset::new(spec, vec![]).unwrap();
        assert!(empirical_distribution(&empty, None).is_err());
    }

    #[test]
    fn projection_preserves_mass() {
        let spec = SensitiveSpec::from_cardinalities(&[2, 3], GroupMode::Independent).unwrap();
        let d = DiscreteJointDistribution::from_fn(3, 6, |i, m, y| {
            (1 + i + 2 * m + y) as f64 / 270.0
        })
        .unwrap();
        for k in 0..2 {
            let p = d.project(&spec, k).unwrap();
            assert_eq!(p.num_groups(), spec.cardinalities()[k]);
            assert!((p.masses().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for i in 0..3 {
                assert!((p.point_mass(i) - d.point_mass(i)).abs() < 1e-15);
            }
        }
    }
}
