//! Threshold form of the Bayes-optimal fair classifier.
//!
//! With multipliers `λ` the optimal rule accepts `x` when
//! `H(x) = η(x) − c − Σ_m Σ_y b_m^y (λ_m − s·Λ a_m) γ_m^y(x) > 0`, where
//! `Λ = Σ_m λ_m`, `s` is 1 for the mean difference and `δ` for the mean ratio,
//! and `γ_m^y(x) = P(S = m, Y = y | X = x) / P(S = m, Y = y)`.
//!
//! The attribute-aware rule is the same formula with the group posterior
//! replaced by a point mass on the observed group.
//!
//! Under equalized odds the predictive-equality correction defaults to the
//! same shape as the equal-opportunity one ([`EoddsForm::Symmetric`]). The
//! variant that divides it once more by `P(E_{0,m})` is available as
//! [`EoddsForm::Literal`]; it fails the per-point Lagrangian check, see
//! [`resolve_eodds_normalization`](crate::oracle::resolve_eodds_normalization).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientTable;
use crate::distribution::{DiscreteJointDistribution, RandomizedClassifier};
use crate::error::{domain, FairError, Result};
use crate::fairness::{Measure, Notion};
use crate::groups::SensitiveSpec;

/// Scores with `|H| <= TIE_TOLERANCE` count as ties.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// A real multiplier per group; entries may be negative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Multipliers {
    values: Vec<f64>,
    total: f64,
}

impl Multipliers {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return domain(format!("multiplier {} is not finite", v));
        }
        let total = values.iter().sum();
        Ok(Self { values, total })
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            values: vec![0.0; len],
            total: 0.0,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `Λ = Σ_m λ_m`.
    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }
}

impl TryFrom<Vec<f64>> for Multipliers {
    type Error = FairError;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<Multipliers> for Vec<f64> {
    fn from(m: Multipliers) -> Self {
        m.values
    }
}

/// `η(x)` and `P(S = m, Y = y | X = x)` at one input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointPosterior {
    pub eta: f64,
    /// Indexed `[m][y]`.
    pub joint: Vec<[f64; 2]>,
}

impl PointPosterior {
    /// Posterior of an input whose group `s` is observed.
    pub fn aware(eta_given_group: f64, s: usize, num_groups: usize) -> Self {
        let mut joint = vec![[0.0; 2]; num_groups];
        joint[s] = [1.0 - eta_given_group, eta_given_group];
        Self {
            eta: eta_given_group,
            joint,
        }
    }
}

/// Source of `η` and the group posteriors behind `γ`.
pub trait GammaOracle {
    type Input: ?Sized;

    /// `P(E_{y,m})`, indexed `[m][y]`.
    fn event_masses(&self) -> &[[f64; 2]];

    /// Posterior at `x`; attribute-aware oracles need the observed group.
    fn posterior(&self, x: &Self::Input, group: Option<usize>) -> Result<PointPosterior>;

    fn num_groups(&self) -> usize {
        self.event_masses().len()
    }

    /// `γ_m^y(x)`, `None` when `P(E_{y,m}) = 0`.
    fn gamma(&self, x: &Self::Input, group: Option<usize>, m: usize, y: usize) -> Result<Option<f64>> {
        let post = self.posterior(x, group)?;
        let event = self.event_masses()[m][y];
        Ok((event > 0.0).then(|| post.joint[m][y] / event))
    }
}

/// Exact posteriors of a finite distribution, indexed by support point.
#[derive(Debug, Clone)]
pub struct ExactOracle<'a> {
    dist: &'a DiscreteJointDistribution,
    events: Vec<[f64; 2]>,
    aware: bool,
}

impl<'a> ExactOracle<'a> {
    pub fn new(dist: &'a DiscreteJointDistribution) -> Self {
        let events = (0..dist.num_groups())
            .map(|m| [dist.event_mass(m, 0), dist.event_mass(m, 1)])
            .collect();
        Self {
            dist,
            events,
            aware: false,
        }
    }

    /// Oracle for classifiers that observe the group.
    pub fn aware(dist: &'a DiscreteJointDistribution) -> Self {
        Self {
            aware: true,
            ..Self::new(dist)
        }
    }

    pub fn distribution(&self) -> &DiscreteJointDistribution {
        self.dist
    }
}

impl GammaOracle for ExactOracle<'_> {
    type Input = usize;

    fn event_masses(&self) -> &[[f64; 2]] {
        &self.events
    }

    fn posterior(&self, &i: &usize, group: Option<usize>) -> Result<PointPosterior> {
        if i >= self.dist.num_points() {
            return domain(format!("support point {} out of range", i));
        }
        if self.aware {
            let s = group.ok_or_else(|| FairError::Domain("attribute-aware scoring needs the group".into()))?;
            if s >= self.dist.num_groups() {
                return domain(format!("group {} out of range", s + 1));
            }
            let eta = self.dist.eta_given_group(i, s).ok_or_else(|| {
                FairError::Domain(format!("point {} has no mass in group {}", i, s + 1))
            })?;
            return Ok(PointPosterior::aware(eta, s, self.dist.num_groups()));
        }
        let eta = self
            .dist
            .eta(i)
            .ok_or_else(|| FairError::Domain(format!("point {} has zero mass", i)))?;
        let joint = self.dist.group_posterior(i).unwrap_or_default();
        Ok(PointPosterior { eta, joint })
    }
}

/// Normalization of the predictive-equality term under equalized odds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EoddsForm {
    #[default]
    Symmetric,
    Literal,
}

impl EoddsForm {
    pub const ALL: [EoddsForm; 2] = [EoddsForm::Symmetric, EoddsForm::Literal];
}

/// `Σ_m Σ_y b_m^y (λ_m − s·Λ a_m) γ_m^y`, optionally with each term divided
/// once more by `P(E_{y,m})`.
fn weighted_correction(
    joint: &[[f64; 2]],
    events: &[[f64; 2]],
    table: &CoefficientTable,
    lambda: &Multipliers,
    extra_division: bool,
) -> Result<f64> {
    let groups = table.num_groups();
    for len in [lambda.len(), joint.len(), events.len()] {
        if len != groups {
            return Err(FairError::DimensionMismatch {
                expected: groups,
                got: len,
            });
        }
    }
    let included_total: f64 = (0..groups)
        .filter(|&m| table.is_included(m))
        .map(|m| lambda.values()[m])
        .sum();
    let scaled_total = table.population_scale() * included_total;
    let mut sum = 0.0;
    for m in 0..groups {
        let weight = lambda.values()[m] - scaled_total * table.a[m];
        for y in 0..2 {
            let w = table.b[m][y] * weight;
            if w == 0.0 {
                continue;
            }
            let event = events[m][y];
            if event <= 0.0 {
                return Err(FairError::UndefinedGroup {
                    group: m + 1,
                    notion: table.notion.to_string(),
                });
            }
            let gamma = joint[m][y] / event;
            sum += if extra_division { w * gamma / event } else { w * gamma };
        }
    }
    Ok(sum)
}

/// Correction sum `Q(x)` of one constraint set.
pub fn correction(
    post: &PointPosterior,
    events: &[[f64; 2]],
    table: &CoefficientTable,
    lambda: &Multipliers,
) -> Result<f64> {
    weighted_correction(&post.joint, events, table, lambda, false)
}

fn finite(h: f64) -> Result<f64> {
    if h.is_finite() {
        Ok(h)
    } else {
        Err(FairError::NonFiniteScore(h))
    }
}

/// Mean-difference score `H(x)`.
pub fn score_md(
    post: &PointPosterior,
    events: &[[f64; 2]],
    table: &CoefficientTable,
    lambda: &Multipliers,
    c: f64,
) -> Result<f64> {
    if table.measure != Measure::MeanDifference {
        return domain("score_md needs a mean-difference coefficient table");
    }
    finite(post.eta - c - correction(post, events, table, lambda)?)
}

/// Mean-ratio score `H(x)`, at the table's tolerance `δ`.
pub fn score_mr(
    post: &PointPosterior,
    events: &[[f64; 2]],
    table: &CoefficientTable,
    lambda: &Multipliers,
    c: f64,
) -> Result<f64> {
    if table.measure != Measure::MeanRatio {
        return domain("score_mr needs a mean-ratio coefficient table");
    }
    finite(post.eta - c - correction(post, events, table, lambda)?)
}

/// Attribute-aware score `H(x, s)` from `η(x, s) = P(Y = 1 | X = x, S = s)`.
pub fn score_aware(
    eta_given_group: f64,
    s: usize,
    events: &[[f64; 2]],
    table: &CoefficientTable,
    lambda: &Multipliers,
    c: f64,
) -> Result<f64> {
    if s >= table.num_groups() {
        return domain(format!("group {} out of range", s + 1));
    }
    let post = PointPosterior::aware(eta_given_group, s, table.num_groups());
    finite(post.eta - c - correction(&post, events, table, lambda)?)
}

/// Instance costs `(c_0(x), c_1(x)) = (c + Q(x), 1 − c − Q(x))`.
pub fn instance_costs(
    post: &PointPosterior,
    events: &[[f64; 2]],
    table: &CoefficientTable,
    lambda: &Multipliers,
    c: f64,
) -> Result<(f64, f64)> {
    let c0 = c + correction(post, events, table, lambda)?;
    Ok((c0, 1.0 - c0))
}

/// Equalized-odds score with one multiplier vector per component.
#[allow(clippy::too_many_arguments)]
pub fn score_equalized_odds(
    post: &PointPosterior,
    events: &[[f64; 2]],
    eo: &CoefficientTable,
    pe: &CoefficientTable,
    lambda_eo: &Multipliers,
    lambda_pe: &Multipliers,
    c: f64,
    form: EoddsForm,
) -> Result<f64> {
    if eo.notion != Notion::EqualOpportunity || pe.notion != Notion::PredictiveEquality {
        return domain("equalized odds needs an EO table and a PE table");
    }
    let eo_term = weighted_correction(&post.joint, events, eo, lambda_eo, false)?;
    let pe_term = weighted_correction(&post.joint, events, pe, lambda_pe, form == EoddsForm::Literal)?;
    finite(post.eta - c - eo_term - pe_term)
}

/// `P(A_k = l, Y = y | X = x)` from the composite posterior.
pub fn project_joint(joint: &[[f64; 2]], sensitive: &SensitiveSpec, k: usize) -> Result<Vec<[f64; 2]>> {
    if joint.len() != sensitive.num_groups() {
        return Err(FairError::DimensionMismatch {
            expected: sensitive.num_groups(),
            got: joint.len(),
        });
    }
    let levels = sensitive
        .features()
        .get(k)
        .ok_or_else(|| FairError::Domain(format!("feature index {} out of range", k)))?
        .cardinality;
    let mut out = vec![[0.0; 2]; levels];
    for (g, row) in joint.iter().enumerate() {
        let l = sensitive.level_of(g, k)?;
        out[l][0] += row[0];
        out[l][1] += row[1];
    }
    Ok(out)
}

/// Independent-fairness score: one correction per sensitive feature, each
/// over that feature's own groups.
pub fn score_independent(
    post: &PointPosterior,
    events: &[[f64; 2]],
    sensitive: &SensitiveSpec,
    tables: &[CoefficientTable],
    lambdas: &[Multipliers],
    c: f64,
) -> Result<f64> {
    if tables.len() != sensitive.num_features() || lambdas.len() != tables.len() {
        return Err(FairError::DimensionMismatch {
            expected: sensitive.num_features(),
            got: tables.len().min(lambdas.len()),
        });
    }
    let mut h = post.eta - c;
    for (k, (table, lambda)) in tables.iter().zip(lambdas).enumerate() {
        let joint = project_joint(&post.joint, sensitive, k)?;
        let ev = project_joint(events, sensitive, k)?;
        h -= weighted_correction(&joint, &ev, table, lambda, false)?;
    }
    finite(h)
}

/// The correction part of a threshold rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Correction {
    Single {
        table: CoefficientTable,
        lambda: Multipliers,
    },
    EqualizedOdds {
        eo: CoefficientTable,
        pe: CoefficientTable,
        lambda_eo: Multipliers,
        lambda_pe: Multipliers,
        form: EoddsForm,
    },
    Independent {
        sensitive: SensitiveSpec,
        tables: Vec<CoefficientTable>,
        lambdas: Vec<Multipliers>,
    },
}

/// Cost `c` together with a correction; scores any posterior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRule {
    pub c: f64,
    pub correction: Correction,
}

impl ThresholdRule {
    pub fn new(c: f64, correction: Correction) -> Result<Self> {
        if !(0.0..=1.0).contains(&c) {
            return domain(format!("cost {} outside [0, 1]", c));
        }
        Ok(Self { c, correction })
    }

    /// `Q(x)`, so that `H(x) = η(x) − c − Q(x)`.
    pub fn correction_value(&self, post: &PointPosterior, events: &[[f64; 2]]) -> Result<f64> {
        match &self.correction {
            Correction::Single { table, lambda } => correction(post, events, table, lambda),
            Correction::EqualizedOdds {
                eo,
                pe,
                lambda_eo,
                lambda_pe,
                form,
            } => Ok(
                weighted_correction(&post.joint, events, eo, lambda_eo, false)?
                    + weighted_correction(&post.joint, events, pe, lambda_pe, *form == EoddsForm::Literal)?,
            ),
            Correction::Independent {
                sensitive,
                tables,
                lambdas,
            } => Ok(post.eta - self.c - score_independent(post, events, sensitive, tables, lambdas, self.c)?),
        }
    }

    pub fn score(&self, post: &PointPosterior, events: &[[f64; 2]]) -> Result<f64> {
        finite(post.eta - self.c - self.correction_value(post, events)?)
    }

    /// `(c_0(x), c_1(x))`; `η(x) − c_0(x)` is the score.
    pub fn instance_costs(&self, post: &PointPosterior, events: &[[f64; 2]]) -> Result<(f64, f64)> {
        let c0 = self.c + self.correction_value(post, events)?;
        Ok((c0, 1.0 - c0))
    }

    /// All multipliers, flattened in declaration order.
    pub fn lambda_components(&self) -> Vec<f64> {
        match &self.correction {
            Correction::Single { lambda, .. } => lambda.values().to_vec(),
            Correction::EqualizedOdds {
                lambda_eo, lambda_pe, ..
            } => lambda_eo.values().iter().chain(lambda_pe.values()).copied().collect(),
            Correction::Independent { lambdas, .. } => {
                lambdas.iter().flat_map(|l| l.values().iter().copied()).collect()
            }
        }
    }

    pub fn notion(&self) -> Notion {
        match &self.correction {
            Correction::Single { table, .. } => table.notion,
            Correction::EqualizedOdds { .. } => Notion::EqualizedOdds,
            Correction::Independent { tables, .. } => tables[0].notion,
        }
    }

    pub fn measure(&self) -> Measure {
        match &self.correction {
            Correction::Single { table, .. } => table.measure,
            Correction::EqualizedOdds { eo, .. } => eo.measure,
            Correction::Independent { tables, .. } => tables[0].measure,
        }
    }

    pub fn delta(&self) -> f64 {
        match &self.correction {
            Correction::Single { table, .. } => table.delta,
            Correction::EqualizedOdds { eo, .. } => eo.delta,
            Correction::Independent { tables, .. } => tables[0].delta,
        }
    }
}

/// Where a threshold classifier came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub notion: Notion,
    pub measure: Measure,
    pub delta: f64,
    pub lambda: Vec<f64>,
    pub c: f64,
    pub alpha: f64,
}

/// Acceptance probability for score `h`: 1 above zero, 0 below, `α` on ties.
pub fn decide(h: f64, alpha: f64) -> Result<f64> {
    let h = finite(h)?;
    Ok(if h.abs() <= TIE_TOLERANCE {
        alpha
    } else if h > 0.0 {
        1.0
    } else {
        0.0
    })
}

/// `f(x) = 1[H(x) > 0] + α·1[H(x) = 0]`.
#[derive(Debug, Clone)]
pub struct ThresholdClassifier<O> {
    oracle: O,
    rule: ThresholdRule,
    alpha: f64,
}

impl<O: GammaOracle> ThresholdClassifier<O> {
    pub fn new(oracle: O, rule: ThresholdRule, alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return domain(format!("tie parameter {} outside [0, 1]", alpha));
        }
        if oracle.num_groups() == 0 {
            return domain("oracle has no groups");
        }
        Ok(Self { oracle, rule, alpha })
    }

    pub fn rule(&self) -> &ThresholdRule {
        &self.rule
    }

    pub fn oracle(&self) -> &O {
        &self.oracle
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn provenance(&self) -> Provenance {
        Provenance {
            notion: self.rule.notion(),
            measure: self.rule.measure(),
            delta: self.rule.delta(),
            lambda: self.rule.lambda_components(),
            c: self.rule.c,
            alpha: self.alpha,
        }
    }

    pub fn score(&self, x: &O::Input, group: Option<usize>) -> Result<f64> {
        let post = self.oracle.posterior(x, group)?;
        self.rule.score(&post, self.oracle.event_masses())
    }

    pub fn accept_probability(&self, x: &O::Input, group: Option<usize>) -> Result<f64> {
        decide(self.score(x, group)?, self.alpha)
    }

    /// Draws a prediction; randomness is only consumed on ties with `0 < α < 1`.
    pub fn classify<R: Rng + ?Sized>(&self, x: &O::Input, group: Option<usize>, rng: &mut R) -> Result<u8> {
        let p = self.accept_probability(x, group)?;
        Ok(if p >= 1.0 {
            1
        } else if p <= 0.0 {
            0
        } else {
            rng.random_bool(p) as u8
        })
    }
}

impl ThresholdClassifier<ExactOracle<'_>> {
    /// Acceptance probabilities over the whole support (attribute-blind).
    pub fn to_randomized(&self) -> Result<RandomizedClassifier> {
        let dist = self.oracle.distribution();
        let accept = (0..dist.num_points())
            .map(|i| {
                if dist.point_mass(i) > 0.0 {
                    self.accept_probability(&i, None)
                } else {
                    Ok(0.0)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        RandomizedClassifier::new(accept)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::coefficients;
    use crate::fixtures::{arb_distribution, d1};
    use crate::measures::lagrangian;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn table(d: &DiscreteJointDistribution, notion: Notion, measure: Measure, delta: f64) -> CoefficientTable {
        coefficients(notion, measure, delta, &d.marginals()).unwrap()
    }

    /// Per-point change of the Lagrangian when `f(x_i)` flips from 0 to 1.
    fn lagrangian_step(
        d: &DiscreteJointDistribution,
        c: f64,
        terms: &[(&CoefficientTable, &Multipliers)],
        i: usize,
    ) -> f64 {
        let mut on = vec![0.0; d.num_points()];
        on[i] = 1.0;
        let off = vec![0.0; d.num_points()];
        let l1 = lagrangian(&RandomizedClassifier::new(on).unwrap(), d, c, terms).unwrap();
        let l0 = lagrangian(&RandomizedClassifier::new(off).unwrap(), d, c, terms).unwrap();
        l1 - l0
    }

    #[test]
    fn zero_multipliers_give_plain_threshold() {
        let d = d1();
        let oracle = ExactOracle::new(&d);
        let t = table(&d, Notion::DemographicParity, Measure::MeanDifference, 0.1);
        let zero = Multipliers::zeros(2);
        for i in 0..2 {
            let post = oracle.posterior(&i, None).unwrap();
            let h = score_md(&post, oracle.event_masses(), &t, &zero, 0.5).unwrap();
            assert_eq!(h, post.eta - 0.5);
            assert_eq!(instance_costs(&post, oracle.event_masses(), &t, &zero, 0.5).unwrap(), (0.5, 0.5));
        }
    }

    #[test]
    fn single_group_has_no_correction() {
        let d = DiscreteJointDistribution::new(2, 1, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let oracle = ExactOracle::new(&d);
        let t = table(&d, Notion::AccuracyParity, Measure::MeanDifference, 0.1);
        let lambda = Multipliers::new(vec![0.7]).unwrap();
        for i in 0..2 {
            let post = oracle.posterior(&i, None).unwrap();
            let h = score_md(&post, oracle.event_masses(), &t, &lambda, 0.4).unwrap();
            assert!((h - (post.eta - 0.4)).abs() < 1e-15);
        }
    }

    #[test]
    fn d1_scores_match_lagrangian_integrand() {
        let d = d1();
        let oracle = ExactOracle::new(&d);
        let cases = [
            (Measure::MeanDifference, 1.0, vec![0.2, -0.1]),
            (Measure::MeanRatio, 0.8, vec![0.3, 0.0]),
        ];
        for (measure, delta, lambda) in cases {
            let t = table(&d, Notion::DemographicParity, measure, delta);
            let lambda = Multipliers::new(lambda).unwrap();
            for i in 0..2 {
                let post = oracle.posterior(&i, None).unwrap();
                let h = match measure {
                    Measure::MeanDifference => score_md(&post, oracle.event_masses(), &t, &lambda, 0.5),
                    Measure::MeanRatio => score_mr(&post, oracle.event_masses(), &t, &lambda, 0.5),
                }
                .unwrap();
                let step = lagrangian_step(&d, 0.5, &[(&t, &lambda)], i);
                assert!((step + h * d.point_mass(i)).abs() < 1e-12);
                let (c0, c1) = instance_costs(&post, oracle.event_masses(), &t, &lambda, 0.5).unwrap();
                assert!((post.eta - c0 - h).abs() < 1e-12);
                assert!((c0 + c1 - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn mean_ratio_at_unit_tolerance_matches_mean_difference() {
        let d = d1();
        let oracle = ExactOracle::new(&d);
        let md = table(&d, Notion::EqualOpportunity, Measure::MeanDifference, 1.0);
        let mr = table(&d, Notion::EqualOpportunity, Measure::MeanRatio, 1.0);
        let lambda = Multipliers::new(vec![0.4, -0.3]).unwrap();
        for i in 0..2 {
            let post = oracle.posterior(&i, None).unwrap();
            let a = score_md(&post, oracle.event_masses(), &md, &lambda, 0.3).unwrap();
            let b = score_mr(&post, oracle.event_masses(), &mr, &lambda, 0.3).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn gamma_is_normalized() {
        let d = d1();
        let oracle = ExactOracle::new(&d);
        for i in 0..2 {
            let mut total = 0.0;
            for m in 0..2 {
                for y in 0..2 {
                    total += oracle.gamma(&i, None, m, y).unwrap().unwrap() * oracle.event_masses()[m][y];
                }
            }
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn equalized_odds_on_d1() {
        let d = d1();
        let oracle = ExactOracle::new(&d);
        let eo = table(&d, Notion::EqualOpportunity, Measure::MeanDifference, 0.1);
        let pe = table(&d, Notion::PredictiveEquality, Measure::MeanDifference, 0.1);
        let l_eo = Multipliers::new(vec![0.1, 0.0]).unwrap();
        let l_pe = Multipliers::new(vec![0.0, 0.1]).unwrap();
        let zero = Multipliers::zeros(2);
        for i in 0..2 {
            let post = oracle.posterior(&i, None).unwrap();
            let ev = oracle.event_masses();
            let h = score_equalized_odds(&post, ev, &eo, &pe, &l_eo, &l_pe, 0.5, EoddsForm::Symmetric).unwrap();
            let step = lagrangian_step(&d, 0.5, &[(&eo, &l_eo), (&pe, &l_pe)], i);
            assert!((step + h * d.point_mass(i)).abs() < 1e-12);

            let plain = score_md(&post, ev, &eo, &l_eo, 0.5).unwrap();
            for form in EoddsForm::ALL {
                let h = score_equalized_odds(&post, ev, &eo, &pe, &l_eo, &zero, 0.5, form).unwrap();
                assert_eq!(h, plain);
            }
        }
    }

    #[test]
    fn aware_score_uses_only_own_group() {
        let d = d1();
        let t = table(&d, Notion::DemographicParity, Measure::MeanDifference, 0.1);
        let ev: Vec<[f64; 2]> = (0..2).map(|m| [d.event_mass(m, 0), d.event_mass(m, 1)]).collect();
        let lambda = Multipliers::new(vec![0.3, -0.2]).unwrap();
        let zero = Multipliers::zeros(2);
        assert_eq!(score_aware(0.6, 1, &ev, &t, &zero, 0.5).unwrap(), 0.6 - 0.5);
        // Demographic parity: b/P(E) = 1/P_S(s), so the threshold does not depend on η.
        for s in 0..2 {
            let h1 = score_aware(0.2, s, &ev, &t, &lambda, 0.5).unwrap();
            let h2 = score_aware(0.9, s, &ev, &t, &lambda, 0.5).unwrap();
            assert!(((h2 - h1) - 0.7).abs() < 1e-12);
        }
    }

    #[test]
    fn classify_ties_and_signs() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(decide(0.3, 0.5).unwrap(), 1.0);
        assert_eq!(decide(-0.3, 0.5).unwrap(), 0.0);
        assert_eq!(decide(0.0, 0.0).unwrap(), 0.0);
        assert_eq!(decide(1e-13, 1.0).unwrap(), 1.0);
        assert!(matches!(decide(f64::NAN, 0.0), Err(FairError::NonFiniteScore(_))));

        let d = d1();
        let t = table(&d, Notion::DemographicParity, Measure::MeanDifference, 0.1);
        let rule = ThresholdRule::new(
            0.3,
            Correction::Single {
                table: t,
                lambda: Multipliers::zeros(2),
            },
        )
        .unwrap();
        let clf = ThresholdClassifier::new(ExactOracle::new(&d), rule, 0.0).unwrap();
        // η(x0) = 0.3 = c is an exact tie.
        assert_eq!(clf.classify(&0, None, &mut rng).unwrap(), 0);
        assert_eq!(clf.classify(&1, None, &mut rng).unwrap(), 1);
        assert!(ThresholdClassifier::new(ExactOracle::new(&d), clf.rule().clone(), 1.5).is_err());
    }

    #[test]
    fn multipliers_round_trip() {
        let m = Multipliers::new(vec![0.5, -0.25]).unwrap();
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(json, "[0.5,-0.25]");
        let back: Multipliers = serde_json::from_str(&json).unwrap();
        assert_eq!(back.total(), 0.25);
        assert!(Multipliers::new(vec![f64::INFINITY]).is_err());
    }

    fn arb_case() -> impl Strategy<Value = (DiscreteJointDistribution, Vec<f64>, f64, f64)> {
        arb_distribution(6, 3).prop_flat_map(|d| {
            let g = d.num_groups();
            (Just(d), prop::collection::vec(-1.0f64..1.0, g), 0.0f64..=1.0, 0.0f64..=1.0)
        })
    }

    proptest! {
        #[test]
        fn score_is_lagrangian_step((d, lambda, c, delta) in arb_case()) {
            let oracle = ExactOracle::new(&d);
            let lambda = Multipliers::new(lambda).unwrap();
            for notion in Notion::ELEMENTARY {
                for measure in Measure::ALL {
                    let t = table(&d, notion, measure, delta);
                    for i in 0..d.num_points() {
                        let post = oracle.posterior(&i, None).unwrap();
                        let h = ThresholdRule::new(c, Correction::Single { table: t.clone(), lambda: lambda.clone() })
                            .unwrap()
                            .score(&post, oracle.event_masses())
                            .unwrap();
                        let step = lagrangian_step(&d, c, &[(&t, &lambda)], i);
                        prop_assert!((step + h * d.point_mass(i)).abs() < 1e-10);
                        let (c0, _) = instance_costs(&post, oracle.event_masses(), &t, &lambda, c).unwrap();
                        if h.abs() > TIE_TOLERANCE {
                            prop_assert_eq!((post.eta - c0).signum(), h.signum());
                        }
                    }
                }
            }
        }

        #[test]
        fn gamma_normalization((d, _l, _c, _delta) in arb_case()) {
            let oracle = ExactOracle::new(&d);
            for i in 0..d.num_points() {
                let post = oracle.posterior(&i, None).unwrap();
                let total: f64 = post.joint.iter().flatten().sum();
                prop_assert!((total - 1.0).abs() < 1e-12);
            }
        }
    }
}
