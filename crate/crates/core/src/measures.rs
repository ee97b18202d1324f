//! Exact and empirical fairness measures, their linear forms, and risks.
//!
//! For accuracy parity the relevant event is the error `{Ŷ ≠ Y}`; with a
//! randomized classifier its probability is `E[f·1[Y=0] + (1−f)·1[Y=1]]`.

use serde::{Deserialize, Serialize};

use crate::bayes::{instance_costs, ExactOracle, GammaOracle, Multipliers};
use crate::coefficients::{coefficients, CoefficientTable};
use crate::data::Dataset;
use crate::distribution::{DiscreteJointDistribution, RandomizedClassifier};
use crate::error::{domain, FairError, Result};
use crate::fairness::{FairnessSpec, Measure, Notion};
use crate::groups::SensitiveSpec;

/// `P(Ŷ = 1 | E_{y,m})` for every group; `None` where `E_{y,m}` has zero mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRateTable {
    /// Indexed `[m][y]`.
    pub rate: Vec<[Option<f64>; 2]>,
}

impl GroupRateTable {
    pub fn get(&self, y: usize, m: usize) -> Option<f64> {
        self.rate[m][y]
    }
}

pub fn group_rates(f: &RandomizedClassifier, dist: &DiscreteJointDistribution) -> Result<GroupRateTable> {
    f.check_support(dist)?;
    let rate = (0..dist.num_groups())
        .map(|m| {
            let mut out = [None; 2];
            for (y, slot) in out.iter_mut().enumerate() {
                let event = dist.event_mass(m, y);
                if event > 0.0 {
                    let hit: f64 = (0..dist.num_points())
                        .map(|i| f.get(i) * dist.mass(i, m, y))
                        .sum();
                    *slot = Some(hit / event);
                }
            }
            out
        })
        .collect();
    Ok(GroupRateTable { rate })
}

/// Probability of the notion's event restricted to group `m` (or to everyone
/// when `m` is `None`): returns `(P(G, Z=z, ·), P(Z=z, ·))`.
fn joint_and_conditioning(
    f: &RandomizedClassifier,
    dist: &DiscreteJointDistribution,
    notion: Notion,
    group: Option<usize>,
) -> Result<(f64, f64)> {
    let groups: Vec<usize> = match group {
        Some(m) => vec![m],
        None => (0..dist.num_groups()).collect(),
    };
    let mut hit = 0.0;
    let mut cond = 0.0;
    for i in 0..dist.num_points() {
        let p = f.get(i);
        for &m in &groups {
            let (neg, pos) = (dist.mass(i, m, 0), dist.mass(i, m, 1));
            match notion {
                Notion::DemographicParity => {
                    hit += p * (neg + pos);
                    cond += neg + pos;
                }
                Notion::EqualOpportunity => {
                    hit += p * pos;
                    cond += pos;
                }
                Notion::PredictiveEquality => {
                    hit += p * neg;
                    cond += neg;
                }
                Notion::AccuracyParity => {
                    hit += p * neg + (1.0 - p) * pos;
                    cond += neg + pos;
                }
                Notion::EqualizedOdds => {
                    return domain("EqualizedOdds is evaluated through its EO and PE components")
                }
            }
        }
    }
    Ok((hit, cond))
}

/// `(P(G | Z = z), P(G | Z = z, S = m))` for notion's event `G`.
pub fn event_probabilities(
    f: &RandomizedClassifier,
    dist: &DiscreteJointDistribution,
    notion: Notion,
    m: usize,
) -> Result<(f64, f64)> {
    f.check_support(dist)?;
    if m >= dist.num_groups() {
        return domain(format!("group {} out of range", m + 1));
    }
    let (hit, cond) = joint_and_conditioning(f, dist, notion, None)?;
    if cond <= 0.0 {
        return Err(FairError::UndefinedMarginal {
            name: format!("conditioning event of {}", notion),
        });
    }
    let (g_hit, g_cond) = joint_and_conditioning(f, dist, notion, Some(m))?;
    if g_cond <= 0.0 {
        return Err(FairError::UndefinedGroup {
            group: m + 1,
            notion: notion.to_string(),
        });
    }
    Ok((hit / cond, g_hit / g_cond))
}

/// `MD_m(f) = P(G | Z = z) − P(G | Z = z, S = m)`.
pub fn md_group(
    f: &RandomizedClassifier,
    dist: &DiscreteJointDistribution,
    notion: Notion,
    m: usize,
) -> Result<f64> {
    let (overall, group) = event_probabilities(f, dist, notion, m)?;
    Ok(overall - group)
}

/// `MR_m(f) = P(G | Z = z, S = m) / P(G | Z = z)`.
///
/// A zero denominator gives 1 when the numerator is also zero, and 0 (a
/// violation for any positive tolerance) otherwise.
pub fn mr_group(
    f: &RandomizedClassifier,
    dist: &DiscreteJointDistribution,
    notion: Notion,
    m: usize,
) -> Result<f64> {
    let (overall, group) = event_probabilities(f, dist, notion, m)?;
    Ok(ratio(group, overall))
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else if num == 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Per-group measure values for `f` and for `1 − f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupValue {
    /// One-based group index.
    pub group: usize,
    pub value: f64,
    pub complement_value: f64,
}

/// Symmetrized fairness measure of a classifier.
///
/// For a composite notion `groups` is empty and `components` holds one report
/// per elementary notion; `value` is then the worst component value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub notion: Notion,
    pub measure: Measure,
    pub delta: f64,
    pub value: f64,
    pub satisfied: bool,
    pub groups: Vec<GroupValue>,
    /// One-based indices of groups left out for lack of mass.
    pub excluded: Vec<usize>,
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub components: Vec<FairnessReport>,
}

impl FairnessReport {
    /// Value of one elementary notion inside this report.
    pub fn component_value(&self, notion: Notion) -> Option<f64> {
        if self.notion == notion {
            return Some(self.value);
        }
        self.components
            .iter()
            .find(|c| c.notion == notion)
            .map(|c| c.value)
    }
}

/// `MD(f) = max_m max(MD_m(f), MD_m(1−f))` or `MR(f) = min_m min(MR_m(f), MR_m(1−f))`.
pub fn symmetrized(
    f: &RandomizedClassifier,
    dist: &DiscreteJointDistribution,
    spec: &FairnessSpec,
) -> Result<FairnessReport> {
    if spec.notion.is_composite() {
        let components = spec
            .notion
            .components()
            .into_iter()
            .map(|notion| symmetrized(f, dist, &FairnessSpec { notion, ..*spec }))
            .collect::<Result<Vec<_>>>()?;
        return Ok(combine(spec, components));
    }
    f.check_support(dist)?;
    let complement = f.complement();
    let mut groups = Vec::new();
    let mut excluded = Vec::new();
    let mut warnings = Vec::new();
    for m in 0..dist.num_groups() {
        let pair = |g: &RandomizedClassifier| -> Result<f64> {
            let (overall, group) = event_probabilities(g, dist, spec.notion, m)?;
            Ok(match spec.measure {
                Measure::MeanDifference => overall - group,
                Measure::MeanRatio => ratio(group, overall),
            })
        };
        match (pair(f), pair(&complement)) {
            (Ok(value), Ok(complement_value)) => groups.push(GroupValue {
                group: m + 1,
                value,
                complement_value,
            }),
            (Err(FairError::UndefinedGroup { .. }), _) => {
                let msg = format!(
                    "group {} excluded from {}: conditioning event has zero mass",
                    m + 1,
                    spec.notion
                );
                log::warn!("{}", msg);
                warnings.push(msg);
                excluded.push(m + 1);
            }
            (Err(e), _) | (_, Err(e)) => return Err(e),
        }
    }
    Ok(finish(spec, groups, excluded, warnings))
}

fn finish(
    spec: &FairnessSpec,
    groups: Vec<GroupValue>,
    excluded: Vec<usize>,
    warnings: Vec<String>,
) -> FairnessReport {
    let values = groups.iter().flat_map(|g| [g.value, g.complement_value]);
    let value = match spec.measure {
        Measure::MeanDifference => values.fold(0.0, f64::max),
        Measure::MeanRatio => values.fold(1.0, f64::min),
    };
    FairnessReport {
        notion: spec.notion,
        measure: spec.measure,
        delta: spec.delta,
        value,
        satisfied: spec.satisfied_by(value),
        groups,
        excluded,
        warnings,
        components: Vec::new(),
    }
}

fn combine(spec: &FairnessSpec, components: Vec<FairnessReport>) -> FairnessReport {
    let values = components.iter().map(|c| c.value);
    let value = match spec.measure {
        Measure::MeanDifference => values.fold(0.0, f64::max),
        Measure::MeanRatio => values.fold(1.0, f64::min),
    };
    FairnessReport {
        notion: spec.notion,
        measure: spec.measure,
        delta: spec.delta,
        value,
        satisfied: components.iter().all(|c| c.satisfied),
        groups: Vec::new(),
        excluded: Vec::new(),
        warnings: components.iter().flat_map(|c| c.warnings.clone()).collect(),
        components,
    }
}

/// One report per sensitive feature, each over that feature's levels.
pub fn independent_reports(
    f: &RandomizedClassifier,
    dist: &DiscreteJointDistribution,
    sensitive: &SensitiveSpec,
    spec: &FairnessSpec,
) -> Result<Vec<FairnessReport>> {
    (0..sensitive.num_features())
        .map(|k| symmetrized(f, &dist.project(sensitive, k)?, spec))
        .collect()
}

/// Linear form of group `m` from precomputed rates.
///
/// Terms with a zero coefficient are skipped, so rates of empty events are
/// only needed where they actually contribute.
pub fn linear_form(rates: &GroupRateTable, table: &CoefficientTable, m: usize) -> Result<f64> {
    if m >= table.num_groups() {
        return domain(format!("group {} out of range", m + 1));
    }
    if !table.is_included(m) {
        return Err(FairError::UndefinedGroup {
            group: m + 1,
            notion: table.notion.to_string(),
        });
    }
    let rate = |y: usize, g: usize| -> Result<f64> {
        rates.get(y, g).ok_or_else(|| FairError::UndefinedGroup {
            group: g + 1,
            notion: table.notion.to_string(),
        })
    };
    let scale = table.population_scale();
    let mut total = 0.0;
    for y in 0..2 {
        let mut population = 0.0;
        for g in 0..table.num_groups() {
            let w = table.a[g] * table.b[g][y];
            if w != 0.0 {
                population += w * rate(y, g)?;
            }
        }
        let own = if table.b[m][y] != 0.0 {
            table.b[m][y] * rate(y, m)?
        } else {
            0.0
        };
        total += scale * population - own + table.c[m][y];
    }
    Ok(total)
}

/// Mean-difference linear form `R^MD_m(f)`; equals `MD_m(f)`.
pub fn r_md(
    f: &RandomizedClassifier,
    dist: &DiscreteJointDistribution,
    table: &CoefficientTable,
    m: usize,
) -> Result<f64> {
    if table.measure != Measure::MeanDifference {
        return domain("r_md needs a mean-difference coefficient table");
    }
    linear_form(&group_rates(f, dist)?, table, m)
}

/// Mean-ratio linear form `R^MR_m(f)` at the table's tolerance; equals
/// `δ P(G | Z = z) − P(G | Z = z, S = m)`.
pub fn r_mr(
    f: &RandomizedClassifier,
    dist: &DiscreteJointDistribution,
    table: &CoefficientTable,
    m: usize,
) -> Result<f64> {
    if table.measure != Measure::MeanRatio {
        return domain("r_mr needs a mean-ratio coefficient table");
    }
    linear_form(&group_rates(f, dist)?, table, m)
}

/// Whether every included group's linear form lies in the measure's interval.
pub fn linear_forms_satisfied(
    f: &RandomizedClassifier,
    dist: &DiscreteJointDistribution,
    table: &CoefficientTable,
    slack: f64,
) -> Result<bool> {
    let rates = group_rates(f, dist)?;
    let (lo, hi) = table.measure.linear_bounds(table.delta);
    for m in (0..table.num_groups()).filter(|&m| table.is_included(m)) {
        let r = linear_form(&rates, table, m)?;
        if r < lo - slack || r > hi + slack {
            return Ok(false);
        }
    }
    Ok(true)
}

fn check_cost(c: f64) -> Result<()> {
    if (0.0..=1.0).contains(&c) {
        Ok(())
    } else {
        domain(format!("cost {} outside [0, 1]", c))
    }
}

/// `R_cs(f; c) = (1−c) P(Ŷ=0, Y=1) + c P(Ŷ=1, Y=0)`.
pub fn cs_risk(f: &RandomizedClassifier, dist: &DiscreteJointDistribution, c: f64) -> Result<f64> {
    check_cost(c)?;
    f.check_support(dist)?;
    Ok((0..dist.num_points())
        .map(|i| {
            let p = f.get(i);
            (1.0 - c) * (1.0 - p) * dist.point_label_mass(i, 1) + c * p * dist.point_label_mass(i, 0)
        })
        .sum())
}

/// The same risk as `(1−c) p⁺ + E[(c − η(X)) f(X)]`.
pub fn cs_risk_via_eta(
    f: &RandomizedClassifier,
    dist: &DiscreteJointDistribution,
    c: f64,
) -> Result<f64> {
    check_cost(c)?;
    f.check_support(dist)?;
    let marg = dist.marginals();
    let mut risk = (1.0 - c) * marg.p_pos;
    for i in 0..dist.num_points() {
        if let Some(eta) = marg.eta[i] {
            risk += (c - eta) * f.get(i) * marg.p_x[i];
        }
    }
    Ok(risk)
}

/// Fair cost-sensitive risk `Σ_x [c_0^λ(x) f(x) P(x, Y=0) + c_1^λ(x) (1−f(x)) P(x, Y=1)]`.
pub fn fair_cs_risk(
    f: &RandomizedClassifier,
    dist: &DiscreteJointDistribution,
    lambda: &Multipliers,
    c: f64,
    spec: &FairnessSpec,
) -> Result<f64> {
    check_cost(c)?;
    f.check_support(dist)?;
    let table = coefficients(spec.notion, spec.measure, spec.delta, &dist.marginals())?;
    let oracle = ExactOracle::new(dist);
    let mut risk = 0.0;
    for i in 0..dist.num_points() {
        if dist.point_mass(i) <= 0.0 {
            continue;
        }
        let post = oracle.posterior(&i, None)?;
        let (c0, c1) = instance_costs(&post, oracle.event_masses(), &table, lambda, c)?;
        let p = f.get(i);
        risk += c0 * p * dist.point_label_mass(i, 0) + c1 * (1.0 - p) * dist.point_label_mass(i, 1);
    }
    Ok(risk)
}

/// Lagrangian `R_cs(f; c) − Σ_m λ_m R_m(f)` over one or more constraint sets.
pub fn lagrangian(
    f: &RandomizedClassifier,
    dist: &DiscreteJointDistribution,
    c: f64,
    terms: &[(&CoefficientTable, &Multipliers)],
) -> Result<f64> {
    let mut value = cs_risk(f, dist, c)?;
    let rates = group_rates(f, dist)?;
    for (table, lambda) in terms {
        if lambda.len() != table.num_groups() {
            return Err(FairError::DimensionMismatch {
                expected: table.num_groups(),
                got: lambda.len(),
            });
        }
        for m in (0..table.num_groups()).filter(|&m| table.is_included(m)) {
            value -= lambda.values()[m] * linear_form(&rates, table, m)?;
        }
    }
    Ok(value)
}

/// Fairness report of per-row acceptance probabilities on a dataset.
///
/// Rows are folded into a two-point law (accept / reject) whose masses are the
/// expected empirical frequencies, so the exact formulas apply unchanged.
pub fn empirical_report(
    predictions: &[f64],
    dataset: &Dataset,
    spec: &FairnessSpec,
) -> Result<FairnessReport> {
    let (dist, f) = prediction_law(predictions, dataset)?;
    symmetrized(&f, &dist, spec)
}

/// Per-feature empirical reports in independent mode.
pub fn empirical_independent_reports(
    predictions: &[f64],
    dataset: &Dataset,
    spec: &FairnessSpec,
) -> Result<Vec<FairnessReport>> {
    let (dist, f) = prediction_law(predictions, dataset)?;
    independent_reports(&f, &dist, dataset.spec(), spec)
}

/// Empirical cost-sensitive risk and accuracy of per-row acceptance probabilities.
pub fn empirical_risk(predictions: &[f64], dataset: &Dataset, c: f64) -> Result<(f64, f64)> {
    check_cost(c)?;
    let (dist, f) = prediction_law(predictions, dataset)?;
    let risk = cs_risk(&f, &dist, c)?;
    let error = cs_risk(&f, &dist, 0.5)? * 2.0;
    Ok((risk, 1.0 - error))
}

fn prediction_law(
    predictions: &[f64],
    dataset: &Dataset,
) -> Result<(DiscreteJointDistribution, RandomizedClassifier)> {
    if dataset.is_empty() {
        return domain("empirical measures of an empty dataset");
    }
    if predictions.len() != dataset.len() {
        return Err(FairError::DimensionMismatch {
            expected: dataset.len(),
            got: predictions.len(),
        });
    }
    if let Some(p) = predictions.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return domain(format!("prediction {} outside [0, 1]", p));
    }
    let groups = dataset.num_groups();
    let mut mass = vec![0.0; 2 * groups * 2];
    let n = dataset.len() as f64;
    for ((p, &g), s) in predictions.iter().zip(dataset.groups()).zip(dataset.samples()) {
        let y = s.label as usize;
        mass[g * 2 + y] += p / n;
        mass[(groups + g) * 2 + y] += (1.0 - p) / n;
    }
    let total: f64 = mass.iter().sum();
    mass.iter_mut().for_each(|v| *v /= total);
    let dist = DiscreteJointDistribution::new(2, groups, mass)?;
    Ok((dist, RandomizedClassifier::new(vec![1.0, 0.0])?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Sample;
    use crate::fixtures::{arb_distribution, d1};
    use crate::groups::GroupMode;
    use proptest::prelude::*;

    fn first_point() -> RandomizedClassifier {
        RandomizedClassifier::new(vec![1.0, 0.0]).unwrap()
    }

    fn dp_md(delta: f64) -> FairnessSpec {
        FairnessSpec::new(Notion::DemographicParity, Measure::MeanDifference, delta).unwrap()
    }

    #[test]
    fn constant_rates() {
        let d = d1();
        for (p, expect) in [(1.0, 1.0), (0.0, 0.0)] {
            let r = group_rates(&RandomizedClassifier::constant(2, p).unwrap(), &d).unwrap();
            assert!(r.rate.iter().flatten().all(|v| *v == Some(expect)));
        }
    }

    #[test]
    fn d1_rates() {
        let r = group_rates(&first_point(), &d1()).unwrap();
        assert!((r.get(1, 0).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert!((r.get(0, 1).unwrap() - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn d1_demographic_parity_is_balanced() {
        // P(x0 | S = m) = 0.5 for both groups, so accepting x0 alone is fair.
        let d = d1();
        let f = first_point();
        let md = md_group(&f, &d, Notion::DemographicParity, 0).unwrap();
        assert!(md.abs() < 1e-12);
        let mr = mr_group(&f, &d, Notion::DemographicParity, 0).unwrap();
        assert!((mr - 1.0).abs() < 1e-12);
        let report = symmetrized(&f, &d, &dp_md(0.05)).unwrap();
        assert!(report.value.abs() < 1e-12 && report.satisfied);

        let mr_table = coefficients(Notion::DemographicParity, Measure::MeanRatio, 0.8, &d.marginals()).unwrap();
        assert!((r_mr(&f, &d, &mr_table, 0).unwrap() - (0.8 * 0.5 - 0.5)).abs() < 1e-12);
    }

    #[test]
    fn d1_equal_opportunity_gap() {
        // TPR overall 0.15/0.5 = 0.3; group 1: 0.10/0.30.
        let d = d1();
        let md = md_group(&first_point(), &d, Notion::EqualOpportunity, 0).unwrap();
        assert!((md - (0.3 - 1.0 / 3.0)).abs() < 1e-12);
        let table = coefficients(Notion::EqualOpportunity, Measure::MeanDifference, 0.1, &d.marginals()).unwrap();
        assert!((r_md(&first_point(), &d, &table, 0).unwrap() - md).abs() < 1e-12);
    }

    #[test]
    fn constant_classifiers_are_fair() {
        let d = d1();
        for notion in [Notion::DemographicParity, Notion::EqualOpportunity, Notion::PredictiveEquality] {
            for p in [0.0, 0.3, 1.0] {
                let f = RandomizedClassifier::constant(2, p).unwrap();
                for m in 0..2 {
                    assert!(md_group(&f, &d, notion, m).unwrap().abs() < 1e-12);
                }
            }
        }
        let one = RandomizedClassifier::constant(2, 1.0).unwrap();
        let spec = FairnessSpec::new(Notion::DemographicParity, Measure::MeanRatio, 1.0).unwrap();
        let report = symmetrized(&one, &d, &spec).unwrap();
        assert_eq!(report.value, 1.0);
        assert!(report.satisfied);
    }

    #[test]
    fn single_group_is_degenerate() {
        let d = DiscreteJointDistribution::new(2, 1, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let f = RandomizedClassifier::new(vec![0.9, 0.2]).unwrap();
        for notion in Notion::ELEMENTARY {
            assert!(md_group(&f, &d, notion, 0).unwrap().abs() < 1e-12);
            assert!((mr_group(&f, &d, notion, 0).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn mean_ratio_zero_denominator() {
        let d = d1();
        let zero = RandomizedClassifier::constant(2, 0.0).unwrap();
        assert_eq!(mr_group(&zero, &d, Notion::DemographicParity, 0).unwrap(), 1.0);
        assert_eq!(ratio(0.2, 0.0), 0.0);
    }

    #[test]
    fn zero_delta_mean_ratio_form() {
        let d = d1();
        let table = coefficients(Notion::DemographicParity, Measure::MeanRatio, 0.0, &d.marginals()).unwrap();
        let f = RandomizedClassifier::new(vec![0.3, 0.8]).unwrap();
        let (_, group) = event_probabilities(&f, &d, Notion::DemographicParity, 1).unwrap();
        let r = r_mr(&f, &d, &table, 1).unwrap();
        assert!((r + group).abs() < 1e-12);
        assert!((-1.0..=0.0).contains(&r));
    }

    #[test]
    fn empty_group_is_excluded() {
        let d = DiscreteJointDistribution::new(1, 3, vec![0.25, 0.25, 0.0, 0.0, 0.25, 0.25]).unwrap();
        let f = RandomizedClassifier::new(vec![0.5]).unwrap();
        let report = symmetrized(&f, &d, &dp_md(0.1)).unwrap();
        assert_eq!(report.excluded, vec![2]);
        assert_eq!(report.groups.len(), 2);
    }

    #[test]
    fn cost_sensitive_risk_values() {
        let d = d1();
        let one = RandomizedClassifier::constant(2, 1.0).unwrap();
        let zero = RandomizedClassifier::constant(2, 0.0).unwrap();
        assert!((cs_risk(&one, &d, 0.3).unwrap() - 0.3 * 0.5).abs() < 1e-12);
        assert!((cs_risk(&zero, &d, 0.3).unwrap() - 0.7 * 0.5).abs() < 1e-12);
        let second = RandomizedClassifier::new(vec![0.0, 1.0]).unwrap();
        assert!((cs_risk(&second, &d, 0.5).unwrap() - 0.15).abs() < 1e-12);
        assert!(cs_risk(&second, &d, 1.5).is_err());
    }

    #[test]
    fn fair_risk_reduces_to_plain_risk_at_zero_lambda() {
        let d = d1();
        let f = RandomizedClassifier::new(vec![0.2, 0.9]).unwrap();
        let zero = Multipliers::zeros(2);
        let fair = fair_cs_risk(&f, &d, &zero, 0.4, &dp_md(0.1)).unwrap();
        assert!((fair - cs_risk(&f, &d, 0.4).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn fair_risk_matches_lagrangian_up_to_constant() {
        let d = d1();
        let spec = dp_md(0.1);
        let lambda = Multipliers::new(vec![0.2, -0.1]).unwrap();
        let table = coefficients(spec.notion, spec.measure, spec.delta, &d.marginals()).unwrap();
        let gap = |f: &RandomizedClassifier| {
            fair_cs_risk(f, &d, &lambda, 0.5, &spec).unwrap()
                - lagrangian(f, &d, 0.5, &[(&table, &lambda)]).unwrap()
        };
        let base = gap(&first_point());
        for bits in 0..4 {
            let f = RandomizedClassifier::from_bits(2, bits);
            assert!((gap(&f) - base).abs() < 1e-12);
        }
        let zero = RandomizedClassifier::constant(2, 0.0).unwrap();
        let fair = fair_cs_risk(&zero, &d, &lambda, 0.5, &spec).unwrap();
        let oracle = ExactOracle::new(&d);
        let expect: f64 = (0..2)
            .map(|i| {
                let post = oracle.posterior(&i, None).unwrap();
                let (_, c1) = instance_costs(&post, oracle.event_masses(), &table, &lambda, 0.5).unwrap();
                c1 * d.point_label_mass(i, 1)
            })
            .sum();
        assert!((fair - expect).abs() < 1e-12);
    }

    fn d1_dataset(scale: usize) -> Dataset {
        let spec = SensitiveSpec::from_cardinalities(&[2], GroupMode::Intersectional).unwrap();
        let d = d1();
        let mut rows = Vec::new();
        for i in 0..2 {
            for m in 0..2 {
                for y in 0..2 {
                    let count = (d.mass(i, m, y) * 100.0).round() as usize * scale;
                    for _ in 0..count {
                        rows.push(Sample {
                            features: vec![i as f64],
                            sensitive: vec![m],
                            label: y as u8,
                        });
                    }
                }
            }
        }
        Dataset::new(spec, rows).unwrap()
    }

    #[test]
    fn empirical_matches_exact_on_enumerated_cells() {
        let ds = d1_dataset(100);
        let preds: Vec<f64> = ds.samples().iter().map(|s| 1.0 - s.features[0]).collect();
        for notion in Notion::ELEMENTARY {
            for measure in Measure::ALL {
                let spec = FairnessSpec::new(notion, measure, 0.1).unwrap();
                let emp = empirical_report(&preds, &ds, &spec).unwrap();
                let exact = symmetrized(&first_point(), &d1(), &spec).unwrap();
                assert!((emp.value - exact.value).abs() < 1e-12, "{notion} {measure}");
                assert_eq!(emp.satisfied, exact.satisfied);
            }
        }
    }

    #[test]
    fn perfect_predictions_have_equal_error() {
        let ds = d1_dataset(1);
        let preds: Vec<f64> = ds.labels().iter().map(|&y| y as f64).collect();
        let spec = FairnessSpec::new(Notion::AccuracyParity, Measure::MeanDifference, 0.0).unwrap();
        let report = empirical_report(&preds, &ds, &spec).unwrap();
        assert_eq!(report.value, 0.0);
        let constant = vec![1.0; ds.len()];
        let report = empirical_report(&constant, &ds, &dp_md(0.0)).unwrap();
        assert!(report.value.abs() < 1e-12);
        let (_, acc) = empirical_risk(&preds, &ds, 0.5).unwrap();
        assert!((acc - 1.0).abs() < 1e-12);
    }

    #[test]
    fn equalized_odds_reports_both_components() {
        let spec = FairnessSpec::new(Notion::EqualizedOdds, Measure::MeanDifference, 0.05).unwrap();
        let report = symmetrized(&first_point(), &d1(), &spec).unwrap();
        assert_eq!(report.components.len(), 2);
        let eo = report.component_value(Notion::EqualOpportunity).unwrap();
        let pe = report.component_value(Notion::PredictiveEquality).unwrap();
        assert_eq!(report.value, eo.max(pe));
        assert_eq!(report.satisfied, report.components.iter().all(|c| c.satisfied));
    }

    fn arb_case() -> impl Strategy<Value = (DiscreteJointDistribution, RandomizedClassifier)> {
        arb_distribution(6, 3).prop_flat_map(|d| {
            let n = d.num_points();
            (Just(d), prop::collection::vec(0.0f64..=1.0, n))
                .prop_map(|(d, f)| (d, RandomizedClassifier::new(f).unwrap()))
        })
    }

    proptest! {
        #[test]
        fn antisymmetry((d, f) in arb_case()) {
            let g = f.complement();
            for notion in Notion::ELEMENTARY {
                for m in 0..d.num_groups() {
                    let s = md_group(&f, &d, notion, m).unwrap() + md_group(&g, &d, notion, m).unwrap();
                    prop_assert!(s.abs() < 1e-12);
                }
            }
        }

        #[test]
        fn linear_forms_equal_direct_definitions((d, f) in arb_case(), delta in 0.0f64..=1.0) {
            let marg = d.marginals();
            for notion in Notion::ELEMENTARY {
                let md = coefficients(notion, Measure::MeanDifference, delta, &marg).unwrap();
                let mr = coefficients(notion, Measure::MeanRatio, delta, &marg).unwrap();
                for m in 0..d.num_groups() {
                    let (overall, group) = event_probabilities(&f, &d, notion, m).unwrap();
                    prop_assert!((r_md(&f, &d, &md, m).unwrap() - (overall - group)).abs() < 1e-10);
                    prop_assert!((r_mr(&f, &d, &mr, m).unwrap() - (delta * overall - group)).abs() < 1e-10);
                }
            }
        }

        #[test]
        fn risk_forms_agree((d, f) in arb_case(), c in 0.0f64..=1.0) {
            let a = cs_risk(&f, &d, c).unwrap();
            let b = cs_risk_via_eta(&f, &d, c).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn report_value_is_extreme_of_stored_values((d, f) in arb_case(), delta in 0.0f64..=1.0) {
            for measure in Measure::ALL {
                let spec = FairnessSpec::new(Notion::AccuracyParity, measure, delta).unwrap();
                let r = symmetrized(&f, &d, &spec).unwrap();
                let vals = r.groups.iter().flat_map(|g| [g.value, g.complement_value]);
                let extreme = match measure {
                    Measure::MeanDifference => vals.fold(f64::MIN, f64::max),
                    Measure::MeanRatio => vals.fold(f64::MAX, f64::min),
                };
                prop_assert_eq!(r.value, extreme);
            }
        }
    }
}
