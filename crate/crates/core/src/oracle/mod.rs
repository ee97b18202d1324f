//! Ground truth on small discrete instances.
//!
//! The constrained problem over a finite support is a linear program in the
//! acceptance probabilities `f(x_i)`: minimize `Σ_i u_i f_i` with
//! `u_i = (c − η(x_i)) P(x_i)`, subject to every group's linear form lying in
//! the measure's interval. Deterministic classifiers can also be enumerated
//! outright for supports of up to 20 points.

mod simplex;
mod suite;

pub use simplex::{
    solve, vertex_enumeration, LinearProgram, LpResult, LpStatus, Row, RowKind, FEASIBILITY_TOLERANCE,
    OPTIMALITY_TOLERANCE,
};
pub use suite::{run_property_suite, PropertyResult, SuiteReport};

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::bayes::{
    decide, EoddsForm, ExactOracle, GammaOracle, Multipliers, PointPosterior, ThresholdRule,
};
use crate::bayes::Correction;
use crate::coefficients::{coefficients, coefficients_with_convention, ApMrConvention, CoefficientTable};
use crate::distribution::{DiscreteJointDistribution, RandomizedClassifier};
use crate::error::{domain, FairError, Result};
use crate::fairness::{FairnessSpec, Measure, Notion};
use crate::measures::{lagrangian, linear_forms_satisfied, symmetrized};

/// Largest support accepted by [`enumerate_deterministic`].
pub const ENUMERATION_LIMIT: usize = 20;

/// One group's constraint `lower <= Σ_i coeffs_i f_i + offset <= upper`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessRow {
    pub notion: Notion,
    /// One-based group index.
    pub group: usize,
    pub coeffs: Vec<f64>,
    pub offset: f64,
}

/// The constrained problem as a linear program over `f(x_i) ∈ [0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairLP {
    /// `u_i = (c − η(x_i)) P(x_i)`.
    pub objective: Vec<f64>,
    /// `(1 − c) p⁺`, so that objective plus constant is the cost-sensitive risk.
    pub constant: f64,
    pub rows: Vec<FairnessRow>,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LPSolution {
    pub status: LpStatus,
    pub f: Vec<f64>,
    /// Cost-sensitive risk of `f` (NaN unless optimal).
    pub objective: f64,
}

impl FairLP {
    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    /// Two inequality rows per group plus the upper box row per variable.
    pub fn to_linear_program(&self) -> LinearProgram {
        let n = self.num_vars();
        let mut rows = Vec::with_capacity(2 * self.rows.len() + n);
        for r in &self.rows {
            rows.push(Row {
                coeffs: r.coeffs.clone(),
                kind: RowKind::Le,
                rhs: self.upper - r.offset,
            });
            rows.push(Row {
                coeffs: r.coeffs.clone(),
                kind: RowKind::Ge,
                rhs: self.lower - r.offset,
            });
        }
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            rows.push(Row {
                coeffs: e,
                kind: RowKind::Le,
                rhs: 1.0,
            });
        }
        LinearProgram {
            objective: self.objective.clone(),
            rows,
        }
    }

    /// Largest constraint violation of `f`, box included.
    pub fn max_violation(&self, f: &[f64]) -> f64 {
        self.to_linear_program().max_violation(f)
    }
}

/// Coefficient tables of a specification's elementary components.
pub fn component_tables(
    dist: &DiscreteJointDistribution,
    spec: &FairnessSpec,
) -> Result<Vec<CoefficientTable>> {
    let marg = dist.marginals();
    spec.notion
        .components()
        .into_iter()
        .map(|n| coefficients(n, spec.measure, spec.delta, &marg))
        .collect()
}

pub fn build_lp(dist: &DiscreteJointDistribution, spec: &FairnessSpec, c: f64) -> Result<FairLP> {
    if !(0.0..=1.0).contains(&c) {
        return domain(format!("cost {} outside [0, 1]", c));
    }
    let marg = dist.marginals();
    let n = dist.num_points();
    let objective = (0..n)
        .map(|i| (c - marg.eta[i].unwrap_or(0.0)) * marg.p_x[i])
        .collect();
    let mut rows = Vec::new();
    for table in component_tables(dist, spec)? {
        let scale = table.population_scale();
        // γ_m^y(x_i) P(x_i) = P(x_i, m, y) / P(E_{y,m}).
        let weight = |i: usize, m: usize, y: usize| -> Result<f64> {
            let event = marg.event(m, y);
            if event > 0.0 {
                Ok(dist.mass(i, m, y) / event)
            } else {
                Err(FairError::UndefinedGroup {
                    group: m + 1,
                    notion: table.notion.to_string(),
                })
            }
        };
        for m in (0..table.num_groups()).filter(|&m| table.is_included(m)) {
            let mut coeffs = vec![0.0; n];
            for (i, slot) in coeffs.iter_mut().enumerate() {
                for y in 0..2 {
                    let mut t = 0.0;
                    for g in 0..table.num_groups() {
                        let w = table.a[g] * table.b[g][y];
                        if w != 0.0 {
                            t += scale * w * weight(i, g, y)?;
                        }
                    }
                    if table.b[m][y] != 0.0 {
                        t -= table.b[m][y] * weight(i, m, y)?;
                    }
                    *slot += t;
                }
            }
            rows.push(FairnessRow {
                notion: table.notion,
                group: m + 1,
                coeffs,
                offset: table.offset(m),
            });
        }
    }
    let (lower, upper) = spec.measure.linear_bounds(spec.delta);
    Ok(FairLP {
        objective,
        constant: (1.0 - c) * marg.p_pos,
        rows,
        lower,
        upper,
    })
}

pub fn solve_lp(lp: &FairLP) -> LPSolution {
    let result = solve(&lp.to_linear_program());
    let objective = match result.status {
        LpStatus::Optimal => result.objective + lp.constant,
        _ => f64::NAN,
    };
    LPSolution {
        status: result.status,
        f: result.x.iter().map(|v| v.clamp(0.0, 1.0)).collect(),
        objective,
    }
}

/// Exhaustive minimum of `objective` over the `2^n` deterministic classifiers.
///
/// Ties keep the classifier with the smallest bit pattern.
pub fn enumerate_deterministic<F>(n: usize, objective: F) -> Result<(RandomizedClassifier, f64)>
where
    F: Fn(&RandomizedClassifier) -> Result<f64>,
{
    if n > ENUMERATION_LIMIT {
        return Err(FairError::SupportTooLarge {
            size: n,
            limit: ENUMERATION_LIMIT,
        });
    }
    let mut best: Option<(u64, f64)> = None;
    for bits in 0..(1u64 << n) {
        let v = objective(&RandomizedClassifier::from_bits(n, bits))?;
        if best.is_none_or(|(_, b)| v < b) {
            best = Some((bits, v));
        }
    }
    let (bits, v) = best.expect("at least one classifier");
    Ok((RandomizedClassifier::from_bits(n, bits), v))
}

/// Acceptance probabilities of a threshold rule over a support (attribute-blind).
pub fn threshold_on_support(
    dist: &DiscreteJointDistribution,
    rule: &ThresholdRule,
    alpha: f64,
) -> Result<RandomizedClassifier> {
    let oracle = ExactOracle::new(dist);
    let posts = support_posteriors(dist)?;
    threshold_from_posteriors(&posts, oracle.event_masses(), rule, alpha)
}

/// Posterior at every support point; zero-mass points get `None`.
pub fn support_posteriors(dist: &DiscreteJointDistribution) -> Result<Vec<Option<PointPosterior>>> {
    let oracle = ExactOracle::new(dist);
    (0..dist.num_points())
        .map(|i| {
            if dist.point_mass(i) > 0.0 {
                oracle.posterior(&i, None).map(Some)
            } else {
                Ok(None)
            }
        })
        .collect()
}

fn threshold_from_posteriors(
    posts: &[Option<PointPosterior>],
    events: &[[f64; 2]],
    rule: &ThresholdRule,
    alpha: f64,
) -> Result<RandomizedClassifier> {
    let accept = posts
        .iter()
        .map(|p| match p {
            Some(p) => decide(rule.score(p, events)?, alpha),
            None => Ok(0.0),
        })
        .collect::<Result<Vec<_>>>()?;
    RandomizedClassifier::new(accept)
}

/// Lagrangian `R_cs − Σ λ R` matching a rule's constraint sets.
pub fn rule_lagrangian(
    f: &RandomizedClassifier,
    dist: &DiscreteJointDistribution,
    rule: &ThresholdRule,
) -> Result<f64> {
    match &rule.correction {
        Correction::Single { table, lambda } => lagrangian(f, dist, rule.c, &[(table, lambda)]),
        Correction::EqualizedOdds {
            eo,
            pe,
            lambda_eo,
            lambda_pe,
            ..
        } => lagrangian(f, dist, rule.c, &[(eo, lambda_eo), (pe, lambda_pe)]),
        Correction::Independent {
            sensitive,
            tables,
            lambdas,
        } => {
            let mut value = lagrangian(f, dist, rule.c, &[])?;
            for (k, (table, lambda)) in tables.iter().zip(lambdas).enumerate() {
                let projected = dist.project(sensitive, k)?;
                value += lagrangian(f, &projected, rule.c, &[(table, lambda)])?
                    - lagrangian(f, &projected, rule.c, &[])?;
            }
            Ok(value)
        }
    }
}

/// `L(threshold) − min_f L(f)` over deterministic `f`; zero when the rule is optimal.
pub fn threshold_optimality_gap(dist: &DiscreteJointDistribution, rule: &ThresholdRule) -> Result<f64> {
    let f = threshold_on_support(dist, rule, 0.0)?;
    let at_threshold = rule_lagrangian(&f, dist, rule)?;
    let (_, best) = enumerate_deterministic(dist.num_points(), |g| rule_lagrangian(g, dist, rule))?;
    Ok(at_threshold - best)
}

/// Random joint law with Dirichlet(1, ..., 1) weights and a per-cell floor.
///
/// The floor is `min(0.01, 0.5 / cells)`, so every event has positive mass and
/// the floors never take more than half of the total.
pub fn random_distribution<R: Rng + ?Sized>(rng: &mut R, n: usize, groups: usize) -> DiscreteJointDistribution {
    let cells = n * groups * 2;
    let floor = (0.01f64).min(0.5 / cells as f64);
    let draws: Vec<f64> = (0..cells).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = draws.iter().sum();
    let free = 1.0 - floor * cells as f64;
    let mut mass: Vec<f64> = draws.iter().map(|d| floor + free * d / total).collect();
    let drift = 1.0 - mass.iter().sum::<f64>();
    let k = (0..cells).max_by(|&a, &b| mass[a].total_cmp(&mass[b])).unwrap();
    mass[k] += drift;
    DiscreteJointDistribution::new(n, groups, mass).expect("generator yields a valid table")
}

/// Uniform acceptance probabilities; deterministic with probability one half.
pub fn random_classifier<R: Rng + ?Sized>(rng: &mut R, n: usize) -> RandomizedClassifier {
    let deterministic = rng.random_bool(0.5);
    let accept = (0..n)
        .map(|_| {
            let p: f64 = rng.random();
            if deterministic {
                p.round()
            } else {
                p
            }
        })
        .collect();
    RandomizedClassifier::new(accept).expect("probabilities in [0, 1]")
}

pub fn random_multipliers<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Multipliers {
    Multipliers::new((0..len).map(|_| rng.random_range(-1.0..=1.0)).collect()).expect("finite")
}

/// Outcome of a convention check: disagreement counts per candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resolution<T> {
    pub chosen: T,
    pub counterexamples: Vec<(T, usize)>,
    pub instances: usize,
}

fn pick_unique<T: Copy + std::fmt::Debug>(counts: Vec<(T, usize)>, instances: usize) -> Result<Resolution<T>> {
    let passing: Vec<T> = counts.iter().filter(|(_, c)| *c == 0).map(|(t, _)| *t).collect();
    match passing.as_slice() {
        [only] => Ok(Resolution {
            chosen: *only,
            counterexamples: counts,
            instances,
        }),
        _ => Err(FairError::Ambiguous(format!(
            "{} candidates without counterexamples: {:?}",
            passing.len(),
            counts
        ))),
    }
}

/// Tests the mean-ratio equivalence for accuracy parity under both sign
/// conventions and returns the one without counterexamples.
pub fn resolve_ap_mr_sign<R: Rng + ?Sized>(rng: &mut R, instances: usize) -> Result<Resolution<ApMrConvention>> {
    let mut counts: Vec<(ApMrConvention, usize)> = ApMrConvention::ALL.iter().map(|c| (*c, 0)).collect();
    for _ in 0..instances {
        let n = rng.random_range(1..=10);
        let groups = rng.random_range(2..=3);
        let dist = random_distribution(rng, n, groups);
        let f = random_classifier(rng, n);
        let delta: f64 = rng.random();
        let spec = FairnessSpec::new(Notion::AccuracyParity, Measure::MeanRatio, delta)?;
        let direct = symmetrized(&f, &dist, &spec)?.satisfied;
        for (convention, count) in counts.iter_mut() {
            let table = coefficients_with_convention(
                Notion::AccuracyParity,
                Measure::MeanRatio,
                delta,
                &dist.marginals(),
                *convention,
            )?;
            if linear_forms_satisfied(&f, &dist, &table, crate::fairness::SATISFIED_SLACK)? != direct {
                *count += 1;
            }
        }
    }
    pick_unique(counts, instances)
}

/// Compares both equalized-odds score forms against exhaustive minimization
/// of the two-constraint Lagrangian on instances with unequal `P(E_{0,m})`.
pub fn resolve_eodds_normalization<R: Rng + ?Sized>(
    rng: &mut R,
    instances: usize,
) -> Result<Resolution<EoddsForm>> {
    let mut counts: Vec<(EoddsForm, usize)> = EoddsForm::ALL.iter().map(|f| (*f, 0)).collect();
    let mut used = 0;
    while used < instances {
        let n = rng.random_range(1..=8);
        let groups = rng.random_range(2..=3);
        let dist = random_distribution(rng, n, groups);
        let negatives: Vec<f64> = (0..groups).map(|m| dist.event_mass(m, 0)).collect();
        if negatives.iter().all(|v| (v - negatives[0]).abs() < 1e-9) {
            continue;
        }
        used += 1;
        let marg = dist.marginals();
        let eo = coefficients(Notion::EqualOpportunity, Measure::MeanDifference, 0.0, &marg)?;
        let pe = coefficients(Notion::PredictiveEquality, Measure::MeanDifference, 0.0, &marg)?;
        let lambda_eo = random_multipliers(rng, groups);
        let lambda_pe = random_multipliers(rng, groups);
        let c: f64 = rng.random();
        for (form, count) in counts.iter_mut() {
            let rule = ThresholdRule::new(
                c,
                Correction::EqualizedOdds {
                    eo: eo.clone(),
                    pe: pe.clone(),
                    lambda_eo: lambda_eo.clone(),
                    lambda_pe: lambda_pe.clone(),
                    form: *form,
                },
            )?;
            if threshold_optimality_gap(&dist, &rule)? > 1e-9 {
                *count += 1;
            }
        }
    }
    pick_unique(counts, instances)
}

/// Best feasible thresholded classifier found on a `λ` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridOptimum {
    pub lambda: Vec<f64>,
    pub risk: f64,
    pub classifier: RandomizedClassifier,
}

/// Scans `λ ∈ [−1, 1]^M` at the given step and keeps the feasible threshold
/// classifier (tie parameter 0) with the smallest cost-sensitive risk.
pub fn lagrangian_grid_search(
    dist: &DiscreteJointDistribution,
    spec: &FairnessSpec,
    c: f64,
    step: f64,
) -> Result<Option<GridOptimum>> {
    if spec.notion.is_composite() {
        return domain("grid search covers elementary notions");
    }
    if !(step > 0.0 && step <= 2.0) {
        return domain(format!("grid step {} outside (0, 2]", step));
    }
    let groups = dist.num_groups();
    let per_axis = (2.0 / step).round() as usize + 1;
    let total = per_axis
        .checked_pow(groups as u32)
        .ok_or_else(|| FairError::Domain("grid too large".into()))?;
    let table = component_tables(dist, spec)?.remove(0);
    let posts = support_posteriors(dist)?;
    let events = ExactOracle::new(dist).event_masses().to_vec();
    let mut best: Option<GridOptimum> = None;
    let mut lambda = vec![0.0; groups];
    for index in 0..total {
        let mut rest = index;
        for slot in lambda.iter_mut() {
            *slot = -1.0 + step * (rest % per_axis) as f64;
            rest /= per_axis;
        }
        let rule = ThresholdRule::new(
            c,
            Correction::Single {
                table: table.clone(),
                lambda: Multipliers::new(lambda.clone())?,
            },
        )?;
        let f = threshold_from_posteriors(&posts, &events, &rule, 0.0)?;
        if !symmetrized(&f, dist, spec)?.satisfied {
            continue;
        }
        let risk = crate::measures::cs_risk(&f, dist, c)?;
        if best.as_ref().is_none_or(|b| risk < b.risk) {
            best = Some(GridOptimum {
                lambda: lambda.clone(),
                risk,
                classifier: f,
            });
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::d1;
    use crate::measures::{cs_risk, linear_form, group_rates};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_point_single_group() {
        let d = DiscreteJointDistribution::new(1, 1, vec![0.4, 0.6]).unwrap();
        let spec = FairnessSpec::new(Notion::DemographicParity, Measure::MeanDifference, 0.1).unwrap();
        let lp = build_lp(&d, &spec, 0.5).unwrap();
        assert_eq!(lp.num_vars(), 1);
        assert!(lp.rows.iter().all(|r| r.coeffs[0].abs() < 1e-15 && r.offset == 0.0));
        let sol = solve_lp(&lp);
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.f[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn d1_program_shape_and_value() {
        let d = d1();
        let spec = FairnessSpec::new(Notion::DemographicParity, Measure::MeanDifference, 0.05).unwrap();
        let lp = build_lp(&d, &spec, 0.5).unwrap();
        assert_eq!(lp.num_vars(), 2);
        assert_eq!(lp.rows.len(), 2);
        assert_eq!(lp.to_linear_program().rows.len(), 4 + 2);
        let sol = solve_lp(&lp);
        let (_, v) = vertex_enumeration(&lp.to_linear_program()).unwrap();
        assert!((sol.objective - (v + lp.constant)).abs() < 1e-10);
        let f = RandomizedClassifier::new(sol.f.clone()).unwrap();
        assert!((cs_risk(&f, &d, 0.5).unwrap() - sol.objective).abs() < 1e-10);
    }

    #[test]
    fn lp_rows_reproduce_linear_forms() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let n = rng.random_range(1..=6);
            let d = random_distribution(&mut rng, n, 3);
            let f = random_classifier(&mut rng, n);
            for notion in Notion::ELEMENTARY {
                for measure in Measure::ALL {
                    let spec = FairnessSpec::new(notion, measure, 0.7).unwrap();
                    let lp = build_lp(&d, &spec, 0.3).unwrap();
                    let table = component_tables(&d, &spec).unwrap().remove(0);
                    let rates = group_rates(&f, &d).unwrap();
                    for row in &lp.rows {
                        let value: f64 = row.coeffs.iter().zip(f.as_slice()).map(|(a, b)| a * b).sum::<f64>() + row.offset;
                        let direct = linear_form(&rates, &table, row.group - 1).unwrap();
                        assert!((value - direct).abs() < 1e-12);
                    }
                    let risk: f64 = lp.objective.iter().zip(f.as_slice()).map(|(a, b)| a * b).sum::<f64>() + lp.constant;
                    assert!((risk - cs_risk(&f, &d, 0.3).unwrap()).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn enumeration_picks_bayes_rule_on_d1() {
        let d = d1();
        let marg = d.marginals();
        let (f, _) = enumerate_deterministic(2, |f| {
            Ok((0..2).map(|i| -(marg.eta[i].unwrap() - 0.5) * f.get(i) * marg.p_x[i]).sum())
        })
        .unwrap();
        assert_eq!(f.as_slice(), &[0.0, 1.0]);
        let (f, v) = enumerate_deterministic(3, |_| Ok(0.0)).unwrap();
        assert_eq!((f.as_slice(), v), (&[0.0, 0.0, 0.0][..], 0.0));
        assert!(matches!(
            enumerate_deterministic(21, |_| Ok(0.0)),
            Err(FairError::SupportTooLarge { .. })
        ));
    }

    #[test]
    fn generator_is_seeded_and_floored() {
        let a = random_distribution(&mut ChaCha8Rng::seed_from_u64(5), 4, 3);
        let b = random_distribution(&mut ChaCha8Rng::seed_from_u64(5), 4, 3);
        assert_eq!(a, b);
        assert!(a.masses().iter().all(|&m| m >= 0.01 - 1e-15));
        let big = random_distribution(&mut ChaCha8Rng::seed_from_u64(5), 20, 3);
        assert!(big.masses().iter().all(|&m| m > 0.0));
    }

    #[test]
    fn constant_classifier_keeps_lp_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..30 {
            let n = rng.random_range(1..=6);
            let d = random_distribution(&mut rng, n, 2);
            for notion in [Notion::DemographicParity, Notion::EqualOpportunity, Notion::PredictiveEquality] {
                for measure in Measure::ALL {
                    let spec = FairnessSpec::new(notion, measure, 0.0).unwrap();
                    assert_eq!(solve_lp(&build_lp(&d, &spec, 0.5).unwrap()).status, LpStatus::Optimal);
                }
            }
        }
    }

    #[test]
    fn resolvers_pick_a_unique_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let sign = resolve_ap_mr_sign(&mut rng, 200).unwrap();
        assert_eq!(sign.chosen, ApMrConvention::Appendix);
        let form = resolve_eodds_normalization(&mut rng, 200).unwrap();
        assert_eq!(form.chosen, EoddsForm::Symmetric);
    }
}
