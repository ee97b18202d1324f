//! Seeded property suite behind `oracle-check`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    build_lp, random_classifier, random_distribution, random_multipliers, resolve_ap_mr_sign,
    resolve_eodds_normalization, solve, solve_lp, threshold_on_support, threshold_optimality_gap,
    vertex_enumeration, LpStatus,
};
use crate::bayes::{Correction, EoddsForm, ExactOracle, GammaOracle, ThresholdRule, TIE_TOLERANCE};
use crate::coefficients::{coefficients, ApMrConvention};
use crate::distribution::DiscreteJointDistribution;
use crate::error::Result;
use crate::fairness::{FairnessSpec, Measure, Notion, SATISFIED_SLACK};
use crate::measures::{linear_forms_satisfied, md_group, symmetrized};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyResult {
    pub name: String,
    pub instances: usize,
    pub failures: usize,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub instances: usize,
    pub passed: bool,
    pub properties: Vec<PropertyResult>,
}

fn result(name: &str, instances: usize, failures: usize, detail: String) -> PropertyResult {
    PropertyResult {
        name: name.to_string(),
        instances,
        failures,
        passed: failures == 0,
        detail,
    }
}

/// Every property gets its own stream so adding one does not shift the others.
fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn instance(rng: &mut ChaCha8Rng, n: usize) -> DiscreteJointDistribution {
    let groups = rng.random_range(2..=3);
    random_distribution(rng, n, groups)
}

fn equivalence(rng: &mut ChaCha8Rng, instances: usize, measure: Measure) -> Result<PropertyResult> {
    let mut failures = 0;
    for _ in 0..instances {
        let n = rng.random_range(1..=10);
        let dist = instance(rng, n);
        let f = random_classifier(rng, n);
        let delta: f64 = rng.random();
        for notion in Notion::ELEMENTARY {
            let spec = FairnessSpec::new(notion, measure, delta)?;
            let table = coefficients(notion, measure, delta, &dist.marginals())?;
            if symmetrized(&f, &dist, &spec)?.satisfied != linear_forms_satisfied(&f, &dist, &table, SATISFIED_SLACK)? {
                failures += 1;
            }
        }
    }
    let name = match measure {
        Measure::MeanDifference => "md_linear_equivalence",
        Measure::MeanRatio => "mr_linear_equivalence",
    };
    Ok(result(name, instances, failures, "all four notions per instance".into()))
}

fn antisymmetry(rng: &mut ChaCha8Rng, instances: usize) -> Result<PropertyResult> {
    let mut failures = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let n = rng.random_range(1..=10);
        let dist = instance(rng, n);
        let f = random_classifier(rng, n);
        let g = f.complement();
        for notion in Notion::ELEMENTARY {
            for m in 0..dist.num_groups() {
                let s = (md_group(&f, &dist, notion, m)? + md_group(&g, &dist, notion, m)?).abs();
                worst = worst.max(s);
                if s > 1e-12 {
                    failures += 1;
                }
            }
        }
    }
    Ok(result("md_antisymmetry", instances, failures, format!("max |MD(f) + MD(1-f)| = {:e}", worst)))
}

fn random_rule(rng: &mut ChaCha8Rng, dist: &DiscreteJointDistribution, notion: Notion, measure: Measure) -> Result<ThresholdRule> {
    let delta: f64 = rng.random();
    let table = coefficients(notion, measure, delta, &dist.marginals())?;
    let lambda = random_multipliers(rng, dist.num_groups());
    ThresholdRule::new(rng.random(), Correction::Single { table, lambda })
}

fn threshold_optimality(rng: &mut ChaCha8Rng, instances: usize) -> Result<PropertyResult> {
    let mut failures = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        for notion in Notion::ELEMENTARY {
            for measure in Measure::ALL {
                let n = rng.random_range(1..=12);
                let dist = instance(rng, n);
                let rule = random_rule(rng, &dist, notion, measure)?;
                let gap = threshold_optimality_gap(&dist, &rule)?;
                worst = worst.max(gap.abs());
                if gap.abs() > 1e-9 {
                    failures += 1;
                }
            }
        }
    }
    Ok(result(
        "threshold_optimality",
        instances,
        failures,
        format!("per notion and measure; max gap {:e}", worst),
    ))
}

fn lambda_zero(rng: &mut ChaCha8Rng, instances: usize) -> Result<PropertyResult> {
    let mut failures = 0;
    for _ in 0..instances {
        let n = rng.random_range(1..=12);
        let dist = instance(rng, n);
        let c: f64 = rng.random();
        for notion in Notion::ELEMENTARY {
            let table = coefficients(notion, Measure::MeanDifference, 0.1, &dist.marginals())?;
            let rule = ThresholdRule::new(
                c,
                Correction::Single {
                    table,
                    lambda: crate::bayes::Multipliers::zeros(dist.num_groups()),
                },
            )?;
            let f = threshold_on_support(&dist, &rule, 0.0)?;
            let marg = dist.marginals();
            for i in 0..n {
                let plain = (marg.eta[i].unwrap() > c) as u8 as f64;
                if f.get(i) != plain {
                    failures += 1;
                }
            }
        }
    }
    Ok(result("lambda_zero_recovery", instances, failures, "exact pointwise".into()))
}

fn cost_identity(rng: &mut ChaCha8Rng, instances: usize) -> Result<PropertyResult> {
    let mut failures = 0;
    for _ in 0..instances {
        for measure in Measure::ALL {
            let n = rng.random_range(1..=12);
            let dist = instance(rng, n);
            let notion = Notion::ELEMENTARY[rng.random_range(0..4)];
            let rule = random_rule(rng, &dist, notion, measure)?;
            let oracle = ExactOracle::new(&dist);
            for i in 0..n {
                let post = oracle.posterior(&i, None)?;
                let h = rule.score(&post, oracle.event_masses())?;
                let (c0, c1) = rule.instance_costs(&post, oracle.event_masses())?;
                let consistent = (c0 + c1 - 1.0).abs() < 1e-12
                    && (h.abs() <= TIE_TOLERANCE || (post.eta - c0).signum() == h.signum());
                if !consistent {
                    failures += 1;
                }
            }
        }
    }
    Ok(result("cost_threshold_identity", instances, failures, "both measures".into()))
}

fn simplex_vertices(rng: &mut ChaCha8Rng, instances: usize) -> Result<PropertyResult> {
    let mut failures = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let n = rng.random_range(1..=3);
        let dist = instance(rng, n);
        let notion = Notion::ELEMENTARY[rng.random_range(0..4)];
        let measure = Measure::ALL[rng.random_range(0..2)];
        let spec = FairnessSpec::new(notion, measure, rng.random())?;
        let lp = build_lp(&dist, &spec, rng.random())?.to_linear_program();
        let simplex = solve(&lp);
        match vertex_enumeration(&lp) {
            Some((_, v)) => {
                let gap = (simplex.objective - v).abs();
                worst = worst.max(if gap.is_nan() { f64::INFINITY } else { gap });
                if simplex.status != LpStatus::Optimal || gap > 1e-10 {
                    failures += 1;
                }
            }
            None => {
                if simplex.status != LpStatus::Infeasible {
                    failures += 1;
                }
            }
        }
    }
    Ok(result("simplex_vs_vertices", instances, failures, format!("n <= 3; max gap {:e}", worst)))
}

fn feasibility(rng: &mut ChaCha8Rng, instances: usize) -> Result<PropertyResult> {
    let mut failures = 0;
    for _ in 0..instances {
        let n = rng.random_range(1..=10);
        let dist = instance(rng, n);
        let delta: f64 = if rng.random_bool(0.25) { 0.0 } else { rng.random() };
        for notion in [Notion::DemographicParity, Notion::EqualOpportunity, Notion::PredictiveEquality] {
            for measure in Measure::ALL {
                let spec = FairnessSpec::new(notion, measure, delta)?;
                if solve_lp(&build_lp(&dist, &spec, rng.random())?).status != LpStatus::Optimal {
                    failures += 1;
                }
            }
        }
    }
    Ok(result("lp_feasibility_dp_eo_pe", instances, failures, "constant classifier witness".into()))
}

/// Runs every property with `instances` random cases each.
pub fn run_property_suite(instances: usize, seed: u64) -> Result<SuiteReport> {
    let mut properties = vec![
        equivalence(&mut stream(seed, 1), instances, Measure::MeanDifference)?,
        equivalence(&mut stream(seed, 2), instances, Measure::MeanRatio)?,
        antisymmetry(&mut stream(seed, 3), instances)?,
        threshold_optimality(&mut stream(seed, 4), instances)?,
        lambda_zero(&mut stream(seed, 5), instances)?,
        cost_identity(&mut stream(seed, 6), instances)?,
        simplex_vertices(&mut stream(seed, 7), instances)?,
        feasibility(&mut stream(seed, 8), instances)?,
    ];
    properties.push(match resolve_ap_mr_sign(&mut stream(seed, 9), instances) {
        Ok(r) => result(
            "ap_mr_sign_resolution",
            instances,
            (r.chosen != ApMrConvention::default()) as usize,
            format!("chosen {:?}; counterexamples {:?}", r.chosen, r.counterexamples),
        ),
        Err(e) => result("ap_mr_sign_resolution", instances, 1, e.to_string()),
    });
    properties.push(match resolve_eodds_normalization(&mut stream(seed, 10), instances) {
        Ok(r) => result(
            "eodds_normalization",
            instances,
            (r.chosen != EoddsForm::default()) as usize,
            format!("chosen {:?}; counterexamples {:?}", r.chosen, r.counterexamples),
        ),
        Err(e) => result("eodds_normalization", instances, 1, e.to_string()),
    });
    Ok(SuiteReport {
        seed,
        instances,
        passed: properties.iter().all(|p| p.passed),
        properties,
    })
}
