//! Plug-in post-processing, fair cost-sensitive training and λ selection.
//!
//! A dataset is split into train, tune and test parts. The train part fits
//! `η̂`, the group posterior behind `γ̂` and the coefficient tables; every
//! multiplier on the grid is then scored on tune and test, and selection
//! looks at tune only.

use std::cmp::Ordering;
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bayes::{
    decide, Correction, EoddsForm, GammaOracle, Multipliers, PointPosterior, ThresholdClassifier, ThresholdRule,
};
use crate::coefficients::{coefficients, CoefficientTable};
use crate::data::{Dataset, Sample};
use crate::distribution::DiscreteJointDistribution;
use crate::error::{domain, FairError, Result};
use crate::estimation::{
    fit_binary, fit_joint, with_group_indicator, EstimationConfig, FitReport, FittedGammaOracle, JointStrategy,
    LinearProbabilityModel,
};
use crate::fairness::{FairnessSpec, Measure, Notion};
use crate::groups::{GroupMode, SensitiveFeature, SensitiveSpec};
use crate::measures::{empirical_independent_reports, empirical_report, empirical_risk};

/// Whether the sensitive attribute is available at prediction time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum AttributeMode {
    #[default]
    Blind,
    Aware,
}

/// Roles of the seeds derived from the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedRole {
    Split = 1,
    Estimation = 2,
    Grid = 3,
    Synthetic = 4,
}

/// Seed for `role`: the first word of stream `role` of ChaCha8 seeded with `master`.
pub fn derive_seed(master: u64, role: SeedRole) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(role as u64);
    rng.next_u64()
}

/// Fractions of the train, tune and test parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitFractions {
    pub train: f64,
    pub tune: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.25,
            tune: 0.25,
            test: 0.5,
        }
    }
}

/// Multiplier grid; `None` resolutions pick the defaults for the grid's dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub lower: f64,
    pub upper: f64,
    pub points_per_axis: Option<usize>,
    pub lhs_samples: usize,
    /// Explicit points; a one-component point is broadcast to every axis.
    pub points: Option<Vec<Vec<f64>>>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            lower: -1.0,
            upper: 1.0,
            points_per_axis: None,
            lhs_samples: 2000,
            points: None,
        }
    }
}

const MAX_GRID_POINTS: usize = 1_000_000;

impl GridSpec {
    /// Grid over `dims` multipliers: Cartesian up to three axes (four for a
    /// composite notion), Latin hypercube plus the origin beyond.
    pub fn points(&self, dims: usize, composite: bool, seed: u64) -> Result<Vec<Vec<f64>>> {
        if let Some(points) = &self.points {
            if points.is_empty() {
                return domain("explicit grid is empty");
            }
            return points
                .iter()
                .map(|p| match p.len() {
                    1 => Ok(vec![p[0]; dims]),
                    l if l == dims => Ok(p.clone()),
                    l => Err(FairError::DimensionMismatch { expected: dims, got: l }),
                })
                .collect();
        }
        if !(self.lower.is_finite() && self.upper.is_finite() && self.lower <= self.upper) {
            return domain(format!("grid bounds [{}, {}] are invalid", self.lower, self.upper));
        }
        if dims == 0 {
            return Ok(vec![Vec::new()]);
        }
        let cartesian_limit = if composite { 4 } else { 3 };
        if dims <= cartesian_limit {
            let per_axis = self.points_per_axis.unwrap_or(if composite { 11 } else { 21 });
            if per_axis == 0 {
                return domain("grid needs at least one point per axis");
            }
            let total = per_axis
                .checked_pow(dims as u32)
                .filter(|&t| t <= MAX_GRID_POINTS)
                .ok_or_else(|| FairError::Domain(format!("{}^{} grid points exceed {}", per_axis, dims, MAX_GRID_POINTS)))?;
            let axis: Vec<f64> = if per_axis == 1 {
                vec![0.5 * (self.lower + self.upper)]
            } else {
                let d = (per_axis - 1) as f64;
                (0..per_axis)
                    .map(|k| (self.lower * (d - k as f64) + self.upper * k as f64) / d)
                    .collect()
            };
            return Ok((0..total)
                .map(|mut idx| {
                    let mut p = vec![0.0; dims];
                    for slot in p.iter_mut().rev() {
                        *slot = axis[idx % per_axis];
                        idx /= per_axis;
                    }
                    p
                })
                .collect());
        }
        let samples = self.lhs_samples.max(1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let width = self.upper - self.lower;
        let mut columns: Vec<Vec<f64>> = Vec::with_capacity(dims);
        for _ in 0..dims {
            let mut strata: Vec<usize> = (0..samples).collect();
            strata.shuffle(&mut rng);
            columns.push(
                strata
                    .into_iter()
                    .map(|s| self.lower + (s as f64 + rng.random::<f64>()) / samples as f64 * width)
                    .collect(),
            );
        }
        let mut points = vec![vec![0.0; dims]];
        points.extend((0..samples).map(|i| columns.iter().map(|c| c[i]).collect()));
        Ok(points)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub c: f64,
    pub fairness: FairnessSpec,
    pub attribute: AttributeMode,
    pub grid: GridSpec,
    /// Acceptance probability on exact ties.
    pub alpha: f64,
    /// Master seed; see [`derive_seed`].
    pub seed: u64,
    /// Its `seed` is replaced by the one derived from the master seed.
    pub estimation: EstimationConfig,
    pub joint_strategy: JointStrategy,
    pub eodds_form: EoddsForm,
    /// Seed in-processing with post-processing candidates instead of the full grid.
    pub warm_start: bool,
    pub warm_start_candidates: usize,
    pub split: SplitFractions,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            c: 0.5,
            fairness: FairnessSpec {
                notion: Notion::DemographicParity,
                measure: Measure::MeanDifference,
                delta: 0.05,
                mode: GroupMode::Intersectional,
            },
            attribute: AttributeMode::Blind,
            grid: GridSpec::default(),
            alpha: 0.0,
            seed: 0,
            estimation: EstimationConfig::default(),
            joint_strategy: JointStrategy::default(),
            eodds_form: EoddsForm::default(),
            warm_start: true,
            warm_start_candidates: 20,
            split: SplitFractions::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.c) {
            return domain(format!("cost {} outside [0, 1]", self.c));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return domain(format!("tie parameter {} outside [0, 1]", self.alpha));
        }
        FairnessSpec::with_mode(
            self.fairness.notion,
            self.fairness.measure,
            self.fairness.delta,
            self.fairness.mode,
        )?;
        if self.fairness.mode == GroupMode::Independent && self.fairness.notion.is_composite() {
            return domain("independent fairness supports elementary notions only");
        }
        let s = self.split;
        if [s.train, s.tune, s.test].iter().any(|f| !(*f > 0.0 && f.is_finite())) {
            return domain("split fractions must be positive");
        }
        Ok(())
    }

    fn estimation_config(&self) -> EstimationConfig {
        EstimationConfig {
            seed: derive_seed(self.seed, SeedRole::Estimation),
            ..self.estimation
        }
    }
}

/// Train, tune and test parts of one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub train: Dataset,
    pub tune: Dataset,
    pub test: Dataset,
}

impl Splits {
    pub fn new(dataset: &Dataset, config: &PipelineConfig) -> Result<Self> {
        let s = config.split;
        let mut parts = dataset
            .split(&[s.train, s.tune, s.test], derive_seed(config.seed, SeedRole::Split))?
            .into_iter();
        let (train, tune, test) = (parts.next().unwrap(), parts.next().unwrap(), parts.next().unwrap());
        if train.is_empty() || tune.is_empty() || test.is_empty() {
            return Err(FairError::Degenerate(format!(
                "{} rows are too few for a train/tune/test split",
                dataset.len()
            )));
        }
        Ok(Self { train, tune, test })
    }
}

/// Single-point law carrying the group and label frequencies of a dataset.
pub fn frequency_distribution(dataset: &Dataset) -> Result<DiscreteJointDistribution> {
    if dataset.is_empty() {
        return domain("frequencies of an empty dataset");
    }
    let m = dataset.num_groups();
    let mut mass = vec![0.0; 2 * m];
    let n = dataset.len() as f64;
    for (&g, s) in dataset.groups().iter().zip(dataset.samples()) {
        mass[2 * g + s.label as usize] += 1.0 / n;
    }
    DiscreteJointDistribution::new(1, m, mass)
}

/// Coefficient tables of a fairness requirement, ready to take multipliers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConstraintTables {
    Single {
        table: CoefficientTable,
    },
    EqualizedOdds {
        eo: CoefficientTable,
        pe: CoefficientTable,
        form: EoddsForm,
    },
    Independent {
        sensitive: SensitiveSpec,
        tables: Vec<CoefficientTable>,
    },
}

impl ConstraintTables {
    pub fn from_distribution(
        dist: &DiscreteJointDistribution,
        sensitive: &SensitiveSpec,
        spec: &FairnessSpec,
        form: EoddsForm,
    ) -> Result<Self> {
        let (notion, measure, delta) = (spec.notion, spec.measure, spec.delta);
        match spec.mode {
            GroupMode::Independent => {
                if notion.is_composite() {
                    return domain("independent fairness supports elementary notions only");
                }
                let tables = (0..sensitive.num_features())
                    .map(|k| coefficients(notion, measure, delta, &dist.project(sensitive, k)?.marginals()))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Self::Independent {
                    sensitive: sensitive.clone(),
                    tables,
                })
            }
            GroupMode::Intersectional => {
                let marg = dist.marginals();
                if notion == Notion::EqualizedOdds {
                    Ok(Self::EqualizedOdds {
                        eo: coefficients(Notion::EqualOpportunity, measure, delta, &marg)?,
                        pe: coefficients(Notion::PredictiveEquality, measure, delta, &marg)?,
                        form,
                    })
                } else {
                    Ok(Self::Single {
                        table: coefficients(notion, measure, delta, &marg)?,
                    })
                }
            }
        }
    }

    /// Tables from the group and label frequencies of a dataset.
    pub fn from_dataset(dataset: &Dataset, spec: &FairnessSpec, form: EoddsForm) -> Result<Self> {
        Self::from_distribution(&frequency_distribution(dataset)?, dataset.spec(), spec, form)
    }

    /// Number of multiplier components.
    pub fn dims(&self) -> usize {
        match self {
            Self::Single { table } => table.num_groups(),
            Self::EqualizedOdds { eo, pe, .. } => eo.num_groups() + pe.num_groups(),
            Self::Independent { tables, .. } => tables.iter().map(CoefficientTable::num_groups).sum(),
        }
    }

    pub fn is_composite(&self) -> bool {
        matches!(self, Self::EqualizedOdds { .. })
    }

    pub fn warnings(&self) -> Vec<String> {
        match self {
            Self::Single { table } => table.warnings.clone(),
            Self::EqualizedOdds { eo, pe, .. } => eo.warnings.iter().chain(&pe.warnings).cloned().collect(),
            Self::Independent { tables, .. } => tables.iter().flat_map(|t| t.warnings.clone()).collect(),
        }
    }

    /// Threshold rule for the flattened multiplier vector `lambda`.
    pub fn rule(&self, c: f64, lambda: &[f64]) -> Result<ThresholdRule> {
        if lambda.len() != self.dims() {
            return Err(FairError::DimensionMismatch {
                expected: self.dims(),
                got: lambda.len(),
            });
        }
        let correction = match self {
            Self::Single { table } => Correction::Single {
                table: table.clone(),
                lambda: Multipliers::new(lambda.to_vec())?,
            },
            Self::EqualizedOdds { eo, pe, form } => {
                let (a, b) = lambda.split_at(eo.num_groups());
                Correction::EqualizedOdds {
                    eo: eo.clone(),
                    pe: pe.clone(),
                    lambda_eo: Multipliers::new(a.to_vec())?,
                    lambda_pe: Multipliers::new(b.to_vec())?,
                    form: *form,
                }
            }
            Self::Independent { sensitive, tables } => {
                let mut rest = lambda;
                let mut lambdas = Vec::with_capacity(tables.len());
                for t in tables {
                    let (head, tail) = rest.split_at(t.num_groups());
                    lambdas.push(Multipliers::new(head.to_vec())?);
                    rest = tail;
                }
                Correction::Independent {
                    sensitive: sensitive.clone(),
                    tables: tables.clone(),
                    lambdas,
                }
            }
        };
        ThresholdRule::new(c, correction)
    }
}

/// Fitted `η̂` and group posterior, usable wherever exact posteriors are.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlugInEstimates {
    attribute: AttributeMode,
    num_groups: usize,
    /// On `x`, or on `x` with a one-hot group indicator when attribute-aware.
    eta: LinearProbabilityModel,
    /// Fitted only when attribute-blind.
    joint: Option<FittedGammaOracle>,
    events: Vec<[f64; 2]>,
    pub warnings: Vec<String>,
}

impl PlugInEstimates {
    pub fn fit(train: &Dataset, config: &PipelineConfig) -> Result<Self> {
        let est = config.estimation_config();
        let m = train.num_groups();
        let labels = train.labels();
        let mut warnings = Vec::new();
        let (eta, report) = match config.attribute {
            AttributeMode::Blind => fit_binary(&train.features(), &labels, None, &est)?,
            AttributeMode::Aware => {
                let rows: Vec<Vec<f64>> = train
                    .samples()
                    .iter()
                    .zip(train.groups())
                    .map(|(s, &g)| with_group_indicator(&s.features, g, m))
                    .collect();
                let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
                fit_binary(&refs, &labels, None, &est)?
            }
        };
        warnings.extend(report.warnings);
        let events = frequency_distribution(train)?
            .marginals()
            .p_event
            .iter()
            .map(|e| [e[0], e[1]])
            .collect();
        let joint = match config.attribute {
            AttributeMode::Blind => {
                let j = fit_joint(&train.features(), train.groups(), &labels, m, &est, config.joint_strategy)?;
                warnings.extend(j.warnings.clone());
                Some(j)
            }
            AttributeMode::Aware => None,
        };
        Ok(Self {
            attribute: config.attribute,
            num_groups: m,
            eta,
            joint,
            events,
            warnings,
        })
    }

    pub fn attribute(&self) -> AttributeMode {
        self.attribute
    }

    pub fn dim(&self) -> usize {
        match self.attribute {
            AttributeMode::Blind => self.eta.dim(),
            AttributeMode::Aware => self.eta.dim() - self.num_groups,
        }
    }

    pub fn eta_model(&self) -> &LinearProbabilityModel {
        &self.eta
    }

    pub fn joint_model(&self) -> Option<&FittedGammaOracle> {
        self.joint.as_ref()
    }

    /// `η̂(x)`, or `η̂(x, s)` when attribute-aware.
    pub fn eta(&self, x: &[f64], group: Option<usize>) -> Result<f64> {
        match self.attribute {
            AttributeMode::Blind => self.eta.predict_positive(x),
            AttributeMode::Aware => {
                let s = aware_group(group, self.num_groups)?;
                self.eta.predict_positive(&with_group_indicator(x, s, self.num_groups))
            }
        }
    }
}

fn aware_group(group: Option<usize>, num_groups: usize) -> Result<usize> {
    let s = group.ok_or_else(|| FairError::Domain("attribute-aware prediction needs the group".into()))?;
    if s >= num_groups {
        return domain(format!("group {} outside [1, {}]", s + 1, num_groups));
    }
    Ok(s)
}

impl GammaOracle for PlugInEstimates {
    type Input = [f64];

    fn event_masses(&self) -> &[[f64; 2]] {
        &self.events
    }

    fn posterior(&self, x: &[f64], group: Option<usize>) -> Result<PointPosterior> {
        let eta = self.eta(x, group)?;
        match (&self.joint, self.attribute) {
            (Some(joint), AttributeMode::Blind) => Ok(PointPosterior {
                eta,
                joint: joint.joint(x)?,
            }),
            _ => Ok(PointPosterior::aware(eta, aware_group(group, self.num_groups)?, self.num_groups)),
        }
    }
}

/// Threshold classifier over any posterior source.
pub fn postprocess_with<O: GammaOracle>(
    oracle: O,
    tables: &ConstraintTables,
    lambda: &[f64],
    c: f64,
    alpha: f64,
) -> Result<ThresholdClassifier<O>> {
    ThresholdClassifier::new(oracle, tables.rule(c, lambda)?, alpha)
}

/// Plug-in fair classifier fitted on `train` at multipliers `lambda`.
pub fn postprocess(
    train: &Dataset,
    lambda: &[f64],
    config: &PipelineConfig,
) -> Result<ThresholdClassifier<PlugInEstimates>> {
    Pipeline::fit(train, config)?.postprocess(lambda)
}

/// Moves negative weights onto the opposite label: `w·1[f ≠ y] = w + |w|·1[f ≠ 1 − y]`.
pub fn flip_negative_weights(labels: &[u8], weights: &[f64]) -> (Vec<u8>, Vec<f64>) {
    labels
        .iter()
        .zip(weights)
        .map(|(&y, &w)| if w < 0.0 { (1 - y, -w) } else { (y, w) })
        .unzip()
}

/// Weighted logistic fit of the fair cost-sensitive surrogate.
///
/// Row `i` weighs `mass_i · c_{y_i}(x_i)` with `c_0 = c0[i]` and `c_1 = 1 − c0[i]`.
pub fn cost_weighted_fit(
    rows: &[&[f64]],
    labels: &[u8],
    c0: &[f64],
    mass: Option<&[f64]>,
    config: &EstimationConfig,
) -> Result<(LinearProbabilityModel, FitReport)> {
    if c0.len() != labels.len() {
        return Err(FairError::DimensionMismatch {
            expected: labels.len(),
            got: c0.len(),
        });
    }
    let weights: Vec<f64> = labels
        .iter()
        .zip(c0)
        .enumerate()
        .map(|(i, (&y, &c))| {
            let cost = if y == 1 { 1.0 - c } else { c };
            cost * mass.map_or(1.0, |m| m[i])
        })
        .collect();
    let (flipped, magnitudes) = flip_negative_weights(labels, &weights);
    if !(magnitudes.iter().sum::<f64>() > 0.0) {
        return Err(FairError::Degenerate("all cost-sensitive weights are zero".into()));
    }
    fit_binary(rows, &flipped, Some(&magnitudes), config)
}

/// Classifier trained by minimizing the empirical fair cost-sensitive risk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InprocessClassifier {
    pub model: LinearProbabilityModel,
    pub attribute: AttributeMode,
    pub num_groups: usize,
    pub lambda: Vec<f64>,
    pub c: f64,
    pub alpha: f64,
}

impl InprocessClassifier {
    /// `P̂(accept | x) − 1/2` under the surrogate model.
    pub fn score(&self, x: &[f64], group: Option<usize>) -> Result<f64> {
        let p = match self.attribute {
            AttributeMode::Blind => self.model.predict_positive(x)?,
            AttributeMode::Aware => {
                let s = aware_group(group, self.num_groups)?;
                self.model.predict_positive(&with_group_indicator(x, s, self.num_groups))?
            }
        };
        Ok(p - 0.5)
    }

    pub fn accept_probability(&self, x: &[f64], group: Option<usize>) -> Result<f64> {
        decide(self.score(x, group)?, self.alpha)
    }
}

/// In-processing classifier fitted on `train` at multipliers `lambda`.
pub fn inprocess(train: &Dataset, lambda: &[f64], config: &PipelineConfig) -> Result<InprocessClassifier> {
    let pipeline = Pipeline::fit(train, config)?;
    let posts = posteriors(&pipeline.estimates, train)?;
    pipeline.inprocess_on(train, &posts, lambda)
}

/// A fitted fair classifier of either kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum FairClassifier {
    Postprocess {
        estimates: PlugInEstimates,
        rule: ThresholdRule,
        alpha: f64,
    },
    Inprocess(InprocessClassifier),
}

impl From<ThresholdClassifier<PlugInEstimates>> for FairClassifier {
    fn from(t: ThresholdClassifier<PlugInEstimates>) -> Self {
        Self::Postprocess {
            estimates: t.oracle().clone(),
            rule: t.rule().clone(),
            alpha: t.alpha(),
        }
    }
}

impl FairClassifier {
    pub fn method(&self) -> Method {
        match self {
            Self::Postprocess { .. } => Method::Postprocess,
            Self::Inprocess(_) => Method::Inprocess,
        }
    }

    pub fn lambda(&self) -> Vec<f64> {
        match self {
            Self::Postprocess { rule, .. } => rule.lambda_components(),
            Self::Inprocess(m) => m.lambda.clone(),
        }
    }

    pub fn attribute(&self) -> AttributeMode {
        match self {
            Self::Postprocess { estimates, .. } => estimates.attribute(),
            Self::Inprocess(m) => m.attribute,
        }
    }

    pub fn num_groups(&self) -> usize {
        match self {
            Self::Postprocess { estimates, .. } => estimates.num_groups,
            Self::Inprocess(m) => m.num_groups,
        }
    }

    /// Feature dimension expected by [`Self::accept_probability`].
    pub fn dim(&self) -> usize {
        match self {
            Self::Postprocess { estimates, .. } => estimates.dim(),
            Self::Inprocess(m) => match m.attribute {
                AttributeMode::Blind => m.model.dim(),
                AttributeMode::Aware => m.model.dim() - m.num_groups,
            },
        }
    }

    pub fn accept_probability(&self, x: &[f64], group: Option<usize>) -> Result<f64> {
        match self {
            Self::Postprocess { estimates, rule, alpha } => {
                let post = estimates.posterior(x, group)?;
                decide(rule.score(&post, estimates.event_masses())?, *alpha)
            }
            Self::Inprocess(m) => m.accept_probability(x, group),
        }
    }

    /// Acceptance probability of every row.
    pub fn predict(&self, dataset: &Dataset) -> Result<Vec<f64>> {
        if dataset.num_groups() != self.num_groups() {
            return Err(FairError::DimensionMismatch {
                expected: self.num_groups(),
                got: dataset.num_groups(),
            });
        }
        dataset
            .samples()
            .par_iter()
            .zip(dataset.groups().par_iter())
            .map(|(s, &g)| self.accept_probability(&s.features, Some(g)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Tune,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Tune => "tune",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Postprocess,
    Inprocess,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Postprocess => "postprocess",
            Method::Inprocess => "inprocess",
        })
    }
}

/// Accuracy, risk and fairness of predictions on one split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub cs_risk: f64,
    pub fairness_value: f64,
}

/// Evaluates per-row acceptance probabilities; independent mode reports the worst feature.
pub fn evaluate(predictions: &[f64], dataset: &Dataset, spec: &FairnessSpec, c: f64) -> Result<Evaluation> {
    let (cs_risk, accuracy) = empirical_risk(predictions, dataset, c)?;
    let fairness_value = match spec.mode {
        GroupMode::Intersectional => empirical_report(predictions, dataset, spec)?.value,
        GroupMode::Independent => {
            let values = empirical_independent_reports(predictions, dataset, spec)?.into_iter().map(|r| r.value);
            match spec.measure {
                Measure::MeanDifference => values.fold(0.0, f64::max),
                Measure::MeanRatio => values.fold(1.0, f64::min),
            }
        }
    };
    Ok(Evaluation {
        accuracy,
        cs_risk,
        fairness_value,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub lambda: Vec<f64>,
    pub accuracy: f64,
    pub cs_risk: f64,
    pub fairness_value: f64,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frontier {
    pub method: Method,
    pub notion: Notion,
    pub measure: Measure,
    pub delta: f64,
    /// Sorted by split, then fairness value, then multipliers.
    pub points: Vec<FrontierPoint>,
}

impl Frontier {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &FrontierPoint> {
        self.points.iter().filter(move |p| p.split == split)
    }

    /// The point of `split` evaluated at the same multipliers as `point`.
    pub fn counterpart(&self, point: &FrontierPoint, split: Split) -> Option<&FrontierPoint> {
        self.split(split).find(|p| p.lambda == point.lambda)
    }
}

fn compare_lambda(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or_else(|| a.len().cmp(&b.len()))
}

fn sort_points(points: &mut [FrontierPoint]) {
    points.sort_by(|a, b| {
        a.split
            .cmp(&b.split)
            .then(a.fairness_value.total_cmp(&b.fairness_value))
            .then_with(|| compare_lambda(&a.lambda, &b.lambda))
    });
}

fn l1(lambda: &[f64]) -> f64 {
    lambda.iter().map(|v| v.abs()).sum()
}

/// Tune-split point of minimal risk among those meeting `δ`; ties go to the smallest `‖λ‖₁`.
///
/// Fails with the closest point when none is feasible.
pub fn select_lambda(frontier: &Frontier, delta: f64, measure: Measure) -> Result<FrontierPoint> {
    let mut candidates: Vec<&FrontierPoint> = frontier.split(Split::Tune).collect();
    if candidates.is_empty() {
        candidates = frontier.points.iter().collect();
    }
    if candidates.is_empty() {
        return domain("cannot select from an empty frontier");
    }
    let best = candidates
        .iter()
        .filter(|p| measure.satisfied(p.fairness_value, delta, 0.0))
        .min_by(|a, b| {
            let risk = if (a.cs_risk - b.cs_risk).abs() <= 1e-12 {
                Ordering::Equal
            } else {
                a.cs_risk.total_cmp(&b.cs_risk)
            };
            risk.then(l1(&a.lambda).total_cmp(&l1(&b.lambda)))
                .then_with(|| compare_lambda(&a.lambda, &b.lambda))
        });
    match best {
        Some(p) => Ok((*p).clone()),
        None => {
            let violation = |p: &FrontierPoint| match measure {
                Measure::MeanDifference => p.fairness_value - delta,
                Measure::MeanRatio => delta - p.fairness_value,
            };
            let closest = candidates
                .iter()
                .min_by(|a, b| violation(a).total_cmp(&violation(b)))
                .expect("nonempty");
            Err(FairError::Infeasible(format!(
                "no {} point has {} {} {}; closest is lambda {:?} with {} {:.6} (accuracy {:.4})",
                closest.split,
                measure.short_name(),
                if measure == Measure::MeanDifference { "<=" } else { ">=" },
                delta,
                closest.lambda,
                measure.short_name(),
                closest.fairness_value,
                closest.accuracy
            )))
        }
    }
}

/// Posteriors of every row, attribute-aware estimates reading the row's group.
pub fn posteriors(estimates: &PlugInEstimates, dataset: &Dataset) -> Result<Vec<PointPosterior>> {
    dataset
        .samples()
        .par_iter()
        .zip(dataset.groups().par_iter())
        .map(|(s, &g)| estimates.posterior(&s.features, Some(g)))
        .collect()
}

fn accept_all(rule: &ThresholdRule, posts: &[PointPosterior], events: &[[f64; 2]], alpha: f64) -> Result<Vec<f64>> {
    posts.iter().map(|p| decide(rule.score(p, events)?, alpha)).collect()
}

/// Estimates and coefficient tables fitted on a training split.
#[derive(Debug, Clone, PartialEq)]
pub struct Pipeline {
    config: PipelineConfig,
    estimates: PlugInEstimates,
    tables: ConstraintTables,
}

impl Pipeline {
    pub fn fit(train: &Dataset, config: &PipelineConfig) -> Result<Self> {
        config.validate()?;
        let estimates = PlugInEstimates::fit(train, config)?;
        let tables = ConstraintTables::from_dataset(train, &config.fairness, config.eodds_form)?;
        Ok(Self {
            config: config.clone(),
            estimates,
            tables,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn estimates(&self) -> &PlugInEstimates {
        &self.estimates
    }

    pub fn tables(&self) -> &ConstraintTables {
        &self.tables
    }

    /// Warnings from estimation and from groups left out of the constraints.
    pub fn warnings(&self) -> Vec<String> {
        self.estimates.warnings.iter().cloned().chain(self.tables.warnings()).collect()
    }

    pub fn grid(&self) -> Result<Vec<Vec<f64>>> {
        self.config.grid.points(
            self.tables.dims(),
            self.tables.is_composite(),
            derive_seed(self.config.seed, SeedRole::Grid),
        )
    }

    pub fn rule(&self, lambda: &[f64]) -> Result<ThresholdRule> {
        self.tables.rule(self.config.c, lambda)
    }

    pub fn postprocess(&self, lambda: &[f64]) -> Result<ThresholdClassifier<PlugInEstimates>> {
        postprocess_with(self.estimates.clone(), &self.tables, lambda, self.config.c, self.config.alpha)
    }

    /// In-processing fit on `train`, whose posteriors are `posts`.
    pub fn inprocess_on(&self, train: &Dataset, posts: &[PointPosterior], lambda: &[f64]) -> Result<InprocessClassifier> {
        let rule = self.rule(lambda)?;
        let events = self.estimates.event_masses();
        let c0: Vec<f64> = posts
            .iter()
            .map(|p| Ok(rule.instance_costs(p, events)?.0))
            .collect::<Result<_>>()?;
        let m = train.num_groups();
        let est = self.config.estimation_config();
        let (model, _) = match self.config.attribute {
            AttributeMode::Blind => cost_weighted_fit(&train.features(), &train.labels(), &c0, None, &est)?,
            AttributeMode::Aware => {
                let rows: Vec<Vec<f64>> = train
                    .samples()
                    .iter()
                    .zip(train.groups())
                    .map(|(s, &g)| with_group_indicator(&s.features, g, m))
                    .collect();
                let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
                cost_weighted_fit(&refs, &train.labels(), &c0, None, &est)?
            }
        };
        Ok(InprocessClassifier {
            model,
            attribute: self.config.attribute,
            num_groups: m,
            lambda: lambda.to_vec(),
            c: self.config.c,
            alpha: self.config.alpha,
        })
    }

    fn postprocess_points(
        &self,
        grid: &[Vec<f64>],
        split: Split,
        data: &Dataset,
        posts: &[PointPosterior],
    ) -> Result<Vec<FrontierPoint>> {
        let events = self.estimates.event_masses();
        grid.par_iter()
            .map(|lambda| {
                let preds = accept_all(&self.rule(lambda)?, posts, events, self.config.alpha)?;
                let e = evaluate(&preds, data, &self.config.fairness, self.config.c)?;
                Ok(FrontierPoint {
                    lambda: lambda.clone(),
                    accuracy: e.accuracy,
                    cs_risk: e.cs_risk,
                    fairness_value: e.fairness_value,
                    split,
                })
            })
            .collect()
    }

    /// Post-processing tune points chosen to seed in-processing: λ = 0 plus
    /// feasible points spread evenly over their risk order, topped up with
    /// the least infeasible ones.
    pub fn warm_start_candidates(&self, tune_points: &[FrontierPoint]) -> Vec<Vec<f64>> {
        let k = self.config.warm_start_candidates.max(1);
        let spec = &self.config.fairness;
        let (mut feasible, mut infeasible): (Vec<&FrontierPoint>, Vec<&FrontierPoint>) = tune_points
            .iter()
            .partition(|p| spec.measure.satisfied(p.fairness_value, spec.delta, 0.0));
        feasible.sort_by(|a, b| a.cs_risk.total_cmp(&b.cs_risk).then_with(|| compare_lambda(&a.lambda, &b.lambda)));
        infeasible.sort_by(|a, b| {
            let fairer = if spec.measure.at_least_as_fair(a.fairness_value, b.fairness_value) {
                Ordering::Less
            } else {
                Ordering::Greater
            };
            if a.fairness_value == b.fairness_value {
                compare_lambda(&a.lambda, &b.lambda)
            } else {
                fairer
            }
        });
        let mut chosen: Vec<Vec<f64>> = vec![vec![0.0; self.tables.dims()]];
        let take = k.min(feasible.len());
        for j in 0..take {
            let idx = if take == 1 { 0 } else { j * (feasible.len() - 1) / (take - 1) };
            chosen.push(feasible[idx].lambda.clone());
        }
        chosen.extend(infeasible.iter().take(k - take).map(|p| p.lambda.clone()));
        let mut unique: Vec<Vec<f64>> = Vec::with_capacity(chosen.len());
        for c in chosen {
            if !unique.contains(&c) {
                unique.push(c);
            }
        }
        unique
    }

    /// Frontier over the configured grid, evaluated on the tune and test splits.
    pub fn frontier(&self, splits: &Splits, method: Method) -> Result<Frontier> {
        let grid = self.grid()?;
        let tune_posts = posteriors(&self.estimates, &splits.tune)?;
        let mut points = match method {
            Method::Postprocess => {
                let test_posts = posteriors(&self.estimates, &splits.test)?;
                let mut p = self.postprocess_points(&grid, Split::Tune, &splits.tune, &tune_posts)?;
                p.extend(self.postprocess_points(&grid, Split::Test, &splits.test, &test_posts)?);
                p
            }
            Method::Inprocess => {
                let lambdas = if self.config.warm_start {
                    let tune = self.postprocess_points(&grid, Split::Tune, &splits.tune, &tune_posts)?;
                    self.warm_start_candidates(&tune)
                } else {
                    grid
                };
                let train_posts = posteriors(&self.estimates, &splits.train)?;
                let per_lambda: Vec<Vec<FrontierPoint>> = lambdas
                    .par_iter()
                    .map(|lambda| {
                        let model = FairClassifier::Inprocess(self.inprocess_on(&splits.train, &train_posts, lambda)?);
                        [(Split::Tune, &splits.tune), (Split::Test, &splits.test)]
                            .into_iter()
                            .map(|(split, data)| {
                                let e = evaluate(&model.predict(data)?, data, &self.config.fairness, self.config.c)?;
                                Ok(FrontierPoint {
                                    lambda: lambda.clone(),
                                    accuracy: e.accuracy,
                                    cs_risk: e.cs_risk,
                                    fairness_value: e.fairness_value,
                                    split,
                                })
                            })
                            .collect()
                    })
                    .collect::<Result<_>>()?;
                per_lambda.into_iter().flatten().collect()
            }
        };
        sort_points(&mut points);
        Ok(Frontier {
            method,
            notion: self.config.fairness.notion,
            measure: self.config.fairness.measure,
            delta: self.config.fairness.delta,
            points,
        })
    }

    /// Final classifier of `method` at `lambda`.
    pub fn classifier(&self, train: &Dataset, method: Method, lambda: &[f64]) -> Result<FairClassifier> {
        Ok(match method {
            Method::Postprocess => self.postprocess(lambda)?.into(),
            Method::Inprocess => {
                let posts = posteriors(&self.estimates, train)?;
                FairClassifier::Inprocess(self.inprocess_on(train, &posts, lambda)?)
            }
        })
    }
}

/// Frontier of `method` fitted on `splits.train`.
pub fn frontier(splits: &Splits, config: &PipelineConfig, method: Method) -> Result<Frontier> {
    Pipeline::fit(&splits.train, config)?.frontier(splits, method)
}

/// Parameters of the synthetic benchmark.
///
/// Rows draw `S ~ Bernoulli(1/2)`, then `x₁ ~ N(±shift, 1)` (plus for group
/// 2), `x₂, x₃ ~ N(0, 1)`, and `Y ~ Bernoulli(σ(group_weight·x₁ +
/// feature_weight·x₂))`. `x₃` is pure noise. The sensitive attribute is a single
/// two-level feature named `group`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub n: usize,
    pub shift: f64,
    pub group_weight: f64,
    pub feature_weight: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n: 20_000,
            shift: 1.0,
            group_weight: 0.5,
            feature_weight: 1.0,
            seed: 0,
        }
    }
}

pub fn synthetic_dataset(config: &SyntheticConfig) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, SeedRole::Synthetic));
    let normal = Normal::new(0.0, 1.0).expect("valid normal");
    let samples = (0..config.n)
        .map(|_| {
            let s = rng.random_bool(0.5) as usize;
            let sign = if s == 1 { 1.0 } else { -1.0 };
            let x1 = sign * config.shift + normal.sample(&mut rng);
            let x2: f64 = normal.sample(&mut rng);
            let x3: f64 = normal.sample(&mut rng);
            let logit = config.group_weight * x1 + config.feature_weight * x2;
            let y = rng.random_bool(1.0 / (1.0 + (-logit).exp())) as u8;
            Sample {
                features: vec![x1, x2, x3],
                sensitive: vec![s],
                label: y,
            }
        })
        .collect();
    let spec = SensitiveSpec::new(
        vec![SensitiveFeature {
            name: "group".into(),
            cardinality: 2,
        }],
        GroupMode::Intersectional,
    )?;
    Dataset::new(spec, samples)
}
