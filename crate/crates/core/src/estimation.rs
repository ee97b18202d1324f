//! Linear probability models for `η(x)` and the group posterior `P(S, Y | X)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, FairError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimationConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
    /// Probabilities are clipped to `[clip, 1 − clip]`.
    pub clip: f64,
    /// Seeds the small random initialization of the weights.
    pub seed: u64,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            epochs: 500,
            l2: 1e-4,
            clip: 1e-6,
            seed: 0,
        }
    }
}

impl EstimationConfig {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return domain(format!("learning rate {} must be positive", self.learning_rate));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return domain(format!("L2 strength {} must be non-negative", self.l2));
        }
        if !(0.0..0.5).contains(&self.clip) {
            return domain(format!("clip floor {} outside [0, 0.5)", self.clip));
        }
        Ok(())
    }
}

/// Per-column centering and scaling fitted on the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[&[f64]], dim: usize) -> Self {
        let n = rows.len().max(1) as f64;
        let mut mean = vec![0.0; dim];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r.iter()) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; dim];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r.iter()).zip(&mean) {
                *s += (v - m).powi(2) / n;
            }
        }
        let scale = var
            .into_iter()
            .map(|v| if v > 1e-24 { v.sqrt() } else { 1.0 })
            .collect();
        Self { mean, scale }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

/// Logistic (two classes) or softmax (more classes) model on standardized inputs.
///
/// `weights` holds one row of `dim + 1` entries per score, intercept last; a
/// binary model has a single score row, the logit of class 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProbabilityModel {
    classes: usize,
    dim: usize,
    weights: Vec<f64>,
    standardizer: Standardizer,
    clip: f64,
}

/// Loss trace and diagnostics of a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct FitReport {
    pub losses: Vec<f64>,
    pub warnings: Vec<String>,
    pub degenerate: bool,
}

fn score_rows(classes: usize) -> usize {
    if classes == 2 {
        1
    } else {
        classes
    }
}

fn raw_probabilities(classes: usize, params: &[f64], z: &[f64]) -> Vec<f64> {
    let width = z.len() + 1;
    let score = |k: usize| -> f64 {
        let row = &params[k * width..(k + 1) * width];
        row[..z.len()].iter().zip(z).map(|(w, v)| w * v).sum::<f64>() + row[z.len()]
    };
    if classes == 2 {
        let p = sigmoid(score(0));
        vec![1.0 - p, p]
    } else {
        let scores: Vec<f64> = (0..classes).map(score).collect();
        let top = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exp: Vec<f64> = scores.iter().map(|s| (s - top).exp()).collect();
        let total: f64 = exp.iter().sum();
        exp.into_iter().map(|e| e / total).collect()
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Clips to `[eps, 1 − eps]` and renormalizes.
pub fn clip_and_normalize(p: &mut [f64], eps: f64) {
    for v in p.iter_mut() {
        *v = v.clamp(eps, 1.0 - eps);
    }
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= total);
}

/// Weighted mean log loss plus `l2/2 · ||W||²` (intercepts unpenalized), and its gradient.
///
/// `inputs` are already standardized; `params` is laid out as in
/// [`LinearProbabilityModel`].
pub fn log_loss_gradient(
    params: &[f64],
    classes: usize,
    inputs: &[Vec<f64>],
    targets: &[usize],
    weights: &[f64],
    l2: f64,
) -> (f64, Vec<f64>) {
    let dim = inputs.first().map_or(0, Vec::len);
    let width = dim + 1;
    let rows = score_rows(classes);
    let total_weight: f64 = weights.iter().sum();
    let mut loss = 0.0;
    let mut grad = vec![0.0; params.len()];
    for ((z, &t), &w) in inputs.iter().zip(targets).zip(weights) {
        if w == 0.0 {
            continue;
        }
        let p = raw_probabilities(classes, params, z);
        loss -= w * p[t].max(f64::MIN_POSITIVE).ln();
        for k in 0..rows {
            let residual = if classes == 2 {
                p[1] - (t == 1) as u8 as f64
            } else {
                p[k] - (t == k) as u8 as f64
            };
            let coef = w * residual;
            let row = &mut grad[k * width..(k + 1) * width];
            for (g, v) in row[..dim].iter_mut().zip(z) {
                *g += coef * v;
            }
            row[dim] += coef;
        }
    }
    loss /= total_weight;
    grad.iter_mut().for_each(|g| *g /= total_weight);
    for k in 0..rows {
        for j in 0..dim {
            let w = params[k * width + j];
            loss += 0.5 * l2 * w * w;
            grad[k * width + j] += l2 * w;
        }
    }
    (loss, grad)
}

impl LinearProbabilityModel {
    /// All-zero weights: uniform predictions.
    pub fn zeros(classes: usize, dim: usize, clip: f64) -> Self {
        Self {
            classes,
            dim,
            weights: vec![0.0; score_rows(classes) * (dim + 1)],
            standardizer: Standardizer {
                mean: vec![0.0; dim],
                scale: vec![1.0; dim],
            },
            clip,
        }
    }

    pub fn from_parts(
        classes: usize,
        weights: Vec<f64>,
        standardizer: Standardizer,
        clip: f64,
    ) -> Result<Self> {
        let dim = standardizer.mean.len();
        if classes < 2 {
            return domain("a probability model needs at least two classes");
        }
        if weights.len() != score_rows(classes) * (dim + 1) {
            return Err(FairError::DimensionMismatch {
                expected: score_rows(classes) * (dim + 1),
                got: weights.len(),
            });
        }
        Ok(Self {
            classes,
            dim,
            weights,
            standardizer,
            clip,
        })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Class probabilities at `x`, clipped and renormalized.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(FairError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let z = self.standardizer.apply(x);
        let mut p = raw_probabilities(self.classes, &self.weights, &z);
        clip_and_normalize(&mut p, self.clip);
        Ok(p)
    }

    /// `P(class 1 | x)` of a binary model.
    pub fn predict_positive(&self, x: &[f64]) -> Result<f64> {
        if self.classes != 2 {
            return domain("predict_positive needs a binary model");
        }
        Ok(self.predict(x)?[1])
    }

    /// Weighted multinomial fit by full-batch gradient descent.
    ///
    /// Each step halves the learning rate until the loss does not increase, so
    /// the recorded loss trace is non-increasing.
    pub fn fit(
        rows: &[&[f64]],
        targets: &[usize],
        classes: usize,
        weights: Option<&[f64]>,
        config: &EstimationConfig,
    ) -> Result<(Self, FitReport)> {
        config.validate()?;
        if classes < 2 {
            return domain("a probability model needs at least two classes");
        }
        if rows.is_empty() {
            return Err(FairError::Degenerate("no training rows".into()));
        }
        if targets.len() != rows.len() {
            return Err(FairError::DimensionMismatch {
                expected: rows.len(),
                got: targets.len(),
            });
        }
        let dim = rows[0].len();
        if let Some(r) = rows.iter().find(|r| r.len() != dim) {
            return Err(FairError::DimensionMismatch {
                expected: dim,
                got: r.len(),
            });
        }
        if let Some(t) = targets.iter().find(|&&t| t >= classes) {
            return domain(format!("target {} outside {} classes", t, classes));
        }
        let weights: Vec<f64> = match weights {
            Some(w) if w.len() != rows.len() => {
                return Err(FairError::DimensionMismatch {
                    expected: rows.len(),
                    got: w.len(),
                })
            }
            Some(w) => {
                if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return domain("sample weights must be finite and non-negative");
                }
                w.to_vec()
            }
            None => vec![1.0; rows.len()],
        };
        if !(weights.iter().sum::<f64>() > 0.0) {
            return Err(FairError::Degenerate("all sample weights are zero".into()));
        }
        let standardizer = Standardizer::fit(rows, dim);
        let inputs: Vec<Vec<f64>> = rows.iter().map(|r| standardizer.apply(r)).collect();

        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let jitter = Normal::new(0.0, 1e-3).expect("valid normal");
        let mut params: Vec<f64> = (0..score_rows(classes) * (dim + 1))
            .map(|_| jitter.sample(&mut rng))
            .collect();
        let (mut loss, mut grad) =
            log_loss_gradient(&params, classes, &inputs, targets, &weights, config.l2);
        let mut report = FitReport {
            losses: vec![loss],
            ..Default::default()
        };
        for _ in 0..config.epochs {
            let mut step = config.learning_rate;
            let mut accepted = None;
            for _ in 0..40 {
                let candidate: Vec<f64> = params.iter().zip(&grad).map(|(p, g)| p - step * g).collect();
                let (l, g) = log_loss_gradient(&candidate, classes, &inputs, targets, &weights, config.l2);
                if l.is_finite() && l <= loss {
                    accepted = Some((candidate, l, g));
                    break;
                }
                step *= 0.5;
            }
            match accepted {
                Some((p, l, g)) => {
                    params = p;
                    loss = l;
                    grad = g;
                    report.losses.push(loss);
                }
                None => break,
            }
        }
        Ok((
            Self {
                classes,
                dim,
                weights: params,
                standardizer,
                clip: config.clip,
            },
            report,
        ))
    }
}

/// Fits `η(x) = P(Y = 1 | x)`; single-class data yields a constant model with a warning.
pub fn fit_binary(
    rows: &[&[f64]],
    labels: &[u8],
    weights: Option<&[f64]>,
    config: &EstimationConfig,
) -> Result<(LinearProbabilityModel, FitReport)> {
    if rows.is_empty() {
        return Err(FairError::Degenerate("no training rows".into()));
    }
    if let Some(l) = labels.iter().find(|&&l| l > 1) {
        return domain(format!("label {} is not binary", l));
    }
    let positives = labels.iter().filter(|&&l| l == 1).count();
    if positives == 0 || positives == labels.len() {
        let dim = rows[0].len();
        let msg = format!(
            "single-class training data ({} rows, all labelled {}); using a constant model",
            labels.len(),
            (positives > 0) as u8
        );
        log::warn!("{}", msg);
        let mut model = LinearProbabilityModel::zeros(2, dim, config.clip);
        let p = if positives == 0 { config.clip } else { 1.0 - config.clip };
        let logit = (p / (1.0 - p)).ln();
        model.weights[dim] = if logit.is_finite() { logit } else { logit.signum() * 40.0 };
        return Ok((
            model,
            FitReport {
                losses: Vec::new(),
                warnings: vec![msg],
                degenerate: true,
            },
        ));
    }
    let targets: Vec<usize> = labels.iter().map(|&l| l as usize).collect();
    LinearProbabilityModel::fit(rows, &targets, 2, weights, config)
}

/// Appends a one-hot indicator of `group` to `x`.
pub fn with_group_indicator(x: &[f64], group: usize, num_groups: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len() + num_groups);
    out.extend_from_slice(x);
    out.extend((0..num_groups).map(|g| (g == group) as u8 as f64));
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum JointStrategy {
    /// One softmax over all `2M` cells `(m, y)`, class index `2m + y`.
    Direct,
    /// A softmax over groups times one binary label model per group.
    #[default]
    Factored,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum JointModel {
    Direct {
        model: LinearProbabilityModel,
        /// Retained `(m, y)` cells in class order.
        cells: Vec<(usize, usize)>,
    },
    Factored {
        /// `None` when a single group is retained.
        group_model: Option<LinearProbabilityModel>,
        /// Retained groups in class order.
        groups: Vec<usize>,
        label_models: Vec<LinearProbabilityModel>,
    },
}

/// Fitted `P̂(S, Y | X)` with empirical `P̂(E_{y,m})` from the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedGammaOracle {
    model: JointModel,
    events: Vec<[f64; 2]>,
    retained: Vec<bool>,
    clip: f64,
    pub warnings: Vec<String>,
}

impl FittedGammaOracle {
    pub fn num_groups(&self) -> usize {
        self.events.len()
    }

    pub fn event_masses(&self) -> &[[f64; 2]] {
        &self.events
    }

    pub fn retained(&self) -> &[bool] {
        &self.retained
    }

    pub fn model(&self) -> &JointModel {
        &self.model
    }

    /// `P̂(S = m, Y = y | x)`, zero for dropped groups.
    pub fn joint(&self, x: &[f64]) -> Result<Vec<[f64; 2]>> {
        let mut out = vec![[0.0; 2]; self.num_groups()];
        match &self.model {
            JointModel::Direct { model, cells } => {
                let p = model.predict(x)?;
                for (&(m, y), v) in cells.iter().zip(p) {
                    out[m][y] = v;
                }
            }
            JointModel::Factored {
                group_model,
                groups,
                label_models,
            } => {
                let pg = match group_model {
                    Some(g) => g.predict(x)?,
                    None => vec![1.0],
                };
                for ((&m, label), w) in groups.iter().zip(label_models).zip(pg) {
                    let py = label.predict(x)?;
                    out[m] = [w * py[0], w * py[1]];
                }
                let mut flat: Vec<f64> = groups.iter().flat_map(|&m| out[m]).collect();
                clip_and_normalize(&mut flat, self.clip);
                for (k, &m) in groups.iter().enumerate() {
                    out[m] = [flat[2 * k], flat[2 * k + 1]];
                }
            }
        }
        Ok(out)
    }

    /// `γ̂_m^y(x)`, `None` where `P̂(E_{y,m}) = 0`.
    pub fn gamma(&self, x: &[f64], m: usize, y: usize) -> Result<Option<f64>> {
        let joint = self.joint(x)?;
        let e = self.events[m][y];
        Ok((e > 0.0).then(|| joint[m][y] / e))
    }
}

/// Fits the group posterior; groups lacking training rows are dropped with a warning.
pub fn fit_joint(
    rows: &[&[f64]],
    groups: &[usize],
    labels: &[u8],
    num_groups: usize,
    config: &EstimationConfig,
    strategy: JointStrategy,
) -> Result<FittedGammaOracle> {
    if rows.is_empty() {
        return Err(FairError::Degenerate("no training rows".into()));
    }
    if groups.len() != rows.len() || labels.len() != rows.len() {
        return Err(FairError::DimensionMismatch {
            expected: rows.len(),
            got: groups.len().min(labels.len()),
        });
    }
    if let Some(g) = groups.iter().find(|&&g| g >= num_groups) {
        return domain(format!("group {} outside [1, {}]", g + 1, num_groups));
    }
    let mut counts = vec![[0usize; 2]; num_groups];
    for (&g, &y) in groups.iter().zip(labels) {
        counts[g][y as usize] += 1;
    }
    let n = rows.len() as f64;
    let events: Vec<[f64; 2]> = counts
        .iter()
        .map(|c| [c[0] as f64 / n, c[1] as f64 / n])
        .collect();
    let mut warnings = Vec::new();
    let retained: Vec<bool> = (0..num_groups)
        .map(|m| {
            let keep = match strategy {
                JointStrategy::Direct => counts[m][0] > 0 && counts[m][1] > 0,
                JointStrategy::Factored => counts[m][0] + counts[m][1] > 0,
            };
            if !keep {
                let msg = format!("group {} dropped: no training rows in a required cell", m + 1);
                log::warn!("{}", msg);
                warnings.push(msg);
            }
            keep
        })
        .collect();
    let kept: Vec<usize> = (0..num_groups).filter(|&m| retained[m]).collect();
    if kept.is_empty() {
        return Err(FairError::Degenerate("every group was dropped".into()));
    }
    let model = match strategy {
        JointStrategy::Direct => {
            let cells: Vec<(usize, usize)> = kept.iter().flat_map(|&m| [(m, 0), (m, 1)]).collect();
            let class_of = |g: usize, y: u8| cells.iter().position(|&c| c == (g, y as usize));
            let (sub_rows, targets): (Vec<&[f64]>, Vec<usize>) = rows
                .iter()
                .zip(groups.iter().zip(labels))
                .filter_map(|(r, (&g, &y))| class_of(g, y).map(|t| (*r, t)))
                .unzip();
            let (model, _) = LinearProbabilityModel::fit(&sub_rows, &targets, cells.len(), None, config)?;
            JointModel::Direct { model, cells }
        }
        JointStrategy::Factored => {
            let (sub_rows, targets): (Vec<&[f64]>, Vec<usize>) = rows
                .iter()
                .zip(groups)
                .filter_map(|(r, g)| kept.iter().position(|k| k == g).map(|t| (*r, t)))
                .unzip();
            let group_model = if kept.len() > 1 {
                Some(LinearProbabilityModel::fit(&sub_rows, &targets, kept.len(), None, config)?.0)
            } else {
                None
            };
            let fits: Vec<Result<(LinearProbabilityModel, FitReport)>> = kept
                .par_iter()
                .map(|&m| {
                    let (r, y): (Vec<&[f64]>, Vec<u8>) = rows
                        .iter()
                        .zip(groups.iter().zip(labels))
                        .filter(|(_, (&g, _))| g == m)
                        .map(|(r, (_, &y))| (*r, y))
                        .unzip();
                    fit_binary(&r, &y, None, config)
                })
                .collect();
            let mut label_models = Vec::with_capacity(kept.len());
            for (fit, &m) in fits.into_iter().zip(&kept) {
                let (model, report) = fit?;
                warnings.extend(report.warnings.into_iter().map(|w| format!("group {}: {}", m + 1, w)));
                label_models.push(model);
            }
            JointModel::Factored {
                group_model,
                groups: kept,
                label_models,
            }
        }
    };
    Ok(FittedGammaOracle {
        model,
        events,
        retained,
        clip: config.clip,
        warnings,
    })
}
