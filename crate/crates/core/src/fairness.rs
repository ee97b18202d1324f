//! Fairness notions, measures and tolerance specifications.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, FairError, Result};
use crate::groups::GroupMode;

/// Group fairness notion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Notion {
    /// Demographic parity: equal positive rate.
    #[serde(rename = "DP")]
    DemographicParity,
    /// Equal opportunity: equal true positive rate.
    #[serde(rename = "EO")]
    EqualOpportunity,
    /// Predictive equality: equal false positive rate.
    #[serde(rename = "PE")]
    PredictiveEquality,
    /// Accuracy parity: equal error rate.
    #[serde(rename = "AP")]
    AccuracyParity,
    /// Equal opportunity and predictive equality together.
    #[serde(rename = "EqualizedOdds")]
    EqualizedOdds,
}

impl Notion {
    /// The four elementary notions.
    pub const ELEMENTARY: [Notion; 4] = [
        Notion::DemographicParity,
        Notion::EqualOpportunity,
        Notion::PredictiveEquality,
        Notion::AccuracyParity,
    ];

    /// Elementary notions a composite notion is made of.
    pub fn components(self) -> Vec<Notion> {
        match self {
            Notion::EqualizedOdds => vec![Notion::EqualOpportunity, Notion::PredictiveEquality],
            n => vec![n],
        }
    }

    pub fn is_composite(self) -> bool {
        matches!(self, Notion::EqualizedOdds)
    }

    /// Label value `z` the notion conditions on, if any (`Z = Y`).
    pub fn conditioning_label(self) -> Option<usize> {
        match self {
            Notion::EqualOpportunity => Some(1),
            Notion::PredictiveEquality => Some(0),
            _ => None,
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            Notion::DemographicParity => "DP",
            Notion::EqualOpportunity => "EO",
            Notion::PredictiveEquality => "PE",
            Notion::AccuracyParity => "AP",
            Notion::EqualizedOdds => "EqualizedOdds",
        }
    }
}

impl fmt::Display for Notion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for Notion {
    type Err = FairError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dp" | "demographic_parity" => Ok(Notion::DemographicParity),
            "eo" | "equal_opportunity" => Ok(Notion::EqualOpportunity),
            "pe" | "predictive_equality" => Ok(Notion::PredictiveEquality),
            "ap" | "accuracy_parity" => Ok(Notion::AccuracyParity),
            "equalizedodds" | "equalized_odds" | "eodds" => Ok(Notion::EqualizedOdds),
            _ => domain(format!("unknown fairness notion '{}'", s)),
        }
    }
}

/// Approximate fairness measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Measure {
    /// Mean difference; fair when `MD(f) <= δ`.
    #[serde(rename = "MD")]
    MeanDifference,
    /// Mean ratio; fair when `MR(f) >= δ`.
    #[serde(rename = "MR")]
    MeanRatio,
}

impl Measure {
    pub const ALL: [Measure; 2] = [Measure::MeanDifference, Measure::MeanRatio];

    /// Feasible interval for the per-group linear form.
    pub fn linear_bounds(self, delta: f64) -> (f64, f64) {
        match self {
            Measure::MeanDifference => (-delta, delta),
            Measure::MeanRatio => (delta - 1.0, 0.0),
        }
    }

    /// Multiplier on `Λ_M a_m` in the threshold correction.
    pub fn lambda_scale(self, delta: f64) -> f64 {
        match self {
            Measure::MeanDifference => 1.0,
            Measure::MeanRatio => delta,
        }
    }

    /// Whether `value` satisfies the tolerance `δ`, up to `slack`.
    pub fn satisfied(self, value: f64, delta: f64, slack: f64) -> bool {
        match self {
            Measure::MeanDifference => value <= delta + slack,
            Measure::MeanRatio => value >= delta - slack,
        }
    }

    /// Whether `a` is at least as fair as `b`.
    pub fn at_least_as_fair(self, a: f64, b: f64) -> bool {
        match self {
            Measure::MeanDifference => a <= b,
            Measure::MeanRatio => a >= b,
        }
    }

    /// Value of a perfectly fair classifier.
    pub fn perfect(self) -> f64 {
        match self {
            Measure::MeanDifference => 0.0,
            Measure::MeanRatio => 1.0,
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            Measure::MeanDifference => "MD",
            Measure::MeanRatio => "MR",
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for Measure {
    type Err = FairError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "md" | "mean_difference" => Ok(Measure::MeanDifference),
            "mr" | "mean_ratio" => Ok(Measure::MeanRatio),
            _ => domain(format!("unknown fairness measure '{}'", s)),
        }
    }
}

/// Slack on the `satisfied` comparisons, absorbing float noise.
pub const SATISFIED_SLACK: f64 = 1e-9;

/// A fairness requirement: notion, measure, tolerance and group mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FairnessSpec {
    pub notion: Notion,
    pub measure: Measure,
    pub delta: f64,
    #[serde(default)]
    pub mode: GroupMode,
}

impl FairnessSpec {
    pub fn new(notion: Notion, measure: Measure, delta: f64) -> Result<Self> {
        Self::with_mode(notion, measure, delta, GroupMode::Intersectional)
    }

    pub fn with_mode(notion: Notion, measure: Measure, delta: f64, mode: GroupMode) -> Result<Self> {
        if !(0.0..=1.0).contains(&delta) {
            return domain(format!("tolerance {} outside [0, 1]", delta));
        }
        Ok(Self {
            notion,
            measure,
            delta,
            mode,
        })
    }

    pub fn satisfied_by(&self, value: f64) -> bool {
        self.measure.satisfied(value, self.delta, SATISFIED_SLACK)
    }
}
