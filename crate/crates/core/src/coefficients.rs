//! Coefficients of the per-group linear fairness forms.
//!
//! Every elementary notion writes its per-group disparity as
//! `Σ_y [Σ_m' a_m' b_m'^y r(y, m') − b_m^y r(y, m) + c_m^y]`, where
//! `r(y, m) = P(Ŷ = 1 | Y = y, S = m)`. The mean-ratio form carries an extra
//! factor `δ` on the population sum.

use serde::{Deserialize, Serialize};

use crate::distribution::MarginalSet;
use crate::error::{domain, FairError, Result};
use crate::fairness::{Measure, Notion};

/// Sign convention for the accuracy-parity constant under the mean ratio.
///
/// Two published forms of `c_m^y` differ by an overall sign:
/// `Appendix` is `δ(1−y)p⁺ − y P_{Y|S=m}(1)` and `MainTable` is
/// `(y−1)δp⁺ + y P_{Y|S=m}(1)`. Only `Appendix` makes the linear form equal
/// `δ P(error) − P(error | S = m)`, as checked by
/// [`resolve_ap_mr_sign`](crate::oracle::resolve_ap_mr_sign).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ApMrConvention {
    #[default]
    Appendix,
    MainTable,
}

impl ApMrConvention {
    pub const ALL: [ApMrConvention; 2] = [ApMrConvention::Appendix, ApMrConvention::MainTable];
}

/// `(a_m, b_m^y, c_m^y)` for one notion and measure.
///
/// Groups whose conditioning event has zero mass are excluded: their
/// coefficients are zero and a warning is recorded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientTable {
    pub notion: Notion,
    pub measure: Measure,
    pub delta: f64,
    /// `a_m`.
    pub a: Vec<f64>,
    /// `b_m^y`, indexed `[m][y]`.
    pub b: Vec<[f64; 2]>,
    /// `c_m^y`, indexed `[m][y]`.
    pub c: Vec<[f64; 2]>,
    pub included: Vec<bool>,
    pub warnings: Vec<String>,
    /// Set for accuracy parity under the mean ratio.
    pub ap_mr_convention: Option<ApMrConvention>,
}

impl CoefficientTable {
    pub fn num_groups(&self) -> usize {
        self.a.len()
    }

    pub fn is_included(&self, m: usize) -> bool {
        self.included[m]
    }

    /// Zero-based indices of excluded groups.
    pub fn excluded(&self) -> Vec<usize> {
        (0..self.num_groups()).filter(|&m| !self.included[m]).collect()
    }

    /// `Σ_y c_m^y`, the constant offset of group `m`'s linear form.
    pub fn offset(&self, m: usize) -> f64 {
        self.c[m][0] + self.c[m][1]
    }

    /// Multiplier on the population sum: 1 for MD, `δ` for MR.
    pub fn population_scale(&self) -> f64 {
        self.measure.lambda_scale(self.delta)
    }
}

/// Coefficients with the default accuracy-parity convention.
pub fn coefficients(
    notion: Notion,
    measure: Measure,
    delta: f64,
    marginals: &MarginalSet,
) -> Result<CoefficientTable> {
    coefficients_with_convention(notion, measure, delta, marginals, ApMrConvention::default())
}

pub fn coefficients_with_convention(
    notion: Notion,
    measure: Measure,
    delta: f64,
    marginals: &MarginalSet,
    convention: ApMrConvention,
) -> Result<CoefficientTable> {
    if notion.is_composite() {
        return domain(format!(
            "{} has no single coefficient table; build one per component",
            notion
        ));
    }
    if !(0.0..=1.0).contains(&delta) {
        return domain(format!("tolerance {} outside [0, 1]", delta));
    }
    let groups = marginals.num_groups();
    let mut table = CoefficientTable {
        notion,
        measure,
        delta,
        a: vec![0.0; groups],
        b: vec![[0.0; 2]; groups],
        c: vec![[0.0; 2]; groups],
        included: vec![true; groups],
        warnings: Vec::new(),
        ap_mr_convention: None,
    };
    if let Some(z) = notion.conditioning_label() {
        // Fails with the missing marginal's name when P(Y = z) = 0.
        marginals.s_given_y(z, 0)?;
    }
    for m in 0..groups {
        let conditioning_mass = match notion.conditioning_label() {
            Some(z) => marginals.event(m, z),
            None => marginals.p_s[m],
        };
        if conditioning_mass <= 0.0 {
            table.included[m] = false;
            let msg = format!(
                "group {} excluded from {}: conditioning event has zero mass",
                m + 1,
                notion
            );
            log::warn!("{}", msg);
            table.warnings.push(msg);
            continue;
        }
        match notion {
            Notion::DemographicParity => {
                table.a[m] = marginals.p_s[m];
                for y in 0..2 {
                    table.b[m][y] = marginals.y_given_s(m, y)?;
                }
            }
            Notion::EqualOpportunity => {
                table.a[m] = marginals.s_given_y(1, m)?;
                table.b[m] = [0.0, 1.0];
            }
            Notion::PredictiveEquality => {
                table.a[m] = marginals.s_given_y(0, m)?;
                table.b[m] = [1.0, 0.0];
            }
            Notion::AccuracyParity => {
                table.a[m] = marginals.p_s[m];
                let p0 = marginals.y_given_s(m, 0)?;
                let p1 = marginals.y_given_s(m, 1)?;
                table.b[m] = [p0, -p1];
                let p_pos = marginals.p_pos;
                table.c[m] = match measure {
                    Measure::MeanDifference => [p_pos, -p1],
                    Measure::MeanRatio => match convention {
                        ApMrConvention::Appendix => [delta * p_pos, -p1],
                        ApMrConvention::MainTable => [-delta * p_pos, p1],
                    },
                };
            }
            Notion::EqualizedOdds => unreachable!("composite notions rejected above"),
        }
    }
    if notion == Notion::AccuracyParity && measure == Measure::MeanRatio {
        table.ap_mr_convention = Some(convention);
    }
    if table.included.iter().all(|i| !i) {
        return Err(FairError::UndefinedMarginal {
            name: format!("every group's conditioning event for {}", notion),
        });
    }
    Ok(table)
}
