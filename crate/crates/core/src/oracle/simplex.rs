//! Dense two-phase tableau simplex for tiny linear programs.
//!
//! Problems are `minimize c·x` subject to linear rows and `x >= 0`. Pivoting
//! follows Bland's rule, so runs are deterministic and cannot cycle.

use serde::{Deserialize, Serialize};

/// Feasibility tolerance on row residuals and on the phase-one objective.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-8;
/// Reduced costs above `-OPTIMALITY_TOLERANCE` are treated as non-negative.
pub const OPTIMALITY_TOLERANCE: f64 = 1e-9;
const PIVOT_TOLERANCE: f64 = 1e-12;
const MAX_PIVOTS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowKind {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub coeffs: Vec<f64>,
    pub kind: RowKind,
    pub rhs: f64,
}

/// `minimize objective·x` over `x >= 0` and `rows`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub rows: Vec<Row>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpResult {
    pub status: LpStatus,
    /// Primal values; empty unless optimal.
    pub x: Vec<f64>,
    pub objective: f64,
}

impl LinearProgram {
    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    /// Largest violation of any row or sign constraint at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = x.iter().map(|v| (-v).max(0.0)).fold(0.0, f64::max);
        for row in &self.rows {
            let lhs: f64 = row.coeffs.iter().zip(x).map(|(a, b)| a * b).sum();
            let v = match row.kind {
                RowKind::Le => lhs - row.rhs,
                RowKind::Ge => row.rhs - lhs,
                RowKind::Eq => (lhs - row.rhs).abs(),
            };
            worst = worst.max(v);
        }
        worst
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(a, b)| a * b).sum()
    }
}

struct Tableau {
    /// Rows of `[A | b]`.
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.rows[i][self.cols]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c];
        self.rows[r].iter_mut().for_each(|v| *v /= p);
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let factor = row[c];
            if factor != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= factor * pv;
                }
                row[c] = 0.0;
            }
        }
        self.basis[r] = c;
    }

    fn reduced_cost(&self, cost: &[f64], j: usize) -> f64 {
        cost[j]
            - self
                .rows
                .iter()
                .zip(&self.basis)
                .map(|(row, &b)| cost[b] * row[j])
                .sum::<f64>()
    }

    /// Runs Bland-rule pivots; returns `false` when unbounded.
    fn optimize(&mut self, cost: &[f64], allowed: &[bool]) -> bool {
        for _ in 0..MAX_PIVOTS {
            let entering = (0..self.cols)
                .find(|&j| allowed[j] && self.reduced_cost(cost, j) < -OPTIMALITY_TOLERANCE);
            let Some(j) = entering else {
                return true;
            };
            let mut leaving: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][j];
                if a > PIVOT_TOLERANCE {
                    let ratio = self.rhs(i) / a;
                    leaving = match leaving {
                        None => Some((i, ratio)),
                        Some((k, best)) => {
                            if ratio < best - PIVOT_TOLERANCE
                                || (ratio <= best + PIVOT_TOLERANCE && self.basis[i] < self.basis[k])
                            {
                                Some((i, ratio))
                            } else {
                                Some((k, best))
                            }
                        }
                    };
                }
            }
            match leaving {
                Some((r, _)) => self.pivot(r, j),
                None => return false,
            }
        }
        log::warn!("simplex pivot limit reached");
        true
    }

    fn objective(&self, cost: &[f64]) -> f64 {
        self.basis
            .iter()
            .enumerate()
            .map(|(i, &b)| cost[b] * self.rhs(i))
            .sum()
    }
}

/// Solves `lp` by the two-phase method.
pub fn solve(lp: &LinearProgram) -> LpResult {
    let n = lp.num_vars();
    let m = lp.rows.len();
    // Column layout: originals, one slack/surplus per inequality, one artificial per row needing it.
    let mut normalized: Vec<(Vec<f64>, RowKind, f64)> = lp
        .rows
        .iter()
        .map(|r| {
            if r.rhs < 0.0 {
                let kind = match r.kind {
                    RowKind::Le => RowKind::Ge,
                    RowKind::Ge => RowKind::Le,
                    RowKind::Eq => RowKind::Eq,
                };
                (r.coeffs.iter().map(|v| -v).collect(), kind, -r.rhs)
            } else {
                (r.coeffs.clone(), r.kind, r.rhs)
            }
        })
        .collect();
    let slacks = normalized.iter().filter(|r| r.1 != RowKind::Eq).count();
    let artificials = normalized.iter().filter(|r| r.1 != RowKind::Le).count();
    let cols = n + slacks + artificials;
    let mut rows = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    let (mut next_slack, mut next_art) = (n, n + slacks);
    for (coeffs, kind, rhs) in normalized.iter_mut() {
        let mut row = vec![0.0; cols + 1];
        row[..n].copy_from_slice(coeffs);
        row[cols] = *rhs;
        match kind {
            RowKind::Le => {
                row[next_slack] = 1.0;
                basis.push(next_slack);
                next_slack += 1;
            }
            RowKind::Ge => {
                row[next_slack] = -1.0;
                next_slack += 1;
                row[next_art] = 1.0;
                basis.push(next_art);
                next_art += 1;
            }
            RowKind::Eq => {
                row[next_art] = 1.0;
                basis.push(next_art);
                next_art += 1;
            }
        }
        rows.push(row);
    }
    let mut t = Tableau { rows, basis, cols };
    let is_artificial = |j: usize| j >= n + slacks;

    if artificials > 0 {
        let phase_one: Vec<f64> = (0..cols).map(|j| if is_artificial(j) { 1.0 } else { 0.0 }).collect();
        let all = vec![true; cols];
        t.optimize(&phase_one, &all);
        if t.objective(&phase_one) > FEASIBILITY_TOLERANCE {
            return LpResult {
                status: LpStatus::Infeasible,
                x: Vec::new(),
                objective: f64::NAN,
            };
        }
        // Drive artificials out of the basis; rows where that is impossible are redundant.
        let mut i = 0;
        while i < t.rows.len() {
            if is_artificial(t.basis[i]) {
                match (0..n + slacks).find(|&j| t.rows[i][j].abs() > PIVOT_TOLERANCE) {
                    Some(j) => t.pivot(i, j),
                    None => {
                        t.rows.remove(i);
                        t.basis.remove(i);
                        continue;
                    }
                }
            }
            i += 1;
        }
    }

    let mut cost = vec![0.0; cols];
    cost[..n].copy_from_slice(&lp.objective);
    let allowed: Vec<bool> = (0..cols).map(|j| !is_artificial(j)).collect();
    if !t.optimize(&cost, &allowed) {
        return LpResult {
            status: LpStatus::Unbounded,
            x: Vec::new(),
            objective: f64::NEG_INFINITY,
        };
    }
    let mut x = vec![0.0; n];
    for (i, &b) in t.basis.iter().enumerate() {
        if b < n {
            x[b] = t.rhs(i).max(0.0);
        }
    }
    LpResult {
        status: LpStatus::Optimal,
        objective: lp.value(&x),
        x,
    }
}

/// Best objective over all basic solutions, by brute force.
///
/// Every choice of `n` constraints (rows or sign bounds) taken as equalities is
/// solved; feasible points are compared. Returns `None` when no vertex is
/// feasible. Intended for `n <= 3`.
pub fn vertex_enumeration(lp: &LinearProgram) -> Option<(Vec<f64>, f64)> {
    let n = lp.num_vars();
    let mut planes: Vec<(Vec<f64>, f64)> = lp.rows.iter().map(|r| (r.coeffs.clone(), r.rhs)).collect();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        planes.push((e, 0.0));
    }
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut choice: Vec<usize> = (0..n).collect();
    if n == 0 || planes.len() < n {
        return None;
    }
    loop {
        let a: Vec<Vec<f64>> = choice.iter().map(|&k| planes[k].0.clone()).collect();
        let b: Vec<f64> = choice.iter().map(|&k| planes[k].1).collect();
        if let Some(x) = solve_square(a, b) {
            if lp.max_violation(&x) <= FEASIBILITY_TOLERANCE {
                let v = lp.value(&x);
                if best.as_ref().is_none_or(|(_, bv)| v < *bv) {
                    best = Some((x, v));
                }
            }
        }
        // Next combination in lexicographic order.
        let mut k = n;
        loop {
            if k == 0 {
                return best;
            }
            k -= 1;
            if choice[k] < planes.len() - n + k {
                choice[k] += 1;
                for t in k + 1..n {
                    choice[t] = choice[t - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let p = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[p][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, p);
        b.swap(col, p);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[r][k] -= f * a[col][k];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}
