//! Dense linear programs and a two-phase primal simplex solver.
//!
//! Problems are stated as `minimize c^T x` subject to `<=`, `>=` and `=`
//! rows, with each variable either non-negative or free. The solver works on
//! a dense tableau that is periodically refactored from the original rows,
//! falls back to Bland's rule on long degenerate runs (so it cannot cycle),
//! and reports the row duals alongside the primal optimum.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{FairDivError, Result};

/// Smallest magnitude accepted as a pivot element.
pub const PIVOT_TOL: f64 = 1e-10;
/// Pivot elements must also exceed this fraction of the largest entry in
/// the entering column.
pub const REL_PIVOT_TOL: f64 = 1e-7;
/// Feasibility tolerance for phase 1 and for the final residual check.
pub const FEAS_TOL: f64 = 1e-8;
/// A reduced cost must be below `-OPT_TOL` for its column to enter.
pub const OPT_TOL: f64 = 1e-10;

const MAX_PIVOTS: usize = 200_000;
/// Pivots between refactorisations of the tableau from the original rows.
const REFACTOR_EVERY: usize = 50;
/// Consecutive degenerate pivots before falling back to Bland's rule.
const DEGENERATE_LIMIT: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarBound {
    NonNegative,
    Free,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub sense: Sense,
    pub rhs: f64,
}

/// `minimize objective^T x` over the constraint rows and variable bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    objective: Vec<f64>,
    bounds: Vec<VarBound>,
    constraints: Vec<Constraint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// One multiplier per row: `>=` rows get `y >= 0`, `<=` rows `y <= 0`,
    /// and at the optimum `objective == sum_r y_r rhs_r`.
    pub duals: Vec<f64>,
    pub pivots: usize,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>, bounds: Vec<VarBound>) -> Result<Self> {
        if objective.len() != bounds.len() {
            return Err(FairDivError::Dimension(format!(
                "{} objective coefficients for {} variables",
                objective.len(),
                bounds.len()
            )));
        }
        if objective.iter().any(|c| !c.is_finite()) {
            return Err(FairDivError::InvalidParameter(
                "objective coefficients must be finite".into(),
            ));
        }
        Ok(Self {
            objective,
            bounds,
            constraints: Vec::new(),
        })
    }

    pub fn add_constraint(&mut self, coeffs: Vec<f64>, sense: Sense, rhs: f64) -> Result<()> {
        if coeffs.len() != self.num_vars() {
            return Err(FairDivError::Dimension(format!(
                "constraint has {} coefficients for {} variables",
                coeffs.len(),
                self.num_vars()
            )));
        }
        if !rhs.is_finite() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(FairDivError::InvalidParameter(
                "constraint coefficients must be finite".into(),
            ));
        }
        self.constraints.push(Constraint { coeffs, sense, rhs });
        Ok(())
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn bounds(&self) -> &[VarBound] {
        &self.bounds
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn count_sense(&self, sense: Sense) -> usize {
        self.constraints.iter().filter(|c| c.sense == sense).count()
    }

    /// Largest violation of any row or bound by `x`.
    pub fn max_residual(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for c in &self.constraints {
            let lhs: f64 = c.coeffs.iter().zip(x).map(|(a, v)| a * v).sum();
            let viol = match c.sense {
                Sense::Le => lhs - c.rhs,
                Sense::Ge => c.rhs - lhs,
                Sense::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        for (v, b) in x.iter().zip(&self.bounds) {
            if *b == VarBound::NonNegative {
                worst = worst.max(-v);
            }
        }
        worst
    }

    /// Plain-text listing in CPLEX LP syntax, readable by external solvers.
    /// Variables are named `x0, x1, ...` and rows `c0, c1, ...`.
    pub fn listing(&self) -> String {
        fn terms(out: &mut String, coeffs: &[f64]) {
            let mut any = false;
            for (j, &a) in coeffs.iter().enumerate() {
                if a != 0.0 {
                    let sign = if a < 0.0 { '-' } else { '+' };
                    let _ = write!(out, " {sign} {} x{j}", a.abs());
                    any = true;
                }
            }
            if !any {
                out.push_str(" 0 x0");
            }
        }
        let mut out = String::from("Minimize\n obj:");
        terms(&mut out, &self.objective);
        out.push_str("\nSubject To\n");
        for (r, c) in self.constraints.iter().enumerate() {
            let _ = write!(out, " c{r}:");
            terms(&mut out, &c.coeffs);
            let op = match c.sense {
                Sense::Le => "<=",
                Sense::Ge => ">=",
                Sense::Eq => "=",
            };
            let _ = writeln!(out, " {op} {}", c.rhs);
        }
        out.push_str("Bounds\n");
        for (j, b) in self.bounds.iter().enumerate() {
            match b {
                VarBound::NonNegative => {
                    let _ = writeln!(out, " x{j} >= 0");
                }
                VarBound::Free => {
                    let _ = writeln!(out, " x{j} free");
                }
            }
        }
        out.push_str("End\n");
        out
    }

    /// Solves the program with the two-phase simplex method.
    pub fn solve(&self) -> Result<LpSolution> {
        let mut tab = Tableau::build(self);
        tab.phase_one()?;
        tab.phase_two()?;
        let x = tab.primal(self);
        let residual = self.max_residual(&x);
        let scale = 1.0
            + self
                .constraints
                .iter()
                .map(|c| c.rhs.abs())
                .fold(0.0, f64::max);
        if residual > FEAS_TOL * scale {
            return Err(FairDivError::Numerical(format!(
                "final residual {residual:e} exceeds tolerance"
            )));
        }
        let objective = self.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        Ok(LpSolution {
            duals: tab.duals(),
            x,
            objective,
            pivots: tab.pivots,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ColKind {
    /// Original variable `var`; `negative` marks the negative part of a
    /// split free variable.
    Structural {
        var: usize,
        negative: bool,
    },
    Slack,
    Surplus,
    Artificial,
}

struct Tableau {
    rows: usize,
    cols: usize,
    /// `rows x (cols + 1)`, last column is the right-hand side.
    a: Vec<f64>,
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    kinds: Vec<ColKind>,
    /// Per row: column holding `+e_row` in the initial tableau.
    identity_col: Vec<usize>,
    /// Per row: whether the row was negated during normalisation.
    flipped: Vec<bool>,
    cost: Vec<f64>,
    pivots: usize,
    /// The initial tableau, kept for refactorisation.
    a0: Vec<f64>,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let mut kinds = Vec::new();
        let mut col_of_var = Vec::with_capacity(lp.num_vars());
        for (var, b) in lp.bounds.iter().enumerate() {
            col_of_var.push(kinds.len());
            kinds.push(ColKind::Structural {
                var,
                negative: false,
            });
            if *b == VarBound::Free {
                kinds.push(ColKind::Structural {
                    var,
                    negative: true,
                });
            }
        }

        // Normalise every row so that a `<=` row has rhs >= 0 (its slack is
        // then a feasible basic variable) and every other row has rhs >= 0.
        let mut norm = Vec::with_capacity(lp.num_constraints());
        for c in &lp.constraints {
            let (sense, flip) = match c.sense {
                Sense::Le if c.rhs >= 0.0 => (Sense::Le, false),
                Sense::Le => (Sense::Ge, true),
                Sense::Ge if c.rhs <= 0.0 => (Sense::Le, true),
                Sense::Ge => (Sense::Ge, false),
                Sense::Eq => (Sense::Eq, c.rhs < 0.0),
            };
            norm.push((sense, flip));
        }

        let rows = lp.num_constraints();
        let mut extra: Vec<(usize, ColKind, f64)> = Vec::new();
        let mut identity_col = vec![0; rows];
        let mut next = kinds.len();
        for (r, (sense, _)) in norm.iter().enumerate() {
            match sense {
                Sense::Le => {
                    extra.push((r, ColKind::Slack, 1.0));
                    identity_col[r] = next;
                    next += 1;
                }
                Sense::Ge => {
                    extra.push((r, ColKind::Surplus, -1.0));
                    extra.push((r, ColKind::Artificial, 1.0));
                    identity_col[r] = next + 1;
                    next += 2;
                }
                Sense::Eq => {
                    extra.push((r, ColKind::Artificial, 1.0));
                    identity_col[r] = next;
                    next += 1;
                }
            }
        }
        kinds.extend(extra.iter().map(|e| e.1));
        let cols = kinds.len();
        let width = cols + 1;
        let mut a = vec![0.0; rows * width];
        for (r, c) in lp.constraints.iter().enumerate() {
            let s = if norm[r].1 { -1.0 } else { 1.0 };
            let row = &mut a[r * width..(r + 1) * width];
            for (var, &coef) in c.coeffs.iter().enumerate() {
                let col = col_of_var[var];
                row[col] = s * coef;
                if lp.bounds[var] == VarBound::Free {
                    row[col + 1] = -s * coef;
                }
            }
            row[cols] = s * c.rhs;
        }
        let base = cols - extra.len();
        for (offset, (r, _, coef)) in extra.iter().enumerate() {
            a[r * width + base + offset] = *coef;
        }

        let mut cost = vec![0.0; cols];
        for (col, k) in kinds.iter().enumerate() {
            if let ColKind::Structural { var, negative } = *k {
                cost[col] = if negative {
                    -lp.objective[var]
                } else {
                    lp.objective[var]
                };
            }
        }

        let mut in_basis = vec![false; cols];
        for &c in &identity_col {
            in_basis[c] = true;
        }
        Self {
            rows,
            cols,
            basis: identity_col.clone(),
            in_basis,
            kinds,
            identity_col,
            flipped: norm.iter().map(|n| n.1).collect(),
            cost,
            pivots: 0,
            a0: a.clone(),
            a,
        }
    }

    fn width(&self) -> usize {
        self.cols + 1
    }

    fn at(&self, r: usize, c: usize) -> f64 {
        self.a[r * self.width() + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.cols)
    }

    /// Reduced costs `c_j - c_B B^-1 A_j` for the given column costs.
    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut d = cost.to_vec();
        let w = self.width();
        for r in 0..self.rows {
            let cb = cost[self.basis[r]];
            if cb != 0.0 {
                let row = &self.a[r * w..r * w + self.cols];
                for (dj, arj) in d.iter_mut().zip(row) {
                    *dj -= cb * arj;
                }
            }
        }
        d
    }

    fn pivot(&mut self, pr: usize, pc: usize, d: &mut [f64]) {
        let w = self.width();
        let piv = self.a[pr * w + pc];
        {
            let row = &mut self.a[pr * w..(pr + 1) * w];
            for v in row.iter_mut() {
                *v /= piv;
            }
            row[pc] = 1.0;
        }
        let (before, rest) = self.a.split_at_mut(pr * w);
        let (prow, after) = rest.split_at_mut(w);
        for chunk in before.chunks_exact_mut(w).chain(after.chunks_exact_mut(w)) {
            let f = chunk[pc];
            if f != 0.0 {
                for (v, p) in chunk.iter_mut().zip(prow.iter()) {
                    *v -= f * p;
                }
                chunk[pc] = 0.0;
            }
        }
        let f = d[pc];
        if f != 0.0 {
            for (dj, p) in d.iter_mut().zip(prow[..self.cols].iter()) {
                *dj -= f * p;
            }
            d[pc] = 0.0;
        }
        self.in_basis[self.basis[pr]] = false;
        self.in_basis[pc] = true;
        self.basis[pr] = pc;
        self.pivots += 1;
    }

    /// Recomputes `B^-1 [A | b]` for the current basis from the original
    /// rows by Gauss-Jordan elimination with partial pivoting, discarding
    /// the rounding error accumulated by successive pivots.
    fn refactor(&mut self) -> Result<()> {
        let w = self.width();
        let mut m = self.a0.clone();
        let mut row_of = vec![usize::MAX; self.rows];
        let mut used = vec![false; self.rows];
        for (k, &col) in self.basis.iter().enumerate() {
            let mut best: Option<(usize, f64)> = None;
            for r in (0..self.rows).filter(|&r| !used[r]) {
                let v = m[r * w + col].abs();
                if best.is_none_or(|(_, b)| v > b) {
                    best = Some((r, v));
                }
            }
            let Some((pr, _)) = best.filter(|(_, v)| *v > 1e-13) else {
                return Err(FairDivError::Numerical("basis became singular".into()));
            };
            used[pr] = true;
            row_of[k] = pr;
            let piv = m[pr * w + col];
            for v in &mut m[pr * w..(pr + 1) * w] {
                *v /= piv;
            }
            let prow: Vec<f64> = m[pr * w..(pr + 1) * w].to_vec();
            for r in (0..self.rows).filter(|&r| r != pr) {
                let f = m[r * w + col];
                if f != 0.0 {
                    for (v, p) in m[r * w..(r + 1) * w].iter_mut().zip(&prow) {
                        *v -= f * p;
                    }
                    m[r * w + col] = 0.0;
                }
            }
        }
        for (k, &pr) in row_of.iter().enumerate() {
            self.a[k * w..(k + 1) * w].copy_from_slice(&m[pr * w..(pr + 1) * w]);
        }
        Ok(())
    }

    /// Runs simplex iterations until optimal for `cost`. Pricing is
    /// most-negative reduced cost with a two-pass ratio test that prefers
    /// large pivots; after a long run of degenerate pivots both choices
    /// switch to Bland's rule, which cannot cycle, until progress resumes.
    fn iterate(&mut self, cost: &[f64], allow_artificial: bool) -> Result<()> {
        let mut d = self.reduced_costs(cost);
        let mut since_refactor = 0;
        let mut degenerate_run = 0;
        loop {
            if self.pivots > MAX_PIVOTS {
                return Err(FairDivError::Numerical(format!(
                    "simplex exceeded {MAX_PIVOTS} pivots"
                )));
            }
            if since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
                d = self.reduced_costs(cost);
                since_refactor = 0;
            }
            let bland = degenerate_run >= DEGENERATE_LIMIT;
            let eligible = |c: usize| {
                d[c] < -OPT_TOL
                    && (allow_artificial || self.kinds[c] != ColKind::Artificial)
                    && !self.in_basis[c]
            };
            let entering = if bland {
                (0..self.cols).find(|&c| eligible(c))
            } else {
                (0..self.cols)
                    .filter(|&c| eligible(c))
                    .min_by(|&x, &y| d[x].total_cmp(&d[y]))
            };
            let Some(ec) = entering else {
                if since_refactor == 0 {
                    return Ok(());
                }
                // Confirm optimality on a freshly factored tableau.
                self.refactor()?;
                d = self.reduced_costs(cost);
                since_refactor = 0;
                continue;
            };
            let Some((lr, step)) = self.ratio_test(ec, bland) else {
                return Err(FairDivError::Unbounded);
            };
            if step > 0.0 {
                degenerate_run = 0;
            } else {
                degenerate_run += 1;
            }
            self.pivot(lr, ec, &mut d);
            since_refactor += 1;
        }
    }

    /// Leaving row for entering column `ec` and the step length. Entries
    /// below `REL_PIVOT_TOL` times the column's largest entry are treated as
    /// zero. Among rows whose ratio is within `FEAS_TOL` of the minimum, the
    /// largest pivot wins, or the smallest basic index under Bland's rule.
    fn ratio_test(&self, ec: usize, bland: bool) -> Option<(usize, f64)> {
        let col_max = (0..self.rows)
            .map(|r| self.at(r, ec).abs())
            .fold(0.0, f64::max);
        let tol = PIVOT_TOL.max(REL_PIVOT_TOL * col_max);
        let candidates: Vec<(usize, f64, f64)> = (0..self.rows)
            .filter_map(|r| {
                let arc = self.at(r, ec);
                (arc > tol).then(|| (r, arc, self.rhs(r).max(0.0) / arc))
            })
            .collect();
        if bland {
            let min = candidates.iter().map(|c| c.2).fold(f64::INFINITY, f64::min);
            return candidates
                .iter()
                .filter(|c| c.2 <= min + 1e-12 * (1.0 + min))
                .min_by_key(|c| self.basis[c.0])
                .map(|c| (c.0, c.2));
        }
        let bound = candidates
            .iter()
            .map(|&(r, arc, _)| (self.rhs(r).max(0.0) + FEAS_TOL) / arc)
            .fold(f64::INFINITY, f64::min);
        candidates
            .iter()
            .filter(|c| c.2 <= bound)
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .map(|c| (c.0, c.2))
    }

    fn phase_one(&mut self) -> Result<()> {
        let cost: Vec<f64> = self
            .kinds
            .iter()
            .map(|k| if *k == ColKind::Artificial { 1.0 } else { 0.0 })
            .collect();
        if cost.iter().all(|c| *c == 0.0) {
            return Ok(());
        }
        self.iterate(&cost, true)?;
        let infeas: f64 = (0..self.rows)
            .filter(|&r| self.kinds[self.basis[r]] == ColKind::Artificial)
            .map(|r| self.rhs(r))
            .sum();
        let scale = 1.0
            + (0..self.rows)
                .map(|r| self.rhs(r).abs())
                .fold(0.0, f64::max);
        if infeas > FEAS_TOL * scale {
            return Err(FairDivError::Infeasible);
        }
        // Drive zero-level artificials out of the basis where possible; a row
        // with no usable pivot is redundant and keeps its artificial at zero.
        let mut d = vec![0.0; self.cols];
        for r in 0..self.rows {
            if self.kinds[self.basis[r]] != ColKind::Artificial {
                continue;
            }
            let candidate = (0..self.cols).find(|&c| {
                self.kinds[c] != ColKind::Artificial
                    && !self.in_basis[c]
                    && self.at(r, c).abs() > PIVOT_TOL
            });
            if let Some(c) = candidate {
                self.pivot(r, c, &mut d);
            }
        }
        Ok(())
    }

    fn phase_two(&mut self) -> Result<()> {
        let cost = self.cost.clone();
        self.iterate(&cost, false)
    }

    fn primal(&self, lp: &LinearProgram) -> Vec<f64> {
        let mut x = vec![0.0; lp.num_vars()];
        for r in 0..self.rows {
            if let ColKind::Structural { var, negative } = self.kinds[self.basis[r]] {
                let v = self.rhs(r);
                if negative {
                    x[var] -= v;
                } else {
                    x[var] += v;
                }
            }
        }
        for (v, b) in x.iter_mut().zip(&lp.bounds) {
            if *b == VarBound::NonNegative && *v < 0.0 && *v > -FEAS_TOL {
                *v = 0.0;
            }
        }
        x
    }

    fn duals(&self) -> Vec<f64> {
        let d = self.reduced_costs(&self.cost);
        (0..self.rows)
            .map(|r| {
                let y = -d[self.identity_col[r]];
                if self.flipped[r] {
                    -y
                } else {
                    y
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp(obj: &[f64], bounds: &[VarBound], rows: &[(&[f64], Sense, f64)]) -> LinearProgram {
        let mut p = LinearProgram::new(obj.to_vec(), bounds.to_vec()).unwrap();
        for (c, s, r) in rows {
            p.add_constraint(c.to_vec(), *s, *r).unwrap();
        }
        p
    }

    use VarBound::{Free, NonNegative as Nn};

    #[test]
    fn textbook_maximisation() {
        // max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18  -> (2, 6), 36
        let p = lp(
            &[-3.0, -5.0],
            &[Nn, Nn],
            &[
                (&[1.0, 0.0], Sense::Le, 4.0),
                (&[0.0, 2.0], Sense::Le, 12.0),
                (&[3.0, 2.0], Sense::Le, 18.0),
            ],
        );
        let s = p.solve().unwrap();
        assert!((s.objective + 36.0).abs() < 1e-9);
        assert!((s.x[0] - 2.0).abs() < 1e-9 && (s.x[1] - 6.0).abs() < 1e-9);
        // strong duality
        let dual_obj: f64 = s
            .duals
            .iter()
            .zip(p.constraints())
            .map(|(y, c)| y * c.rhs)
            .sum();
        assert!((dual_obj - s.objective).abs() < 1e-9);
        assert!(s.duals.iter().all(|y| *y <= 1e-12));
    }

    #[test]
    fn equality_and_ge_rows() {
        // min x + 2y s.t. x + y = 3, x >= 1, y >= 0.5  -> x=2.5, y=0.5
        let p = lp(
            &[1.0, 2.0],
            &[Nn, Nn],
            &[
                (&[1.0, 1.0], Sense::Eq, 3.0),
                (&[1.0, 0.0], Sense::Ge, 1.0),
                (&[0.0, 1.0], Sense::Ge, 0.5),
            ],
        );
        let s = p.solve().unwrap();
        assert!((s.objective - 3.5).abs() < 1e-9);
        let dual_obj: f64 = s
            .duals
            .iter()
            .zip(p.constraints())
            .map(|(y, c)| y * c.rhs)
            .sum();
        assert!((dual_obj - 3.5).abs() < 1e-9);
    }

    #[test]
    fn free_variable_goes_negative() {
        // min z s.t. z >= x - 5, z >= -x - 1, x in [0, 10] -> x=2, z=-3
        let p = lp(
            &[0.0, 1.0],
            &[Nn, Free],
            &[
                (&[-1.0, 1.0], Sense::Ge, -5.0),
                (&[1.0, 1.0], Sense::Ge, -1.0),
                (&[1.0, 0.0], Sense::Le, 10.0),
            ],
        );
        let s = p.solve().unwrap();
        assert!((s.objective + 3.0).abs() < 1e-9, "{s:?}");
        assert!((s.x[0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let p = lp(&[1.0], &[Nn], &[(&[1.0], Sense::Le, -1.0)]);
        assert_eq!(p.solve().unwrap_err(), FairDivError::Infeasible);
        let p = lp(&[-1.0], &[Nn], &[(&[1.0], Sense::Ge, 1.0)]);
        assert_eq!(p.solve().unwrap_err(), FairDivError::Unbounded);
    }

    #[test]
    fn redundant_equalities() {
        let p = lp(
            &[1.0, 1.0],
            &[Nn, Nn],
            &[
                (&[1.0, 1.0], Sense::Eq, 2.0),
                (&[2.0, 2.0], Sense::Eq, 4.0),
                (&[1.0, 0.0], Sense::Ge, 0.5),
            ],
        );
        let s = p.solve().unwrap();
        assert!((s.objective - 2.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_problem_terminates() {
        // Beale's cycling example under the most-negative rule.
        let p = lp(
            &[-0.75, 150.0, -0.02, 6.0],
            &[Nn, Nn, Nn, Nn],
            &[
                (&[0.25, -60.0, -0.04, 9.0], Sense::Le, 0.0),
                (&[0.5, -90.0, -0.02, 3.0], Sense::Le, 0.0),
                (&[0.0, 0.0, 1.0, 0.0], Sense::Le, 1.0),
            ],
        );
        let s = p.solve().unwrap();
        assert!((s.objective + 0.05).abs() < 1e-9, "{}", s.objective);
    }

    #[test]
    fn listing_format() {
        let p = lp(&[1.0, -2.0], &[Nn, Free], &[(&[1.0, 1.0], Sense::Ge, 1.0)]);
        let text = p.listing();
        assert_eq!(
            text,
            "Minimize\n obj: + 1 x0 - 2 x1\nSubject To\n c0: + 1 x0 + 1 x1 >= 1\nBounds\n x0 >= 0\n x1 free\nEnd\n"
        );
    }

    #[test]
    fn rejects_bad_input() {
        assert!(LinearProgram::new(vec![1.0], vec![]).is_err());
        let mut p = LinearProgram::new(vec![1.0], vec![Nn]).unwrap();
        assert!(p.add_constraint(vec![1.0, 2.0], Sense::Le, 1.0).is_err());
        assert!(p.add_constraint(vec![f64::NAN], Sense::Le, 1.0).is_err());
    }
}
