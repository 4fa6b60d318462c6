//! Dense two-phase simplex with Bland's anti-cycling rule.
//!
//! Problems are stated over variables that are free, nonnegative or fixed at
//! zero, with equality and one-sided inequality rows. The solver maximises a
//! linear objective (or only decides feasibility when none is given).

use crate::num::abs;
use crate::prelude::*;

/// Sign restriction on one variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarKind {
    Free,
    NonNeg,
    Zero,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Eq,
    Le,
    Ge,
}

#[derive(Clone, Debug)]
pub struct Row {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Clone, Debug, Default)]
pub struct LinearProgram {
    pub kinds: Vec<VarKind>,
    pub rows: Vec<Row>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    /// `x` is feasible and `x + t * ray` stays feasible for all `t >= 0`
    /// while the objective grows without bound.
    Unbounded { x: Vec<f64>, ray: Vec<f64> },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimplexOptions {
    /// Phase-1 infeasibility threshold (relative to the scaled right-hand side).
    pub feas_tol: f64,
    pub pivot_tol: f64,
    pub max_pivots: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            feas_tol: 1e-9,
            pivot_tol: 1e-11,
            max_pivots: 100_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PivotLimit;

impl LinearProgram {
    pub fn new(kinds: Vec<VarKind>) -> Self {
        Self { kinds, rows: Vec::new() }
    }

    pub fn num_vars(&self) -> usize {
        self.kinds.len()
    }

    pub fn add_row(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) {
        assert_eq!(coeffs.len(), self.kinds.len());
        self.rows.push(Row { coeffs, relation, rhs });
    }

    /// Adds a sparse row given as `(index, coefficient)` pairs.
    pub fn add_sparse_row(&mut self, entries: &[(usize, f64)], relation: Relation, rhs: f64) {
        let mut coeffs = vec![0.0; self.kinds.len()];
        for &(i, c) in entries {
            coeffs[i] += c;
        }
        self.add_row(coeffs, relation, rhs);
    }

    /// Largest violation of any row or sign restriction at `x`.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (k, kind) in self.kinds.iter().enumerate() {
            match kind {
                VarKind::NonNeg => worst = worst.max(-x[k]),
                VarKind::Zero => worst = worst.max(abs(x[k])),
                VarKind::Free => {}
            }
        }
        for r in &self.rows {
            let lhs: f64 = r.coeffs.iter().zip(x).map(|(a, b)| a * b).sum();
            let v = match r.relation {
                Relation::Eq => abs(lhs - r.rhs),
                Relation::Le => lhs - r.rhs,
                Relation::Ge => r.rhs - lhs,
            };
            worst = worst.max(v);
        }
        worst
    }

    /// Maximises `objective . x` (or finds any feasible point when `None`).
    pub fn solve(&self, objective: Option<&[f64]>, opts: &SimplexOptions) -> Result<LpOutcome, PivotLimit> {
        Tableau::build(self, objective, opts).run(self, opts)
    }
}

/// Maps original variables onto nonnegative standard-form columns.
#[derive(Clone, Copy)]
enum ColumnMap {
    Plus(usize),
    Split(usize, usize),
    Dropped,
}

struct Tableau {
    // (m + 1) x (ncols + 1); last row is the objective row, last column the rhs
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    ncols: usize,
    first_artificial: usize,
    map: Vec<ColumnMap>,
    phase2_cost: Vec<f64>,
    has_objective: bool,
    rhs_scale: f64,
}

impl Tableau {
    fn build(lp: &LinearProgram, objective: Option<&[f64]>, _opts: &SimplexOptions) -> Self {
        let mut map = Vec::with_capacity(lp.kinds.len());
        let mut ncols = 0;
        for k in &lp.kinds {
            map.push(match k {
                VarKind::NonNeg => {
                    ncols += 1;
                    ColumnMap::Plus(ncols - 1)
                }
                VarKind::Free => {
                    ncols += 2;
                    ColumnMap::Split(ncols - 2, ncols - 1)
                }
                VarKind::Zero => ColumnMap::Dropped,
            });
        }
        let structural = ncols;
        let slack_count = lp.rows.iter().filter(|r| r.relation != Relation::Eq).count();
        let first_artificial = structural + slack_count;
        let m = lp.rows.len();
        ncols = first_artificial + m;

        let mut t = vec![vec![0.0; ncols + 1]; m + 1];
        let mut slack = structural;
        let mut rhs_scale: f64 = 1.0;
        for (i, r) in lp.rows.iter().enumerate() {
            // row equilibration: largest coefficient becomes 1
            let scale = r.coeffs.iter().fold(0.0f64, |a, c| a.max(abs(*c)));
            let scale = if scale > 0.0 { scale } else { 1.0 };
            let row = &mut t[i];
            for (k, c) in r.coeffs.iter().enumerate() {
                let c = c / scale;
                match map[k] {
                    ColumnMap::Plus(j) => row[j] += c,
                    ColumnMap::Split(j, l) => {
                        row[j] += c;
                        row[l] -= c;
                    }
                    ColumnMap::Dropped => {}
                }
            }
            match r.relation {
                Relation::Le => {
                    row[slack] = 1.0;
                    slack += 1;
                }
                Relation::Ge => {
                    row[slack] = -1.0;
                    slack += 1;
                }
                Relation::Eq => {}
            }
            row[ncols] = r.rhs / scale;
            if row[ncols] < 0.0 {
                for v in row.iter_mut() {
                    *v = -*v;
                }
            }
            rhs_scale = rhs_scale.max(row[ncols]);
            row[first_artificial + i] = 1.0;
        }

        let mut phase2_cost = vec![0.0; ncols];
        if let Some(c) = objective {
            for (k, ck) in c.iter().enumerate() {
                match map[k] {
                    ColumnMap::Plus(j) => phase2_cost[j] += ck,
                    ColumnMap::Split(j, l) => {
                        phase2_cost[j] += ck;
                        phase2_cost[l] -= ck;
                    }
                    ColumnMap::Dropped => {}
                }
            }
        }

        Tableau {
            t,
            basis: (first_artificial..first_artificial + m).collect(),
            ncols,
            first_artificial,
            map,
            phase2_cost,
            has_objective: objective.is_some(),
            rhs_scale,
        }
    }

    fn m(&self) -> usize {
        self.basis.len()
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.ncols + 1;
        let p = self.t[r][c];
        for j in 0..w {
            self.t[r][j] /= p;
        }
        self.t[r][c] = 1.0;
        for i in 0..self.t.len() {
            if i == r {
                continue;
            }
            let f = self.t[i][c];
            if f == 0.0 {
                continue;
            }
            for j in 0..w {
                let v = self.t[r][j];
                if v != 0.0 {
                    self.t[i][j] -= f * v;
                }
            }
            self.t[i][c] = 0.0;
        }
        self.basis[r] = c;
    }

    /// Sets the objective row to reduced costs for minimising `cost . x`.
    fn load_cost(&mut self, cost: &[f64]) {
        let m = self.m();
        let w = self.ncols + 1;
        let mut obj = vec![0.0; w];
        obj[..self.ncols].copy_from_slice(&cost[..self.ncols]);
        for i in 0..m {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                for j in 0..w {
                    obj[j] -= cb * self.t[i][j];
                }
            }
        }
        self.t[m] = obj;
    }

    /// Runs Bland-rule pivots on the current objective row (minimisation).
    /// Returns the entering column when the problem is unbounded.
    fn iterate(&mut self, allowed: usize, opts: &SimplexOptions, pivots: &mut usize) -> Result<Option<usize>, PivotLimit> {
        let m = self.m();
        let rc_tol = 1e-11;
        loop {
            let entering = (0..allowed).find(|&j| self.t[m][j] < -rc_tol && !self.basis.contains(&j));
            let Some(c) = entering else {
                return Ok(None);
            };
            let mut best: Option<(usize, f64)> = None;
            for i in 0..m {
                let a = self.t[i][c];
                if a > opts.pivot_tol {
                    let ratio = self.t[i][self.ncols] / a;
                    best = match best {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            if ratio < br - 1e-14 || (abs(ratio - br) <= 1e-14 && self.basis[i] < self.basis[bi]) {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = best else {
                return Ok(Some(c));
            };
            *pivots += 1;
            if *pivots > opts.max_pivots {
                return Err(PivotLimit);
            }
            self.pivot(r, c);
        }
    }

    fn standard_solution(&self) -> Vec<f64> {
        let mut y = vec![0.0; self.ncols];
        for (i, &b) in self.basis.iter().enumerate() {
            y[b] = self.t[i][self.ncols];
        }
        y
    }

    fn to_original(&self, y: &[f64]) -> Vec<f64> {
        self.map
            .iter()
            .map(|c| match *c {
                ColumnMap::Plus(j) => y[j],
                ColumnMap::Split(j, l) => y[j] - y[l],
                ColumnMap::Dropped => 0.0,
            })
            .collect()
    }

    fn run(mut self, lp: &LinearProgram, opts: &SimplexOptions) -> Result<LpOutcome, PivotLimit> {
        let m = self.m();
        let mut pivots = 0;

        // phase 1: minimise the sum of artificials
        let mut cost = vec![0.0; self.ncols];
        for c in cost.iter_mut().skip(self.first_artificial) {
            *c = 1.0;
        }
        self.load_cost(&cost);
        self.iterate(self.ncols, opts, &mut pivots)?;
        let infeasibility = -self.t[m][self.ncols];
        if infeasibility > opts.feas_tol * self.rhs_scale {
            return Ok(LpOutcome::Infeasible);
        }

        // drive zero-level artificials out of the basis where possible
        for i in 0..m {
            if self.basis[i] >= self.first_artificial {
                if let Some(c) = (0..self.first_artificial).find(|&j| abs(self.t[i][j]) > 1e-9) {
                    pivots += 1;
                    self.pivot(i, c);
                }
            }
        }
        // artificials that could not leave sit on redundant rows; clear them
        for i in 0..m {
            if self.basis[i] >= self.first_artificial {
                self.t[i][self.ncols] = 0.0;
            }
        }

        if !self.has_objective {
            let x = self.to_original(&self.standard_solution());
            let _ = lp;
            return Ok(LpOutcome::Optimal { x, value: 0.0 });
        }

        // phase 2: minimise -c . x over structural and slack columns
        let cost: Vec<f64> = self.phase2_cost.iter().map(|c| -c).collect();
        let mut full = cost.clone();
        full.resize(self.ncols, 0.0);
        self.load_cost(&full);
        let unbounded = self.iterate(self.first_artificial, opts, &mut pivots)?;
        let y = self.standard_solution();
        let x = self.to_original(&y);
        match unbounded {
            Some(c) => {
                let mut ray_std = vec![0.0; self.ncols];
                ray_std[c] = 1.0;
                for i in 0..m {
                    let b = self.basis[i];
                    ray_std[b] -= self.t[i][c];
                }
                let ray = self.to_original(&ray_std);
                Ok(LpOutcome::Unbounded { x, ray })
            }
            None => {
                let value = self.phase2_cost.iter().zip(&y).map(|(c, v)| c * v).sum();
                Ok(LpOutcome::Optimal { x, value })
            }
        }
    }
}
