//! Linear feasibility under sign patterns with complementarity pairs.
//!
//! A [`SignPattern`] restricts each multiplier coordinate to be free,
//! nonnegative or zero, and may add pairs `(a, b)` with `x_a = 0 or x_b = 0`.
//! Pairs are resolved by enumerating convex cases: in case `k`, bit `j` set
//! zeroes the first coordinate of the `j`-th effective pair and bit `j`
//! clear zeroes the second. Cases are tried in increasing `k`, and the first
//! successful case supplies the witness.

use crate::linalg::{lstsq, nullspace_basis, Matrix};
use crate::lp::{LinearProgram, LpOutcome, Relation, Row, SimplexOptions, VarKind};
use crate::num::{abs, norm_inf};
use crate::prelude::*;
use core::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sign {
    Free,
    NonNeg,
    Zero,
}

impl Sign {
    fn kind(self) -> VarKind {
        match self {
            Sign::Free => VarKind::Free,
            Sign::NonNeg => VarKind::NonNeg,
            Sign::Zero => VarKind::Zero,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SignPattern {
    signs: Vec<Sign>,
    pairs: Vec<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum KernelError {
    CapExceeded { cases: u128, cap: u64 },
    InvalidPair { a: usize, b: usize },
    DimensionMismatch { expected: usize, got: usize },
    PivotLimit,
    InfeasibleProblem,
    /// A witness failed re-verification; indicates a numerical breakdown.
    Internal { residual: f64 },
}

impl fmt::Display for KernelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelError::CapExceeded { cases, cap } => write!(f, "{cases} cases exceed the cap of {cap}"),
            KernelError::InvalidPair { a, b } => write!(f, "invalid complementary pair ({a}, {b})"),
            KernelError::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            KernelError::PivotLimit => f.write_str("simplex pivot limit reached"),
            KernelError::InfeasibleProblem => f.write_str("problem is infeasible"),
            KernelError::Internal { residual } => write!(f, "witness failed re-verification (residual {residual:e})"),
        }
    }
}

impl core::error::Error for KernelError {}

impl SignPattern {
    pub fn new(signs: Vec<Sign>) -> Self {
        Self { signs, pairs: Vec::new() }
    }

    pub fn all(sign: Sign, len: usize) -> Self {
        Self::new(vec![sign; len])
    }

    pub fn len(&self) -> usize {
        self.signs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }

    pub fn signs(&self) -> &[Sign] {
        &self.signs
    }

    pub fn sign(&self, i: usize) -> Sign {
        self.signs[i]
    }

    pub fn set(&mut self, i: usize, s: Sign) {
        self.signs[i] = s;
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Adds the disjunction `x_a = 0 or x_b = 0`.
    pub fn add_pair(&mut self, a: usize, b: usize) -> Result<(), KernelError> {
        let used = |i: usize| self.pairs.iter().any(|&(x, y)| x == i || y == i);
        if a == b || a >= self.len() || b >= self.len() || used(a) || used(b) {
            return Err(KernelError::InvalidPair { a, b });
        }
        self.pairs.push((a, b));
        Ok(())
    }

    /// Pairs not already settled by a `Zero` sign.
    fn effective_pairs(&self) -> Vec<(usize, usize)> {
        self.pairs
            .iter()
            .copied()
            .filter(|&(a, b)| self.signs[a] != Sign::Zero && self.signs[b] != Sign::Zero)
            .collect()
    }

    /// Number of convex cases that enumeration will visit.
    pub fn case_count(&self) -> u128 {
        1u128 << self.effective_pairs().len()
    }

    /// Signs of convex case `k`.
    pub fn case(&self, k: u64) -> Vec<Sign> {
        let mut s = self.signs.clone();
        for (j, (a, b)) in self.effective_pairs().into_iter().enumerate() {
            if (k >> j) & 1 == 1 {
                s[a] = Sign::Zero;
            } else {
                s[b] = Sign::Zero;
            }
        }
        s
    }

    /// Exact check of the pattern at `x`, with `tol` slack on `NonNeg`.
    pub fn admits(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.len()
            && self.signs.iter().zip(x).all(|(s, v)| match s {
                Sign::Free => true,
                Sign::NonNeg => *v >= -tol,
                Sign::Zero => *v == 0.0,
            })
            && self.pairs.iter().all(|&(a, b)| x[a] == 0.0 || x[b] == 0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelOptions {
    pub tol_lin: f64,
    pub tol_rank: f64,
    pub case_cap: u64,
}

impl Default for KernelOptions {
    fn default() -> Self {
        Self {
            tol_lin: 1e-9,
            tol_rank: crate::linalg::DEFAULT_RANK_TOL,
            case_cap: 1 << 20,
        }
    }
}

impl KernelOptions {
    fn simplex(&self) -> SimplexOptions {
        SimplexOptions {
            feas_tol: self.tol_lin,
            ..SimplexOptions::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum CertificateStatus {
    Feasible(Vec<f64>),
    Infeasible,
    NonzeroFound(Vec<f64>),
    OnlyZero,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearCertificate {
    pub status: CertificateStatus,
    /// `||A x - b||_inf` of the witness (0 when there is none).
    pub residual: f64,
    /// Convex case that produced the witness.
    pub case: Option<u64>,
}

impl LinearCertificate {
    pub fn witness(&self) -> Option<&[f64]> {
        match &self.status {
            CertificateStatus::Feasible(x) | CertificateStatus::NonzeroFound(x) => Some(x),
            _ => None,
        }
    }

    pub fn is_feasible(&self) -> bool {
        matches!(self.status, CertificateStatus::Feasible(_))
    }

    pub fn found_nonzero(&self) -> bool {
        matches!(self.status, CertificateStatus::NonzeroFound(_))
    }
}

/// Outcome of [`maximize_linear`].
#[derive(Clone, Debug, PartialEq)]
pub enum MaxOutcome {
    Finite { value: f64, witness: Vec<f64>, case: u64 },
    Unbounded { witness: Vec<f64>, ray: Vec<f64>, case: u64 },
}

impl MaxOutcome {
    pub fn value(&self) -> f64 {
        match self {
            MaxOutcome::Finite { value, .. } => *value,
            MaxOutcome::Unbounded { .. } => f64::INFINITY,
        }
    }

    pub fn witness(&self) -> &[f64] {
        match self {
            MaxOutcome::Finite { witness, .. } | MaxOutcome::Unbounded { witness, .. } => witness,
        }
    }
}

fn residual(a: &Matrix, x: &[f64], b: &[f64]) -> f64 {
    a.mul_vec(x).iter().zip(b).fold(0.0f64, |acc, (l, r)| acc.max(abs(l - r)))
}

/// Re-verification bound: `tol * (1 + |b| + |A| |x|)`.
fn allowed_residual(a: &Matrix, x: &[f64], b: &[f64], tol: f64) -> f64 {
    tol * (1.0 + norm_inf(b) + a.max_abs() * norm_inf(x) * a.cols().max(1) as f64)
}

fn rows_residual(rows: &[Row], x: &[f64]) -> f64 {
    rows.iter().fold(0.0f64, |acc, r| {
        let lhs: f64 = r.coeffs.iter().zip(x).map(|(c, v)| c * v).sum();
        acc.max(match r.relation {
            Relation::Eq => abs(lhs - r.rhs),
            Relation::Le => lhs - r.rhs,
            Relation::Ge => r.rhs - lhs,
        })
    })
}

fn check_dims(a: &Matrix, b: &[f64], pat: &SignPattern) -> Result<(), KernelError> {
    if a.cols() != pat.len() {
        return Err(KernelError::DimensionMismatch { expected: a.cols(), got: pat.len() });
    }
    if a.rows() != b.len() {
        return Err(KernelError::DimensionMismatch { expected: a.rows(), got: b.len() });
    }
    Ok(())
}

fn cases(pat: &SignPattern, opts: &KernelOptions) -> Result<u64, KernelError> {
    let count = pat.case_count();
    if count > opts.case_cap as u128 {
        return Err(KernelError::CapExceeded { cases: count, cap: opts.case_cap });
    }
    Ok(count as u64)
}

fn build_lp(a: &Matrix, b: &[f64], extra: &[Row], signs: &[Sign]) -> LinearProgram {
    let mut lp = LinearProgram::new(signs.iter().map(|s| s.kind()).collect());
    for i in 0..a.rows() {
        lp.add_row(a.row(i).to_vec(), Relation::Eq, b[i]);
    }
    for r in extra {
        lp.add_row(r.coeffs.clone(), r.relation, r.rhs);
    }
    lp
}

/// Clears sign noise and polishes the equality residual on the support.
fn clean(a: &Matrix, b: &[f64], extra: &[Row], signs: &[Sign], x: &mut [f64], opts: &KernelOptions) {
    for (v, s) in x.iter_mut().zip(signs) {
        match s {
            Sign::Zero => *v = 0.0,
            Sign::NonNeg if *v < 0.0 => *v = 0.0,
            _ => {}
        }
    }
    let before = residual(a, x, b);
    if before == 0.0 || a.rows() == 0 {
        return;
    }
    let support: Vec<usize> = (0..x.len()).filter(|&i| x[i] != 0.0 && signs[i] != Sign::Zero).collect();
    if support.is_empty() {
        return;
    }
    let r: Vec<f64> = a.mul_vec(x).iter().zip(b).map(|(l, r)| r - l).collect();
    let delta = lstsq(&a.select_columns(&support), &r, opts.tol_rank);
    let mut y = x.to_vec();
    for (k, &i) in support.iter().enumerate() {
        y[i] += delta[k];
    }
    let signs_ok = support.iter().all(|&i| signs[i] != Sign::NonNeg || y[i] >= 0.0);
    if signs_ok && residual(a, &y, b) < before && rows_residual(extra, &y) <= rows_residual(extra, x).max(0.0) + opts.tol_lin {
        x.copy_from_slice(&y);
    }
}

fn verified(
    a: &Matrix,
    b: &[f64],
    extra: &[Row],
    pat: &SignPattern,
    x: &[f64],
    opts: &KernelOptions,
) -> Result<f64, KernelError> {
    let res = residual(a, x, b);
    let extra_res = rows_residual(extra, x);
    let bound = allowed_residual(a, x, b, opts.tol_lin);
    if res > bound || extra_res > bound || !pat.admits(x, opts.tol_lin) {
        return Err(KernelError::Internal { residual: res.max(extra_res) });
    }
    Ok(res)
}

/// Decides `{x : A x = b, extra rows, x respects pat}` is nonempty.
pub fn feasible_with_rows(
    a: &Matrix,
    b: &[f64],
    extra: &[Row],
    pat: &SignPattern,
    opts: &KernelOptions,
) -> Result<LinearCertificate, KernelError> {
    check_dims(a, b, pat)?;
    for k in 0..cases(pat, opts)? {
        let signs = pat.case(k);
        let lp = build_lp(a, b, extra, &signs);
        if let LpOutcome::Optimal { mut x, .. } = lp.solve(None, &opts.simplex()).map_err(|_| KernelError::PivotLimit)? {
            clean(a, b, extra, &signs, &mut x, opts);
            let res = verified(a, b, extra, pat, &x, opts)?;
            return Ok(LinearCertificate { status: CertificateStatus::Feasible(x), residual: res, case: Some(k) });
        }
    }
    Ok(LinearCertificate { status: CertificateStatus::Infeasible, residual: 0.0, case: None })
}

/// Decides `{x : A x = b, x respects pat}` is nonempty.
pub fn feasible_under_pattern(
    a: &Matrix,
    b: &[f64],
    pat: &SignPattern,
    opts: &KernelOptions,
) -> Result<LinearCertificate, KernelError> {
    feasible_with_rows(a, b, &[], pat, opts)
}

fn unit_max_norm(mut x: Vec<f64>) -> Vec<f64> {
    let s = norm_inf(&x);
    if s > 0.0 {
        for v in x.iter_mut() {
            *v /= s;
        }
    }
    x
}

/// Searches for `x != 0` with `A x = 0` respecting `pat`.
pub fn nonzero_cone_kernel_intersection(
    a: &Matrix,
    pat: &SignPattern,
    opts: &KernelOptions,
) -> Result<LinearCertificate, KernelError> {
    let zeros = vec![0.0; a.rows()];
    check_dims(a, &zeros, pat)?;
    let n = pat.len();
    for k in 0..cases(pat, opts)? {
        let signs = pat.case(k);
        let free: Vec<usize> = (0..n).filter(|&i| signs[i] == Sign::Free).collect();
        if !free.is_empty() {
            let basis = nullspace_basis(&a.select_columns(&free), opts.tol_rank);
            if let Some(v) = basis.into_iter().next() {
                let mut x = vec![0.0; n];
                for (j, &i) in free.iter().enumerate() {
                    x[i] = v[j];
                }
                let x = unit_max_norm(x);
                let res = verified(a, &zeros, &[], pat, &x, opts)?;
                return Ok(LinearCertificate { status: CertificateStatus::NonzeroFound(x), residual: res, case: Some(k) });
            }
        }
        for i in (0..n).filter(|&i| signs[i] == Sign::NonNeg) {
            let mut fix = vec![0.0; n];
            fix[i] = 1.0;
            let extra = [Row { coeffs: fix, relation: Relation::Eq, rhs: 1.0 }];
            let lp = build_lp(a, &zeros, &extra, &signs);
            if let LpOutcome::Optimal { mut x, .. } = lp.solve(None, &opts.simplex()).map_err(|_| KernelError::PivotLimit)? {
                clean(a, &zeros, &extra, &signs, &mut x, opts);
                let x = unit_max_norm(x);
                let res = verified(a, &zeros, &[], pat, &x, opts)?;
                return Ok(LinearCertificate { status: CertificateStatus::NonzeroFound(x), residual: res, case: Some(k) });
            }
        }
    }
    Ok(LinearCertificate { status: CertificateStatus::OnlyZero, residual: 0.0, case: None })
}

/// Supremum of `c . x` over `{A x = b, extra rows, x respects pat}`.
pub fn maximize_linear_with_rows(
    c: &[f64],
    a: &Matrix,
    b: &[f64],
    extra: &[Row],
    pat: &SignPattern,
    opts: &KernelOptions,
) -> Result<MaxOutcome, KernelError> {
    check_dims(a, b, pat)?;
    if c.len() != pat.len() {
        return Err(KernelError::DimensionMismatch { expected: pat.len(), got: c.len() });
    }
    let mut best: Option<MaxOutcome> = None;
    for k in 0..cases(pat, opts)? {
        let signs = pat.case(k);
        let lp = build_lp(a, b, extra, &signs);
        match lp.solve(Some(c), &opts.simplex()).map_err(|_| KernelError::PivotLimit)? {
            LpOutcome::Infeasible => {}
            LpOutcome::Unbounded { mut x, ray } => {
                clean(a, b, extra, &signs, &mut x, opts);
                verified(a, b, extra, pat, &x, opts)?;
                return Ok(MaxOutcome::Unbounded { witness: x, ray, case: k });
            }
            LpOutcome::Optimal { mut x, .. } => {
                clean(a, b, extra, &signs, &mut x, opts);
                verified(a, b, extra, pat, &x, opts)?;
                let value: f64 = c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum();
                if best.as_ref().is_none_or(|bst| value > bst.value()) {
                    best = Some(MaxOutcome::Finite { value, witness: x, case: k });
                }
            }
        }
    }
    best.ok_or(KernelError::InfeasibleProblem)
}

/// Supremum of `c . x` over `{A x = b, x respects pat}`.
pub fn maximize_linear(
    c: &[f64],
    a: &Matrix,
    b: &[f64],
    pat: &SignPattern,
    opts: &KernelOptions,
) -> Result<MaxOutcome, KernelError> {
    maximize_linear_with_rows(c, a, b, &[], pat, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ladder_columns() -> Matrix {
        // columns: grad g, grad G, grad H at the origin
        Matrix::from_columns(&[vec![-1.0, 1.0], vec![1.0, 0.0], vec![0.0, 1.0]], 2)
    }

    fn m_pattern() -> SignPattern {
        let mut p = SignPattern::new(vec![Sign::NonNeg, Sign::Free, Sign::Free]);
        p.add_pair(1, 2).unwrap();
        p
    }

    #[test]
    fn example_m_system_feasible_with_expected_witness() {
        let cert = feasible_under_pattern(&ladder_columns(), &[-1.0, 0.0], &m_pattern(), &KernelOptions::default()).unwrap();
        assert_eq!(cert.witness().unwrap(), &[0.0, -1.0, 0.0]);
        assert_eq!(cert.case, Some(0));
    }

    #[test]
    fn example_s_system_infeasible() {
        let p = SignPattern::new(vec![Sign::NonNeg, Sign::Zero, Sign::Zero]);
        let cert = feasible_under_pattern(&ladder_columns(), &[-1.0, 0.0], &p, &KernelOptions::default()).unwrap();
        assert_eq!(cert.status, CertificateStatus::Infeasible);
    }

    #[test]
    fn zero_rhs_all_free_is_feasible() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]], 2);
        let cert = feasible_under_pattern(&a, &[0.0, 0.0], &SignPattern::all(Sign::Free, 2), &KernelOptions::default()).unwrap();
        assert_eq!(cert.witness().unwrap(), &[0.0, 0.0]);
    }

    #[test]
    fn nnamcq_example_only_zero() {
        let cert = nonzero_cone_kernel_intersection(&ladder_columns(), &m_pattern(), &KernelOptions::default()).unwrap();
        assert_eq!(cert.status, CertificateStatus::OnlyZero);
    }

    #[test]
    fn proportional_gradients_give_nonzero_kernel() {
        let a = Matrix::from_columns(&[vec![-1.0, 0.0], vec![1.0, 0.0]], 2);
        let cert = nonzero_cone_kernel_intersection(&a, &SignPattern::all(Sign::Free, 2), &KernelOptions::default()).unwrap();
        let w = cert.witness().unwrap();
        assert!((abs(w[0]) - 1.0).abs() < 1e-12 && (w[0] - w[1]).abs() < 1e-12);
    }

    #[test]
    fn identity_has_trivial_kernel() {
        let cert = nonzero_cone_kernel_intersection(&Matrix::identity(3), &SignPattern::all(Sign::Free, 3), &KernelOptions::default()).unwrap();
        assert_eq!(cert.status, CertificateStatus::OnlyZero);
    }

    #[test]
    fn maximize_examples() {
        let a = Matrix::from_rows(&[vec![1.0]], 1);
        let r = maximize_linear(&[1.0], &a, &[1.0], &SignPattern::all(Sign::Free, 1), &KernelOptions::default()).unwrap();
        assert_eq!(r.value(), 1.0);
        let empty = Matrix::zeros(0, 1);
        let r = maximize_linear(&[1.0], &empty, &[], &SignPattern::all(Sign::NonNeg, 1), &KernelOptions::default()).unwrap();
        assert!(matches!(r, MaxOutcome::Unbounded { .. }));
        let r = maximize_linear(&[1.0], &a, &[-1.0], &SignPattern::all(Sign::NonNeg, 1), &KernelOptions::default());
        assert_eq!(r, Err(KernelError::InfeasibleProblem));
    }

    #[test]
    fn case_cap_is_enforced() {
        let mut p = SignPattern::all(Sign::Free, 8);
        for j in 0..4 {
            p.add_pair(2 * j, 2 * j + 1).unwrap();
        }
        let opts = KernelOptions { case_cap: 8, ..KernelOptions::default() };
        let a = Matrix::zeros(1, 8);
        assert!(matches!(feasible_under_pattern(&a, &[0.0], &p, &opts), Err(KernelError::CapExceeded { .. })));
    }

    #[test]
    fn pairs_are_validated() {
        let mut p = SignPattern::all(Sign::Free, 3);
        p.add_pair(0, 1).unwrap();
        assert!(p.add_pair(1, 2).is_err());
        assert!(p.add_pair(2, 2).is_err());
    }
}
