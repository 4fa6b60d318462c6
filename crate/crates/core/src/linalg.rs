//! Small dense linear algebra: row-major matrices and a one-sided Jacobi SVD.
//!
//! Everything here is sized for desk-scale problems (tens of rows and
//! columns). The SVD is the single source of rank decisions in the crate so
//! that LICQ-type verdicts and null-space computations never disagree.

use crate::num::{abs, sqrt};
use crate::prelude::*;
use core::fmt;

/// Default relative threshold for numerical rank.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from row slices. All rows must have length `cols`.
    pub fn from_rows(rows: &[Vec<f64>], cols: usize) -> Self {
        let mut m = Self::zeros(rows.len(), cols);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), cols, "row {i} has wrong length");
            m.data[i * cols..(i + 1) * cols].copy_from_slice(r);
        }
        m
    }

    /// Builds a matrix whose columns are the given vectors of length `rows`.
    pub fn from_columns(columns: &[Vec<f64>], rows: usize) -> Self {
        let mut m = Self::zeros(rows, columns.len());
        for (j, c) in columns.iter().enumerate() {
            assert_eq!(c.len(), rows, "column {j} has wrong length");
            for i in 0..rows {
                m[(i, j)] = c[i];
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// Keeps only the listed columns, in the listed order.
    pub fn select_columns(&self, cols: &[usize]) -> Matrix {
        let mut m = Matrix::zeros(self.rows, cols.len());
        for i in 0..self.rows {
            for (k, &j) in cols.iter().enumerate() {
                m[(i, k)] = self[(i, j)];
            }
        }
        m
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(abs(*x)))
    }
}

impl core::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

/// Thin singular value decomposition `A = U diag(s) V^T`.
///
/// `u` is `rows x cols`, `v` is `cols x cols`; singular values are sorted in
/// descending order. Columns of `u` belonging to zero singular values are zero.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: Matrix,
    pub singular_values: Vec<f64>,
    pub v: Matrix,
}

const JACOBI_MAX_SWEEPS: usize = 80;

/// One-sided (Hestenes) Jacobi SVD.
pub fn svd(a: &Matrix) -> Svd {
    let (m, n) = (a.rows, a.cols);
    let mut w = a.clone();
    let mut v = Matrix::identity(n);
    let eps = f64::EPSILON;

    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for i in 0..m {
                    let (wp, wq) = (w[(i, p)], w[(i, q)]);
                    alpha += wp * wp;
                    beta += wq * wq;
                    gamma += wp * wq;
                }
                if gamma == 0.0 || abs(gamma) <= eps * sqrt(alpha * beta) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = libm::copysign(1.0, zeta) / (abs(zeta) + sqrt(1.0 + zeta * zeta));
                let c = 1.0 / sqrt(1.0 + t * t);
                let s = c * t;
                for i in 0..m {
                    let (wp, wq) = (w[(i, p)], w[(i, q)]);
                    w[(i, p)] = c * wp - s * wq;
                    w[(i, q)] = s * wp + c * wq;
                }
                for i in 0..n {
                    let (vp, vq) = (v[(i, p)], v[(i, q)]);
                    v[(i, p)] = c * vp - s * vq;
                    v[(i, q)] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = (0..n)
        .map(|j| sqrt((0..m).map(|i| w[(i, j)] * w[(i, j)]).sum()))
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    // stable sort keeps the column order deterministic among equal values
    order.sort_by(|&x, &y| norms[y].partial_cmp(&norms[x]).unwrap_or(core::cmp::Ordering::Equal));

    let mut u = Matrix::zeros(m, n);
    let mut vs = Matrix::zeros(n, n);
    let mut s = Vec::with_capacity(n);
    for (k, &j) in order.iter().enumerate() {
        let sigma = norms[j];
        s.push(sigma);
        for i in 0..n {
            vs[(i, k)] = v[(i, j)];
        }
        if sigma > 0.0 {
            for i in 0..m {
                u[(i, k)] = w[(i, j)] / sigma;
            }
        }
    }
    Svd {
        u,
        singular_values: s,
        v: vs,
    }
}

impl Svd {
    fn cutoff(&self, tol_rank: f64) -> f64 {
        let smax = self.singular_values.first().copied().unwrap_or(0.0);
        tol_rank * smax
    }

    pub fn rank(&self, tol_rank: f64) -> usize {
        let smax = self.singular_values.first().copied().unwrap_or(0.0);
        if smax == 0.0 {
            return 0;
        }
        let cut = self.cutoff(tol_rank);
        self.singular_values.iter().filter(|&&s| s > cut).count()
    }
}

/// Number of singular values above `tol_rank` times the largest one.
pub fn rank(a: &Matrix, tol_rank: f64) -> usize {
    if a.rows == 0 || a.cols == 0 {
        return 0;
    }
    svd(a).rank(tol_rank)
}

/// Rank of a family of vectors (each of the same length).
pub fn rank_of_family(vectors: &[Vec<f64>], tol_rank: f64) -> usize {
    match vectors.first() {
        None => 0,
        Some(v0) => rank(&Matrix::from_rows(vectors, v0.len()), tol_rank),
    }
}

/// Orthonormal basis of `{x : A x = 0}`, one vector per basis element.
pub fn nullspace_basis(a: &Matrix, tol_rank: f64) -> Vec<Vec<f64>> {
    let n = a.cols;
    if n == 0 {
        return Vec::new();
    }
    if a.rows == 0 {
        return (0..n)
            .map(|k| (0..n).map(|i| if i == k { 1.0 } else { 0.0 }).collect())
            .collect();
    }
    let d = svd(a);
    let r = d.rank(tol_rank);
    (r..n).map(|k| d.v.column(k)).collect()
}

/// Minimum-norm least-squares solution of `A x = b` via the SVD.
pub fn lstsq(a: &Matrix, b: &[f64], tol_rank: f64) -> Vec<f64> {
    assert_eq!(b.len(), a.rows);
    let n = a.cols;
    let mut x = vec![0.0; n];
    if a.rows == 0 || n == 0 {
        return x;
    }
    let d = svd(a);
    let r = d.rank(tol_rank);
    for k in 0..r {
        let uk = d.u.column(k);
        let coef: f64 = uk.iter().zip(b).map(|(u, bb)| u * bb).sum::<f64>() / d.singular_values[k];
        for i in 0..n {
            x[i] += coef * d.v[(i, k)];
        }
    }
    x
}
