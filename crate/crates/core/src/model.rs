//! Smooth functions and the switching-constrained program container.

use crate::expr::{DomainError, DomainErrorKind, Expr};
use crate::linalg::Matrix;
use crate::prelude::*;
use core::fmt;
use once_cell::race::OnceBox;

/// An expression together with its symbolic gradient and (lazily) Hessian.
pub struct SmoothFunction {
    n: usize,
    value: Expr,
    gradient: Vec<Expr>,
    // lower triangle, row-major: entry (i, j) with j <= i at i*(i+1)/2 + j
    hessian: OnceBox<Vec<Expr>>,
}

impl Clone for SmoothFunction {
    fn clone(&self) -> Self {
        let hessian = OnceBox::new();
        if let Some(h) = self.hessian.get() {
            let _ = hessian.set(Box::new(h.clone()));
        }
        Self {
            n: self.n,
            value: self.value.clone(),
            gradient: self.gradient.clone(),
            hessian,
        }
    }
}

impl fmt::Debug for SmoothFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothFunction")
            .field("n", &self.n)
            .field("value", &format_args!("{}", self.value))
            .finish()
    }
}

/// Value, gradient and optional Hessian at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: Option<Matrix>,
}

impl SmoothFunction {
    /// Differentiates `value` in all `n` variables.
    pub fn new(value: Expr, n: usize) -> Self {
        let gradient = (0..n).map(|i| value.differentiate(i)).collect();
        Self {
            n,
            value,
            gradient,
            hessian: OnceBox::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn expr(&self) -> &Expr {
        &self.value
    }

    pub fn gradient_exprs(&self) -> &[Expr] {
        &self.gradient
    }

    fn hessian_table(&self) -> &Vec<Expr> {
        self.hessian.get_or_init(|| {
            let mut t = Vec::with_capacity(self.n * (self.n + 1) / 2);
            for i in 0..self.n {
                for j in 0..=i {
                    t.push(self.gradient[j].differentiate(i));
                }
            }
            Box::new(t)
        })
    }

    /// Symbolic second derivative d^2/(dz_i dz_j).
    pub fn hessian_expr(&self, i: usize, j: usize) -> &Expr {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        &self.hessian_table()[r * (r + 1) / 2 + c]
    }

    /// True when every second derivative folds to the constant zero.
    pub fn is_affine(&self) -> bool {
        self.hessian_table().iter().all(Expr::is_zero)
    }

    fn check_dim(&self, z: &[f64]) -> Result<(), DomainError> {
        if z.len() != self.n {
            return Err(DomainError {
                kind: DomainErrorKind::DimensionMismatch,
                node: format!("{}", self.value),
                point: z.to_vec(),
            });
        }
        Ok(())
    }

    pub fn value(&self, z: &[f64]) -> Result<f64, DomainError> {
        self.check_dim(z)?;
        self.value.eval(z)
    }

    pub fn gradient(&self, z: &[f64]) -> Result<Vec<f64>, DomainError> {
        self.check_dim(z)?;
        self.gradient.iter().map(|g| g.eval(z)).collect()
    }

    pub fn hessian(&self, z: &[f64]) -> Result<Matrix, DomainError> {
        self.check_dim(z)?;
        let mut h = Matrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for j in 0..=i {
                let v = self.hessian_expr(i, j).eval(z)?;
                h[(i, j)] = v;
                h[(j, i)] = v;
            }
        }
        Ok(h)
    }

    /// `d^T H(z) d` without materialising the matrix.
    pub fn hessian_quadratic_form(&self, z: &[f64], d: &[f64]) -> Result<f64, DomainError> {
        self.check_dim(z)?;
        let mut acc = 0.0;
        for i in 0..self.n {
            if d[i] == 0.0 {
                continue;
            }
            for j in 0..=i {
                if d[j] == 0.0 {
                    continue;
                }
                let e = self.hessian_expr(i, j);
                if e.is_zero() {
                    continue;
                }
                let v = e.eval(z)?;
                acc += if i == j { v * d[i] * d[i] } else { 2.0 * v * d[i] * d[j] };
            }
        }
        Ok(acc)
    }

    pub fn evaluate(&self, z: &[f64], with_hessian: bool) -> Result<Evaluation, DomainError> {
        Ok(Evaluation {
            value: self.value(z)?,
            gradient: self.gradient(z)?,
            hessian: if with_hessian { Some(self.hessian(z)?) } else { None },
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ModelError {
    /// An expression references a variable index `>= n`.
    UnknownVariable { index: usize, n: usize, context: String },
    /// The names map has the wrong length.
    NameCount { expected: usize, got: usize },
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::UnknownVariable { index, n, context } => write!(
                f,
                "{context} references variable index {index} but the instance has dimension {n}"
            ),
            ModelError::NameCount { expected, got } => {
                write!(f, "expected {expected} variable names, got {got}")
            }
        }
    }
}

impl core::error::Error for ModelError {}

/// `min f(z) s.t. g(z) <= 0, h(z) = 0, G_i(z) H_i(z) = 0`.
#[derive(Clone, Debug)]
pub struct MpscInstance {
    n: usize,
    objective: SmoothFunction,
    ineq: Vec<SmoothFunction>,
    eq: Vec<SmoothFunction>,
    switches: Vec<(SmoothFunction, SmoothFunction)>,
    names: Option<Vec<String>>,
}

impl MpscInstance {
    pub fn new(
        n: usize,
        objective: Expr,
        ineq: Vec<Expr>,
        eq: Vec<Expr>,
        switches: Vec<(Expr, Expr)>,
    ) -> Result<Self, ModelError> {
        let check = |e: &Expr, context: String| match e.max_var() {
            Some(index) if index >= n => Err(ModelError::UnknownVariable { index, n, context }),
            _ => Ok(()),
        };
        check(&objective, "objective".into())?;
        for (i, e) in ineq.iter().enumerate() {
            check(e, format!("inequality {}", i + 1))?;
        }
        for (j, e) in eq.iter().enumerate() {
            check(e, format!("equality {}", j + 1))?;
        }
        for (i, (g, h)) in switches.iter().enumerate() {
            check(g, format!("switch {} (G)", i + 1))?;
            check(h, format!("switch {} (H)", i + 1))?;
        }
        Ok(Self {
            n,
            objective: SmoothFunction::new(objective, n),
            ineq: ineq.into_iter().map(|e| SmoothFunction::new(e, n)).collect(),
            eq: eq.into_iter().map(|e| SmoothFunction::new(e, n)).collect(),
            switches: switches
                .into_iter()
                .map(|(g, h)| (SmoothFunction::new(g, n), SmoothFunction::new(h, n)))
                .collect(),
            names: None,
        })
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self, ModelError> {
        if names.len() != self.n {
            return Err(ModelError::NameCount {
                expected: self.n,
                got: names.len(),
            });
        }
        self.names = Some(names);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of inequality constraints `p`.
    pub fn num_ineq(&self) -> usize {
        self.ineq.len()
    }

    /// Number of equality constraints `q`.
    pub fn num_eq(&self) -> usize {
        self.eq.len()
    }

    /// Number of switching pairs `m`.
    pub fn num_switch(&self) -> usize {
        self.switches.len()
    }

    pub fn objective(&self) -> &SmoothFunction {
        &self.objective
    }

    pub fn ineq(&self, i: usize) -> &SmoothFunction {
        &self.ineq[i]
    }

    pub fn eq(&self, j: usize) -> &SmoothFunction {
        &self.eq[j]
    }

    pub fn switch_g(&self, i: usize) -> &SmoothFunction {
        &self.switches[i].0
    }

    pub fn switch_h(&self, i: usize) -> &SmoothFunction {
        &self.switches[i].1
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    /// Constraint function behind a multiplier coordinate (layout g, h, G, H).
    pub fn constraint(&self, coord: usize) -> &SmoothFunction {
        let (p, q, m) = (self.num_ineq(), self.num_eq(), self.num_switch());
        if coord < p {
            &self.ineq[coord]
        } else if coord < p + q {
            &self.eq[coord - p]
        } else if coord < p + q + m {
            &self.switches[coord - p - q].0
        } else {
            &self.switches[coord - p - q - m].1
        }
    }

    /// Number of multiplier coordinates `p + q + 2m`.
    pub fn num_multipliers(&self) -> usize {
        self.num_ineq() + self.num_eq() + 2 * self.num_switch()
    }

    /// All constraint functions are affine.
    pub fn constraints_affine(&self) -> bool {
        (0..self.num_multipliers()).all(|k| self.constraint(k).is_affine())
    }

    /// Gradients of every constraint at `z`, as columns in multiplier order.
    pub fn constraint_jacobian_columns(&self, z: &[f64]) -> Result<Matrix, DomainError> {
        let cols: Vec<Vec<f64>> = (0..self.num_multipliers())
            .map(|k| self.constraint(k).gradient(z))
            .collect::<Result<_, _>>()?;
        Ok(Matrix::from_columns(&cols, self.n))
    }
}
