//! Index sets at a point and along a direction, branch enumeration, and the
//! tightened and branch NLP views.

use crate::expr::DomainError;
use crate::linalg::Matrix;
use crate::model::{MpscInstance, SmoothFunction};
use crate::num::{abs, dot};
use crate::prelude::*;
use core::fmt;

/// Numerical tolerances shared by all verdict producers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    /// `|v| <= act` counts as an active constraint.
    pub act: f64,
    /// `|grad . d| <= dir` counts as a vanishing directional derivative.
    pub dir: f64,
    /// Linear-system residual and LP feasibility tolerance.
    pub lin: f64,
    /// Relative singular-value threshold for rank decisions.
    pub rank: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            act: 1e-8,
            dir: 1e-8,
            lin: 1e-9,
            rank: crate::linalg::DEFAULT_RANK_TOL,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum AnalysisError {
    Domain(DomainError),
    CapExceeded { size: usize, cap: usize },
    InvalidBipartition,
    DimensionMismatch { expected: usize, got: usize },
}

impl From<DomainError> for AnalysisError {
    fn from(e: DomainError) -> Self {
        AnalysisError::Domain(e)
    }
}

impl fmt::Display for AnalysisError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnalysisError::Domain(e) => e.fmt(f),
            AnalysisError::CapExceeded { size, cap } => {
                write!(f, "{size} biactive pairs exceed the bipartition cap of {cap}")
            }
            AnalysisError::InvalidBipartition => f.write_str("bipartition must split the biactive set"),
            AnalysisError::DimensionMismatch { expected, got } => {
                write!(f, "expected a vector of length {expected}, got {got}")
            }
        }
    }
}

impl core::error::Error for AnalysisError {}

/// Which constraint value sits close to the activity threshold.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstraintRef {
    Ineq(usize),
    Eq(usize),
    SwitchG(usize),
    SwitchH(usize),
}

impl fmt::Display for ConstraintRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstraintRef::Ineq(i) => write!(f, "g{}", i + 1),
            ConstraintRef::Eq(j) => write!(f, "h{}", j + 1),
            ConstraintRef::SwitchG(i) => write!(f, "G{}", i + 1),
            ConstraintRef::SwitchH(i) => write!(f, "H{}", i + 1),
        }
    }
}

/// Index-set classification of a point.
///
/// Index sets are 0-based and sorted. The multiplier layout used by the
/// gradient matrix is `(g_1..g_p, h_1..h_q, G_1..G_m, H_1..H_m)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ActivePattern {
    pub point: Vec<f64>,
    pub tol_act: f64,
    pub p: usize,
    pub q: usize,
    pub m: usize,
    /// `I_g`: active inequalities.
    pub active_ineq: Vec<usize>,
    /// `I_G`: `G_i = 0`, `H_i != 0`.
    pub only_g: Vec<usize>,
    /// `I_H`: `G_i != 0`, `H_i = 0`.
    pub only_h: Vec<usize>,
    /// `I_GH`: `G_i = H_i = 0`.
    pub biactive: Vec<usize>,
    /// Pairs with neither function zero (the point violates the switch).
    pub broken_pairs: Vec<usize>,
    pub values: Vec<f64>,
    /// Constraint gradients as columns of an `n x (p + q + 2m)` matrix.
    pub gradients: Matrix,
    pub objective_gradient: Vec<f64>,
    /// Sum of constraint violations (zero exactly at feasible points).
    pub residual: f64,
    /// Values with `tol_act < |v| <= 2 tol_act`.
    pub near_ties: Vec<ConstraintRef>,
}

impl ActivePattern {
    pub fn compute(inst: &MpscInstance, z: &[f64], tol_act: f64) -> Result<Self, AnalysisError> {
        if z.len() != inst.dim() {
            return Err(AnalysisError::DimensionMismatch { expected: inst.dim(), got: z.len() });
        }
        let (p, q, m) = (inst.num_ineq(), inst.num_eq(), inst.num_switch());
        let values: Vec<f64> = (0..inst.num_multipliers())
            .map(|k| inst.constraint(k).value(z))
            .collect::<Result<_, _>>()?;
        let gradients = inst.constraint_jacobian_columns(z)?;
        let objective_gradient = inst.objective().gradient(z)?;

        let zero = |v: f64| abs(v) <= tol_act;
        let mut near_ties = Vec::new();
        let mut tie = |v: f64, r: ConstraintRef| {
            if abs(v) > tol_act && abs(v) <= 2.0 * tol_act {
                near_ties.push(r);
            }
        };
        let mut active_ineq = Vec::new();
        for i in 0..p {
            tie(values[i], ConstraintRef::Ineq(i));
            if zero(values[i]) {
                active_ineq.push(i);
            }
        }
        for j in 0..q {
            tie(values[p + j], ConstraintRef::Eq(j));
        }
        let (mut only_g, mut only_h, mut biactive, mut broken_pairs) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for i in 0..m {
            let (gv, hv) = (values[p + q + i], values[p + q + m + i]);
            tie(gv, ConstraintRef::SwitchG(i));
            tie(hv, ConstraintRef::SwitchH(i));
            match (zero(gv), zero(hv)) {
                (true, true) => biactive.push(i),
                (true, false) => only_g.push(i),
                (false, true) => only_h.push(i),
                (false, false) => broken_pairs.push(i),
            }
        }
        let residual = crate::bounds::residual_of_values(&values, p, q, m).total;
        Ok(Self {
            point: z.to_vec(),
            tol_act,
            p,
            q,
            m,
            active_ineq,
            only_g,
            only_h,
            biactive,
            broken_pairs,
            values,
            gradients,
            objective_gradient,
            residual,
            near_ties,
        })
    }

    pub fn dim(&self) -> usize {
        self.point.len()
    }

    pub fn num_multipliers(&self) -> usize {
        self.p + self.q + 2 * self.m
    }

    /// Multiplier coordinate of `g_i`.
    pub fn g_coord(&self, i: usize) -> usize {
        i
    }

    pub fn h_coord(&self, j: usize) -> usize {
        self.p + j
    }

    pub fn big_g_coord(&self, i: usize) -> usize {
        self.p + self.q + i
    }

    pub fn big_h_coord(&self, i: usize) -> usize {
        self.p + self.q + self.m + i
    }

    pub fn gradient(&self, coord: usize) -> Vec<f64> {
        self.gradients.column(coord)
    }

    /// Feasible within the activity tolerance: no violated inequality or
    /// equality and no broken switching pair.
    pub fn is_feasible(&self) -> bool {
        self.broken_pairs.is_empty()
            && (0..self.p).all(|i| self.values[i] <= self.tol_act)
            && (0..self.q).all(|j| abs(self.values[self.p + j]) <= self.tol_act)
    }

    /// Feasible, but only up to the tolerance (index sets are an extension here).
    pub fn nearly_feasible_only(&self) -> bool {
        self.is_feasible() && self.residual > 0.0
    }

    /// `d` lies in the linearization cone of the feasible set.
    pub fn linearization_cone_member(&self, d: &[f64], tau: f64) -> bool {
        let s = |k: usize| dot(&self.gradients.column(k), d);
        self.active_ineq.iter().all(|&i| s(self.g_coord(i)) <= tau)
            && (0..self.q).all(|j| abs(s(self.h_coord(j))) <= tau)
            && self.only_g.iter().all(|&i| abs(s(self.big_g_coord(i))) <= tau)
            && self.only_h.iter().all(|&i| abs(s(self.big_h_coord(i))) <= tau)
            && self
                .biactive
                .iter()
                .all(|&i| abs(s(self.big_g_coord(i)) * s(self.big_h_coord(i))) <= tau * tau)
    }

    /// `d` lies in the critical cone (linearization cone plus `grad f . d <= tau`).
    pub fn critical_cone_member(&self, d: &[f64], tau: f64) -> bool {
        self.linearization_cone_member(d, tau) && dot(&self.objective_gradient, d) <= tau
    }
}

/// Refinement of an [`ActivePattern`] along a direction `d`.
#[derive(Clone, Debug, PartialEq)]
pub struct DirectionalPattern {
    pub base: ActivePattern,
    pub direction: Vec<f64>,
    pub tol_dir: f64,
    /// `I_g(d)`: active inequalities with `grad g_i . d = 0`.
    pub active_ineq: Vec<usize>,
    /// `I_G(d)`: biactive with `grad G_i . d = 0 != grad H_i . d`.
    pub only_g: Vec<usize>,
    /// `I_H(d)`: biactive with `grad G_i . d != 0 = grad H_i . d`.
    pub only_h: Vec<usize>,
    /// `I_GH(d)`: biactive with both derivatives zero.
    pub biactive: Vec<usize>,
    /// Biactive pairs with both derivatives nonzero (`d` leaves the switching set).
    pub broken_pairs: Vec<usize>,
}

impl DirectionalPattern {
    pub fn new(base: &ActivePattern, d: &[f64], tol_dir: f64) -> Result<Self, AnalysisError> {
        if d.len() != base.dim() {
            return Err(AnalysisError::DimensionMismatch { expected: base.dim(), got: d.len() });
        }
        let s = |k: usize| dot(&base.gradients.column(k), d);
        let zero = |v: f64| abs(v) <= tol_dir;
        let active_ineq = base.active_ineq.iter().copied().filter(|&i| zero(s(base.g_coord(i)))).collect();
        let (mut only_g, mut only_h, mut biactive, mut broken_pairs) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for &i in &base.biactive {
            match (zero(s(base.big_g_coord(i))), zero(s(base.big_h_coord(i)))) {
                (true, true) => biactive.push(i),
                (true, false) => only_g.push(i),
                (false, true) => only_h.push(i),
                (false, false) => broken_pairs.push(i),
            }
        }
        Ok(Self {
            base: base.clone(),
            direction: d.to_vec(),
            tol_dir,
            active_ineq,
            only_g,
            only_h,
            biactive,
            broken_pairs,
        })
    }

    /// The pattern along `d = 0`, identical to the plain index sets.
    pub fn zero(base: &ActivePattern) -> Self {
        Self::new(base, &vec![0.0; base.dim()], 0.0).expect("dimensions agree")
    }

    pub fn is_zero_direction(&self) -> bool {
        self.direction.iter().all(|v| *v == 0.0)
    }

    /// Pairs whose `G_i` gradient enters the directional LICQ family:
    /// `I_G ∪ I_G(d) ∪ I_GH(d)`.
    pub fn g_family(&self) -> Vec<usize> {
        sorted_union(&[&self.base.only_g, &self.only_g, &self.biactive])
    }

    /// `I_H ∪ I_H(d) ∪ I_GH(d)`.
    pub fn h_family(&self) -> Vec<usize> {
        sorted_union(&[&self.base.only_h, &self.only_h, &self.biactive])
    }

    /// `I_G ∪ I_G(d)`: pairs where the `H` multiplier vanishes.
    pub fn g_side(&self) -> Vec<usize> {
        sorted_union(&[&self.base.only_g, &self.only_g])
    }

    /// `I_H ∪ I_H(d)`: pairs where the `G` multiplier vanishes.
    pub fn h_side(&self) -> Vec<usize> {
        sorted_union(&[&self.base.only_h, &self.only_h])
    }
}

pub(crate) fn sorted_union(sets: &[&Vec<usize>]) -> Vec<usize> {
    let mut v: Vec<usize> = sets.iter().flat_map(|s| s.iter().copied()).collect();
    v.sort_unstable();
    v.dedup();
    v
}

/// A split of the biactive set: `G_i = 0` on `beta1`, `H_i = 0` on `beta2`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Bipartition {
    pub beta1: Vec<usize>,
    pub beta2: Vec<usize>,
}

impl Bipartition {
    pub fn new(mut beta1: Vec<usize>, mut beta2: Vec<usize>, biactive: &[usize]) -> Result<Self, AnalysisError> {
        beta1.sort_unstable();
        beta2.sort_unstable();
        let mut all = beta1.clone();
        all.extend_from_slice(&beta2);
        all.sort_unstable();
        let mut expected = biactive.to_vec();
        expected.sort_unstable();
        if all != expected {
            return Err(AnalysisError::InvalidBipartition);
        }
        Ok(Self { beta1, beta2 })
    }
}

impl fmt::Display for Bipartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let set = |s: &[usize]| s.iter().map(|i| format!("{}", i + 1)).collect::<Vec<_>>().join(",");
        write!(f, "({{{}}}, {{{}}})", set(&self.beta1), set(&self.beta2))
    }
}

pub const DEFAULT_BIPARTITION_CAP: usize = 20;

/// All `2^|I_GH|` bipartitions, from "everything in `beta1`" down to
/// "everything in `beta2`" (binary counter over the sorted biactive set,
/// bit set puts the index in `beta1`, counting down).
pub fn enumerate_bipartitions(pat: &ActivePattern, cap: usize) -> Result<Vec<Bipartition>, AnalysisError> {
    let s = pat.biactive.len();
    if s > cap || s >= usize::BITS as usize {
        return Err(AnalysisError::CapExceeded { size: s, cap });
    }
    let count = 1usize << s;
    Ok((0..count)
        .rev()
        .map(|k| {
            let (mut beta1, mut beta2) = (Vec::new(), Vec::new());
            for (j, &i) in pat.biactive.iter().enumerate() {
                if (k >> j) & 1 == 1 {
                    beta1.push(i);
                } else {
                    beta2.push(i);
                }
            }
            Bipartition { beta1, beta2 }
        })
        .collect())
}

/// Original constraint behind an NLP view member.
pub type Origin = ConstraintRef;

#[derive(Clone, Debug)]
pub struct ViewConstraint {
    pub origin: Origin,
    pub function: SmoothFunction,
}

/// A smooth NLP `{ineq <= 0, eq = 0}` derived from the instance.
#[derive(Clone, Debug)]
pub struct NlpView {
    pub n: usize,
    pub ineq: Vec<ViewConstraint>,
    pub eq: Vec<ViewConstraint>,
}

impl NlpView {
    fn with_equalities(inst: &MpscInstance, g_eq: &[usize], h_eq: &[usize]) -> Self {
        let ineq = (0..inst.num_ineq())
            .map(|i| ViewConstraint { origin: Origin::Ineq(i), function: inst.ineq(i).clone() })
            .collect();
        let mut eq: Vec<ViewConstraint> = (0..inst.num_eq())
            .map(|j| ViewConstraint { origin: Origin::Eq(j), function: inst.eq(j).clone() })
            .collect();
        eq.extend(g_eq.iter().map(|&i| ViewConstraint { origin: Origin::SwitchG(i), function: inst.switch_g(i).clone() }));
        eq.extend(h_eq.iter().map(|&i| ViewConstraint { origin: Origin::SwitchH(i), function: inst.switch_h(i).clone() }));
        Self { n: inst.dim(), ineq, eq }
    }

    /// Tightened problem: every switching function vanishing at the point
    /// becomes an equality.
    pub fn tnlp(inst: &MpscInstance, pat: &ActivePattern) -> Self {
        Self::with_equalities(
            inst,
            &sorted_union(&[&pat.only_g, &pat.biactive]),
            &sorted_union(&[&pat.only_h, &pat.biactive]),
        )
    }

    /// Branch problem `NLP(beta1, beta2)`.
    pub fn branch(inst: &MpscInstance, pat: &ActivePattern, bp: &Bipartition) -> Self {
        Self::with_equalities(
            inst,
            &sorted_union(&[&pat.only_g, &bp.beta1]),
            &sorted_union(&[&pat.only_h, &bp.beta2]),
        )
    }

    pub fn all_affine(&self) -> bool {
        self.ineq.iter().chain(&self.eq).all(|c| c.function.is_affine())
    }

    /// Indices of inequalities with `|g_i(z)| <= tol`.
    pub fn active_ineq(&self, z: &[f64], tol: f64) -> Result<Vec<usize>, DomainError> {
        let mut out = Vec::new();
        for (i, c) in self.ineq.iter().enumerate() {
            if abs(c.function.value(z)?) <= tol {
                out.push(i);
            }
        }
        Ok(out)
    }

    /// Largest violation of the view's constraints at `z`.
    pub fn violation(&self, z: &[f64]) -> Result<f64, DomainError> {
        let mut v: f64 = 0.0;
        for c in &self.ineq {
            v = v.max(c.function.value(z)?);
        }
        for c in &self.eq {
            v = v.max(abs(c.function.value(z)?));
        }
        Ok(v)
    }
}

pub fn build_tnlp(inst: &MpscInstance, pat: &ActivePattern) -> NlpView {
    NlpView::tnlp(inst, pat)
}

pub fn build_branch_nlp(inst: &MpscInstance, pat: &ActivePattern, bp: &Bipartition) -> NlpView {
    NlpView::branch(inst, pat, bp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{ladder_example, switching_counterexample};

    #[test]
    fn example_index_sets_at_origin() {
        let pat = ActivePattern::compute(&ladder_example(), &[0.0, 0.0], 1e-8).unwrap();
        assert_eq!(pat.active_ineq, vec![0]);
        assert_eq!(pat.biactive, vec![0]);
        assert!(pat.only_g.is_empty() && pat.only_h.is_empty());
        assert!(pat.is_feasible() && pat.residual == 0.0);
    }

    #[test]
    fn example_index_sets_off_origin() {
        let pat = ActivePattern::compute(&ladder_example(), &[1.0, 0.0], 1e-8).unwrap();
        assert!(pat.active_ineq.is_empty());
        assert_eq!(pat.only_h, vec![0]);
        let cx = ActivePattern::compute(&switching_counterexample(), &[0.0, 0.0], 1e-8).unwrap();
        assert_eq!(cx.biactive, vec![0]);
    }

    #[test]
    fn directional_sets() {
        let pat = ActivePattern::compute(&ladder_example(), &[0.0, 0.0], 1e-8).unwrap();
        let dp = DirectionalPattern::new(&pat, &[0.0, -1.0], 1e-8).unwrap();
        assert!(dp.active_ineq.is_empty());
        assert_eq!(dp.only_g, vec![0]);
        assert!(dp.only_h.is_empty() && dp.biactive.is_empty());

        let z = DirectionalPattern::zero(&pat);
        assert_eq!(z.active_ineq, pat.active_ineq);
        assert_eq!(z.biactive, pat.biactive);
        assert!(z.only_g.is_empty() && z.only_h.is_empty());

        let cx = ActivePattern::compute(&switching_counterexample(), &[0.0, 0.0], 1e-8).unwrap();
        let dp = DirectionalPattern::new(&cx, &[0.0, 1.0], 1e-8).unwrap();
        assert_eq!(dp.biactive, vec![0]);
    }

    #[test]
    fn cone_membership() {
        let pat = ActivePattern::compute(&ladder_example(), &[0.0, 0.0], 1e-8).unwrap();
        assert!(pat.linearization_cone_member(&[0.0, -1.0], 1e-9));
        assert!(!pat.linearization_cone_member(&[1.0, 1.0], 1e-9));
        assert!(pat.linearization_cone_member(&[1.0, 0.0], 1e-9));
        assert!(pat.critical_cone_member(&[0.0, -1.0], 1e-9));
        assert!(!pat.critical_cone_member(&[1.0, 0.0], 1e-9));
        assert!(pat.critical_cone_member(&[0.0, 0.0], 0.0));
    }

    #[test]
    fn bipartition_order() {
        let pat = ActivePattern::compute(&ladder_example(), &[0.0, 0.0], 1e-8).unwrap();
        let bps = enumerate_bipartitions(&pat, DEFAULT_BIPARTITION_CAP).unwrap();
        assert_eq!(bps, vec![Bipartition { beta1: vec![0], beta2: vec![] }, Bipartition { beta1: vec![], beta2: vec![0] }]);
        let off = ActivePattern::compute(&ladder_example(), &[1.0, 0.0], 1e-8).unwrap();
        assert_eq!(enumerate_bipartitions(&off, 20).unwrap(), vec![Bipartition { beta1: vec![], beta2: vec![] }]);
        assert!(matches!(enumerate_bipartitions(&pat, 0), Err(AnalysisError::CapExceeded { .. })));
        assert!(Bipartition::new(vec![0], vec![0], &[0]).is_err());
    }

    #[test]
    fn views() {
        let inst = ladder_example();
        let pat = ActivePattern::compute(&inst, &[0.0, 0.0], 1e-8).unwrap();
        let t = build_tnlp(&inst, &pat);
        assert_eq!(t.eq.iter().map(|c| c.origin).collect::<Vec<_>>(), vec![Origin::SwitchG(0), Origin::SwitchH(0)]);
        assert_eq!(t.ineq.len(), 1);

        let cx = switching_counterexample();
        let pat = ActivePattern::compute(&cx, &[0.0, 0.0], 1e-8).unwrap();
        let b = build_branch_nlp(&cx, &pat, &Bipartition { beta1: vec![0], beta2: vec![] });
        assert_eq!(b.eq.len(), 1);
        assert_eq!(b.eq[0].function.gradient(&[0.3, 0.7]).unwrap(), vec![-1.0, 0.0]);
        assert_eq!(build_tnlp(&cx, &pat).eq.len(), 2);
    }

    #[test]
    fn near_ties_are_flagged() {
        let pat = ActivePattern::compute(&ladder_example(), &[1.5e-8, 0.0], 1e-8).unwrap();
        assert_eq!(pat.near_ties, vec![ConstraintRef::Ineq(0), ConstraintRef::SwitchG(0)]);
    }
}
