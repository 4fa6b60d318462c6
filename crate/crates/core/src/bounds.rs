//! Error-bound residual, distance to the feasible set, error-bound modulus
//! estimates and the exact penalty.

use crate::analysis::{enumerate_bipartitions, ActivePattern, AnalysisError, Bipartition, NlpView};
use crate::expr::DomainError;
use crate::linalg::{lstsq, Matrix};
use crate::model::{MpscInstance, SmoothFunction};
use crate::num::{abs, dist2, dot, norm2, norm_inf, sqrt};
use crate::prelude::*;
use crate::sampling;
use core::fmt;

#[derive(Clone, Debug, PartialEq)]
pub struct ResidualBreakdown {
    pub g_part: f64,
    pub h_part: f64,
    pub switch_part: f64,
    pub total: f64,
    pub beta1: Vec<usize>,
    pub beta2: Vec<usize>,
}

pub(crate) fn residual_of_values(values: &[f64], p: usize, q: usize, m: usize) -> ResidualBreakdown {
    let g_part: f64 = values[..p].iter().map(|v| v.max(0.0)).sum();
    let h_part: f64 = values[p..p + q].iter().map(|v| abs(*v)).sum();
    let (mut beta1, mut beta2) = (Vec::new(), Vec::new());
    let mut switch_part = 0.0;
    for i in 0..m {
        let (g, h) = (abs(values[p + q + i]), abs(values[p + q + m + i]));
        if g <= h {
            beta1.push(i);
            switch_part += g;
        } else {
            beta2.push(i);
            switch_part += h;
        }
    }
    ResidualBreakdown { g_part, h_part, switch_part, total: g_part + h_part + switch_part, beta1, beta2 }
}

/// Error-bound residual of `inst` at `z`.
pub fn residual(inst: &MpscInstance, z: &[f64]) -> Result<ResidualBreakdown, DomainError> {
    let values: Vec<f64> = (0..inst.num_multipliers()).map(|k| inst.constraint(k).value(z)).collect::<Result<_, _>>()?;
    Ok(residual_of_values(&values, inst.num_ineq(), inst.num_eq(), inst.num_switch()))
}

#[derive(Clone, Debug, PartialEq)]
pub enum BoundsError {
    Domain(DomainError),
    Analysis(AnalysisError),
}

impl fmt::Display for BoundsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundsError::Domain(e) => e.fmt(f),
            BoundsError::Analysis(e) => e.fmt(f),
        }
    }
}

impl core::error::Error for BoundsError {}

impl From<DomainError> for BoundsError {
    fn from(e: DomainError) -> Self {
        BoundsError::Domain(e)
    }
}

impl From<AnalysisError> for BoundsError {
    fn from(e: AnalysisError) -> Self {
        BoundsError::Analysis(e)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DistanceOptions {
    pub tol_act: f64,
    pub tol_rank: f64,
    /// Constraint violation accepted for a projected point.
    pub tol_feas: f64,
    pub bipartition_cap: usize,
    /// Largest inequality count enumerated exactly on an affine branch.
    pub active_set_cap: usize,
    pub starts: usize,
    pub rounds: usize,
    pub growth: f64,
    pub seed: u64,
}

impl Default for DistanceOptions {
    fn default() -> Self {
        Self {
            tol_act: 1e-8,
            tol_rank: 1e-10,
            tol_feas: 1e-9,
            bipartition_cap: crate::analysis::DEFAULT_BIPARTITION_CAP,
            active_set_cap: 16,
            starts: 8,
            rounds: 5,
            growth: 10.0,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Distance {
    pub value: f64,
    pub nearest: Vec<f64>,
    pub branch: Bipartition,
    /// Every branch was projected exactly; otherwise `value` is an upper bound.
    pub exact: bool,
}

struct Linearized {
    ineq: Vec<(Vec<f64>, f64)>,
    eq: Vec<(Vec<f64>, f64)>,
}

/// Affine constraints of a view as `a . y <= b` and `a . y = b`.
fn linearize(view: &NlpView, z: &[f64]) -> Result<Linearized, DomainError> {
    let row = |f: &SmoothFunction| -> Result<(Vec<f64>, f64), DomainError> {
        let a = f.gradient(z)?;
        let b = dot(&a, z) - f.value(z)?;
        Ok((a, b))
    };
    Ok(Linearized {
        ineq: view.ineq.iter().map(|c| row(&c.function)).collect::<Result<_, _>>()?,
        eq: view.eq.iter().map(|c| row(&c.function)).collect::<Result<_, _>>()?,
    })
}

/// Projection onto an affine set by enumerating which inequalities are tight.
fn project_affine(lin: &Linearized, z: &[f64], opts: &DistanceOptions) -> Option<Vec<f64>> {
    let n = z.len();
    let p = lin.ineq.len();
    let feasible = |y: &[f64]| {
        let scale = 1.0 + norm_inf(y);
        lin.ineq.iter().all(|(a, b)| dot(a, y) - b <= opts.tol_feas * scale * (1.0 + norm_inf(a)))
            && lin.eq.iter().all(|(a, b)| abs(dot(a, y) - b) <= opts.tol_feas * scale * (1.0 + norm_inf(a)))
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0..1u64 << p {
        let rows: Vec<&(Vec<f64>, f64)> =
            lin.eq.iter().chain((0..p).filter(|i| (mask >> i) & 1 == 1).map(|i| &lin.ineq[i])).collect();
        let y = if rows.is_empty() {
            z.to_vec()
        } else {
            let m = Matrix::from_rows(&rows.iter().map(|(a, _)| a.clone()).collect::<Vec<_>>(), n);
            let r: Vec<f64> = rows.iter().map(|(a, b)| dot(a, z) - b).collect();
            let w = lstsq(&m, &r, opts.tol_rank);
            z.iter().zip(&w).map(|(z, w)| z - w).collect()
        };
        if feasible(&y) {
            let d = dist2(&y, z);
            if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                best = Some((d, y));
            }
        }
    }
    best.map(|(_, y)| y)
}

/// Penalized residual vector `[y - z; sqrt(mu) c+(y)]` and its Jacobian rows.
fn penalty_system(view: &NlpView, z: &[f64], y: &[f64], mu: f64) -> Result<(Vec<f64>, Vec<Vec<f64>>), DomainError> {
    let n = z.len();
    let s = sqrt(mu);
    let mut r: Vec<f64> = y.iter().zip(z).map(|(y, z)| y - z).collect();
    let mut jac: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            e
        })
        .collect();
    for c in &view.ineq {
        let v = c.function.value(y)?;
        if v > 0.0 {
            r.push(s * v);
            jac.push(c.function.gradient(y)?.into_iter().map(|g| s * g).collect());
        }
    }
    for c in &view.eq {
        r.push(s * c.function.value(y)?);
        jac.push(c.function.gradient(y)?.into_iter().map(|g| s * g).collect());
    }
    Ok((r, jac))
}

fn half_norm_sq(r: &[f64]) -> f64 {
    0.5 * dot(r, r)
}

/// Levenberg-Marquardt on the penalized projection objective.
fn penalty_descent(view: &NlpView, z: &[f64], start: &[f64], mu: f64, tol_rank: f64) -> Result<Vec<f64>, DomainError> {
    let n = z.len();
    let mut y = start.to_vec();
    let mut nu = 1e-3;
    let (mut r, mut jac) = penalty_system(view, z, &y, mu)?;
    for _ in 0..100 {
        let cost = half_norm_sq(&r);
        let mut rows = jac.clone();
        let mut rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        for i in 0..n {
            let mut e = vec![0.0; n];
            e[i] = sqrt(nu);
            rows.push(e);
            rhs.push(0.0);
        }
        let step = lstsq(&Matrix::from_rows(&rows, n), &rhs, tol_rank);
        if norm_inf(&step) <= 1e-15 * (1.0 + norm_inf(&y)) {
            break;
        }
        let trial: Vec<f64> = y.iter().zip(&step).map(|(a, b)| a + b).collect();
        let (tr, tj) = match penalty_system(view, z, &trial, mu) {
            Ok(v) => v,
            Err(_) => {
                nu *= 10.0;
                continue;
            }
        };
        if half_norm_sq(&tr) < cost {
            y = trial;
            r = tr;
            jac = tj;
            nu = (nu / 3.0).max(1e-12);
        } else {
            nu *= 10.0;
            if nu > 1e12 {
                break;
            }
        }
    }
    Ok(y)
}

/// Gauss-Newton steps on the violated constraints only (minimum-norm corrections).
fn polish(view: &NlpView, y: &mut [f64], tol_rank: f64) -> Result<(), DomainError> {
    let n = y.len();
    for _ in 0..30 {
        let mut rows = Vec::new();
        let mut vals = Vec::new();
        for c in &view.ineq {
            let v = c.function.value(y)?;
            if v > 0.0 {
                rows.push(c.function.gradient(y)?);
                vals.push(v);
            }
        }
        for c in &view.eq {
            let v = c.function.value(y)?;
            if v != 0.0 {
                rows.push(c.function.gradient(y)?);
                vals.push(v);
            }
        }
        if rows.is_empty() || norm_inf(&vals) <= 1e-15 {
            return Ok(());
        }
        let step = lstsq(&Matrix::from_rows(&rows, n), &vals, tol_rank);
        for (a, b) in y.iter_mut().zip(&step) {
            *a -= b;
        }
    }
    Ok(())
}

fn project_local(view: &NlpView, z: &[f64], reference: &[f64], opts: &DistanceOptions) -> Result<Option<Vec<f64>>, DomainError> {
    let n = z.len();
    let scale = dist2(z, reference).max(1e-3);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for s in 0..opts.starts {
        let start: Vec<f64> = if s == 0 {
            z.to_vec()
        } else {
            let u = sampling::stream(opts.seed, s as u64).unit_vector(n);
            z.iter().zip(&u).map(|(z, u)| z + scale * u).collect()
        };
        let mut y = start;
        let mut mu = 1.0;
        let mut ok = true;
        for _ in 0..opts.rounds {
            match penalty_descent(view, z, &y, mu, opts.tol_rank) {
                Ok(next) => y = next,
                Err(_) => {
                    ok = false;
                    break;
                }
            }
            mu *= opts.growth;
        }
        if !ok || polish(view, &mut y, opts.tol_rank).is_err() {
            continue;
        }
        if view.violation(&y).is_ok_and(|v| v <= opts.tol_feas * (1.0 + norm_inf(&y))) {
            let d = dist2(&y, z);
            if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                best = Some((d, y));
            }
        }
    }
    Ok(best.map(|(_, y)| y))
}

/// Euclidean distance from `z` to the union of the branch feasible sets of
/// the pattern `reference`.
///
/// Affine branches are projected exactly. Other branches use a multi-start
/// penalty method, and the result is then only an upper bound.
pub fn distance_to_feasible(inst: &MpscInstance, reference: &ActivePattern, z: &[f64], opts: &DistanceOptions) -> Result<Option<Distance>, BoundsError> {
    let mut best: Option<Distance> = None;
    let mut exact = true;
    for bp in enumerate_bipartitions(reference, opts.bipartition_cap)? {
        let view = NlpView::branch(inst, reference, &bp);
        let y = if view.all_affine() && view.ineq.len() <= opts.active_set_cap {
            project_affine(&linearize(&view, z)?, z, opts)
        } else {
            exact = false;
            project_local(&view, z, &reference.point, opts)?
        };
        if let Some(y) = y {
            let value = dist2(&y, z);
            if best.as_ref().is_none_or(|b| value < b.value) {
                best = Some(Distance { value, nearest: y, branch: bp, exact: true });
            }
        }
    }
    Ok(best.map(|b| Distance { exact, ..b }))
}

/// Directional neighbourhood `z* + V(d)`: `|| |d| w - |w| d || <= delta |w| |d|`.
#[derive(Clone, Debug, PartialEq)]
pub struct DirectionalRestriction {
    pub direction: Vec<f64>,
    pub rho: f64,
    pub delta: f64,
}

impl DirectionalRestriction {
    pub fn contains(&self, w: &[f64]) -> bool {
        let (nw, nd) = (norm2(w), norm2(&self.direction));
        if nw >= self.rho {
            return false;
        }
        let diff: Vec<f64> = w.iter().zip(&self.direction).map(|(w, d)| nd * w - nw * d).collect();
        norm2(&diff) <= self.delta * nw * nd
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorBoundEstimate {
    pub center: Vec<f64>,
    pub radius: f64,
    pub samples: usize,
    pub seed: u64,
    /// Samples inside the (restricted) neighbourhood.
    pub considered: usize,
    pub infeasible: usize,
    /// `None` when fewer than [`MIN_INFEASIBLE`] infeasible samples were seen.
    pub modulus: Option<f64>,
    pub witness: Option<Vec<f64>>,
    pub witness_distance: f64,
    pub witness_residual: f64,
    /// Distances are exact projections (all branches affine).
    pub exact: bool,
    pub restriction: Option<DirectionalRestriction>,
}

pub const MIN_INFEASIBLE: usize = 10;

/// Largest `dist / residual` over the infeasible points among `points`.
pub fn modulus_over_points(inst: &MpscInstance, reference: &ActivePattern, points: &[Vec<f64>], opts: &DistanceOptions) -> Result<ErrorBoundEstimate, BoundsError> {
    let mut est = ErrorBoundEstimate {
        center: reference.point.clone(),
        radius: 0.0,
        samples: points.len(),
        seed: opts.seed,
        considered: points.len(),
        infeasible: 0,
        modulus: None,
        witness: None,
        witness_distance: 0.0,
        witness_residual: 0.0,
        exact: true,
        restriction: None,
    };
    let mut worst = f64::NEG_INFINITY;
    for z in points {
        let res = residual(inst, z)?.total;
        if res <= 0.0 {
            continue;
        }
        let Some(d) = distance_to_feasible(inst, reference, z, opts)? else {
            continue;
        };
        est.infeasible += 1;
        est.exact &= d.exact;
        let ratio = d.value / res;
        if ratio > worst {
            worst = ratio;
            est.witness = Some(z.clone());
            est.witness_distance = d.value;
            est.witness_residual = res;
        }
    }
    if est.infeasible >= MIN_INFEASIBLE {
        est.modulus = Some(worst);
    }
    Ok(est)
}

/// Samples `n` uniform points of the ball around `center` and estimates the
/// error-bound modulus; with a restriction, only the draws inside the
/// directional neighbourhood are kept.
pub fn estimate_error_bound_modulus(
    inst: &MpscInstance,
    center: &[f64],
    radius: f64,
    n: usize,
    restriction: Option<DirectionalRestriction>,
    opts: &DistanceOptions,
) -> Result<ErrorBoundEstimate, BoundsError> {
    let reference = ActivePattern::compute(inst, center, opts.tol_act)?;
    let mut points = Vec::with_capacity(n);
    for k in 0..n as u64 {
        let z = sampling::ball_point(opts.seed, k, center, radius);
        let w: Vec<f64> = z.iter().zip(center).map(|(a, b)| a - b).collect();
        if restriction.as_ref().is_none_or(|r| r.contains(&w)) {
            points.push(z);
        }
    }
    let mut est = modulus_over_points(inst, &reference, &points, opts)?;
    est.radius = radius;
    est.samples = n;
    est.restriction = restriction;
    Ok(est)
}

/// Exact-penalty objective `f + weight * residual`; evaluation only.
#[derive(Clone, Debug)]
pub struct PenalizedObjective {
    inst: MpscInstance,
    pub lipschitz: f64,
    pub alpha: f64,
    pub weight: f64,
    /// The estimated Lipschitz constant of `f` is zero.
    pub degenerate: bool,
}

impl PenalizedObjective {
    pub fn value(&self, z: &[f64]) -> Result<f64, DomainError> {
        let r = residual(&self.inst, z)?.total;
        let f = self.inst.objective().value(z)?;
        Ok(if self.weight == 0.0 { f } else { f + self.weight * r })
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }

    pub fn instance(&self) -> &MpscInstance {
        &self.inst
    }
}

pub const LIPSCHITZ_SAMPLES: usize = 1000;
pub const LIPSCHITZ_SAFETY: f64 = 1.1;

/// Penalty with weight `Lf * alpha`, where `Lf` is 1.1 times the largest
/// sampled gradient norm of `f` in the ball.
pub fn build_penalty(inst: &MpscInstance, center: &[f64], alpha: f64, radius: f64, seed: u64) -> Result<PenalizedObjective, DomainError> {
    let mut lf: f64 = norm2(&inst.objective().gradient(center)?);
    for k in 0..LIPSCHITZ_SAMPLES as u64 {
        let z = sampling::ball_point(seed, k, center, radius);
        lf = lf.max(norm2(&inst.objective().gradient(&z)?));
    }
    let lipschitz = LIPSCHITZ_SAFETY * lf;
    Ok(PenalizedObjective {
        inst: inst.clone(),
        lipschitz,
        alpha,
        weight: lipschitz * alpha,
        degenerate: lipschitz <= 1e-12,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PenaltyCheck {
    pub holds: bool,
    /// Largest `phi(z*) - phi(z)` seen; positive means a better point.
    pub worst_violation: f64,
    pub witness: Option<Vec<f64>>,
}

/// Samples the ball (plus points on the coordinate axes through `center`)
/// and checks that no point improves the penalized objective by more than `tol`.
pub fn verify_penalty_local_min(pen: &PenalizedObjective, center: &[f64], radius: f64, n: usize, seed: u64, tol: f64) -> Result<PenaltyCheck, DomainError> {
    let base = pen.value(center)?;
    let mut check = PenaltyCheck { holds: true, worst_violation: f64::NEG_INFINITY, witness: None };
    let mut visit = |z: Vec<f64>| -> Result<(), DomainError> {
        let gap = base - pen.value(&z)?;
        if gap > check.worst_violation {
            check.worst_violation = gap;
            if gap > tol {
                check.holds = false;
                check.witness = Some(z);
            }
        }
        Ok(())
    };
    for i in 0..center.len() {
        let mut t = radius;
        for _ in 0..=10 {
            for s in [-1.0, 1.0] {
                let mut z = center.to_vec();
                z[i] += s * t;
                visit(z)?;
            }
            t *= 0.5;
        }
    }
    for k in 0..n as u64 {
        visit(sampling::ball_point(seed, k, center, radius))?;
    }
    if check.worst_violation == f64::NEG_INFINITY {
        check.worst_violation = 0.0;
    }
    Ok(check)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{ladder_example, switching_counterexample};

    #[test]
    fn residual_examples() {
        let inst = ladder_example();
        let r = residual(&inst, &[0.3, 0.2]).unwrap();
        assert_eq!((r.g_part, r.switch_part, r.total), (0.0, 0.2, 0.2));
        assert_eq!(r.beta2, vec![0]);
        assert_eq!(residual(&inst, &[1.0, 0.0]).unwrap().total, 0.0);
        let r = residual(&inst, &[-0.2, 0.0]).unwrap();
        assert_eq!((r.g_part, r.total), (0.2, 0.2));
        assert_eq!(residual(&inst, &[0.5, -0.5]).unwrap().beta1, vec![0]);
    }

    #[test]
    fn distance_examples() {
        let inst = ladder_example();
        let reference = ActivePattern::compute(&inst, &[0.0, 0.0], 1e-8).unwrap();
        let opts = DistanceOptions::default();
        let d = distance_to_feasible(&inst, &reference, &[0.3, 0.2], &opts).unwrap().unwrap();
        assert!((d.value - 0.2).abs() < 1e-12 && d.exact);
        assert!(dist2(&d.nearest, &[0.3, 0.0]) < 1e-12);
        assert_eq!(d.branch.beta2, vec![0]);
        let d = distance_to_feasible(&inst, &reference, &[-0.2, -0.3], &opts).unwrap().unwrap();
        assert!((d.value - 0.2).abs() < 1e-12);
        assert!(dist2(&d.nearest, &[0.0, -0.3]) < 1e-12);
        let d = distance_to_feasible(&inst, &reference, &[0.7, 0.0], &opts).unwrap().unwrap();
        assert_eq!(d.value, 0.0);
    }

    #[test]
    fn local_projection_on_curved_branch() {
        let cx = switching_counterexample();
        let reference = ActivePattern::compute(&cx, &[0.0, 0.0], 1e-8).unwrap();
        let d = distance_to_feasible(&cx, &reference, &[0.1, 0.3], &DistanceOptions::default()).unwrap().unwrap();
        assert!(!d.exact);
        assert!((d.value - 0.1).abs() < 1e-8, "{d:?}");
    }

    #[test]
    fn modulus_and_penalty() {
        let inst = ladder_example();
        let est = estimate_error_bound_modulus(&inst, &[0.0, 0.0], 0.5, 2000, None, &DistanceOptions::default()).unwrap();
        let a = est.modulus.unwrap();
        assert!((0.95..=1.05).contains(&a), "{a}");
        let pen = build_penalty(&inst, &[0.0, 0.0], a, 0.5, 0).unwrap();
        assert!((pen.lipschitz - 1.1 * 2f64.sqrt()).abs() < 0.01);
        assert!(verify_penalty_local_min(&pen, &[0.0, 0.0], 0.5, 2000, 1, 1e-9).unwrap().holds);
        let weak = pen.with_weight(0.5);
        let c = verify_penalty_local_min(&weak, &[0.0, 0.0], 0.5, 2000, 1, 1e-9).unwrap();
        assert!(!c.holds);
        let w = c.witness.unwrap();
        assert!(w[0] < 0.0 && w[1] == 0.0);
    }

    #[test]
    fn unconstrained_is_inconclusive() {
        let inst = MpscInstance::new(2, crate::expr::Expr::var(0), vec![], vec![], vec![]).unwrap();
        let est = estimate_error_bound_modulus(&inst, &[0.0, 0.0], 0.5, 100, None, &DistanceOptions::default()).unwrap();
        assert_eq!((est.infeasible, est.modulus), (0, None));
    }
}
