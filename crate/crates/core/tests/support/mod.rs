//! Shared oracles and generators for the integration tests.
#![allow(dead_code)]

use mpsc_core::expr::Expr;
use mpsc_core::kernel::Sign;
use mpsc_core::model::MpscInstance;
use mpsc_core::sampling::{stream, Stream};
use nalgebra::{DMatrix, DVector};

pub const ORACLE_STEPS: [f64; 5] = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6];
pub const ORACLE_EPS: f64 = 1e-3;

/// `zeta` lies in the directional limiting normal cone of the switching set
/// at `a` in direction `d`, by a discretized version of the definition: for
/// some step `t`, some `d'` within `eps` of `d` puts `a + t d'` in the set, and
/// `zeta` is within `eps` of the regular normal cone there.
pub fn directional_normal_oracle(a: [f64; 2], d: [f64; 2], zeta: [f64; 2]) -> bool {
    let eps = ORACLE_EPS;
    ORACLE_STEPS.iter().any(|&t| {
        // b = a + t d' at the origin
        let to_origin = ((-a[0] / t - d[0]).powi(2) + (-a[1] / t - d[1]).powi(2)).sqrt();
        if to_origin <= eps && zeta[0].hypot(zeta[1]) <= eps {
            return true;
        }
        // b on an axis but off the origin: axis k holds b_k = 0
        (0..2).any(|k| {
            let o = 1 - k;
            let shift = (-a[k] / t - d[k]).abs();
            if shift > eps {
                return false;
            }
            let pinned = shift == eps && a[o] + t * d[o] == 0.0;
            // regular normal at b is the line through e_k
            !pinned && zeta[o].abs() <= eps
        })
    })
}

/// `zeta` is in the regular normal cone of the switching set at `b`.
pub fn regular_normal_oracle(b: [f64; 2], zeta: [f64; 2]) -> bool {
    match (b[0] == 0.0, b[1] == 0.0) {
        (true, true) => zeta == [0.0, 0.0],
        (false, true) => zeta[0] == 0.0,
        (true, false) => zeta[1] == 0.0,
        (false, false) => panic!("not in the switching set"),
    }
}

/// Probe vectors: on either axis, at the origin, or bounded away from both axes.
pub fn probe(s: &mut Stream) -> [f64; 2] {
    fn away(s: &mut Stream) -> f64 {
        let v = s.uniform_in(0.01, 2.0);
        if s.below(2) == 0 {
            v
        } else {
            -v
        }
    }
    match s.below(7) {
        0 => [0.0, 0.0],
        1 | 2 => [away(s), 0.0],
        3 | 4 => [0.0, away(s)],
        _ => [away(s), away(s)],
    }
}

fn rank(m: &DMatrix<f64>) -> usize {
    if m.ncols() == 0 || m.nrows() == 0 {
        return 0;
    }
    let s = m.clone().svd(false, false).singular_values;
    let top = s.iter().cloned().fold(0.0, f64::max);
    s.iter().filter(|&&v| v > 1e-10 * top.max(1.0)).count()
}

fn columns(a: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), idx.len(), |i, j| a[(i, idx[j])])
}

/// `A x = b` with `x_free` unrestricted and `x_nonneg >= 0`, by enumerating
/// basic solutions on a maximal independent set of free columns.
fn basic_feasible(a: &DMatrix<f64>, b: &DVector<f64>, free: &[usize], nonneg: &[usize]) -> bool {
    let mut base: Vec<usize> = Vec::new();
    for &j in free {
        let mut t = base.clone();
        t.push(j);
        if rank(&columns(a, &t)) == t.len() {
            base = t;
        }
    }
    let r = rank(a);
    let scale = 1.0 + b.amax() + a.amax();
    for mask in 0u32..1 << nonneg.len() {
        let support: Vec<usize> = (0..nonneg.len()).filter(|j| mask >> j & 1 == 1).map(|j| nonneg[j]).collect();
        if base.len() + support.len() > r {
            continue;
        }
        let mut cols = base.clone();
        cols.extend(&support);
        let m = columns(a, &cols);
        if rank(&m) != cols.len() {
            continue;
        }
        let x = if cols.is_empty() {
            DVector::zeros(0)
        } else {
            m.clone().svd(true, true).solve(b, 1e-14).expect("svd solve")
        };
        let res = if cols.is_empty() { b.amax() } else { (&m * &x - b).amax() };
        if res <= 1e-8 * scale && x.iter().skip(base.len()).all(|&v| v >= -1e-10) {
            return true;
        }
    }
    false
}

fn cases(signs: &[Sign], pairs: &[(usize, usize)]) -> Vec<Vec<Sign>> {
    (0..1u32 << pairs.len())
        .map(|k| {
            let mut s = signs.to_vec();
            for (j, &(x, y)) in pairs.iter().enumerate() {
                s[if k >> j & 1 == 1 { x } else { y }] = Sign::Zero;
            }
            s
        })
        .collect()
}

fn split(s: &[Sign]) -> (Vec<usize>, Vec<usize>) {
    let free = (0..s.len()).filter(|&i| s[i] == Sign::Free).collect();
    let nonneg = (0..s.len()).filter(|&i| s[i] == Sign::NonNeg).collect();
    (free, nonneg)
}

/// Brute-force feasibility of `A x = b` under signs and complementary pairs.
pub fn oracle_feasible(a: &DMatrix<f64>, b: &DVector<f64>, signs: &[Sign], pairs: &[(usize, usize)]) -> bool {
    cases(signs, pairs).iter().any(|s| {
        let (free, nonneg) = split(s);
        basic_feasible(a, b, &free, &nonneg)
    })
}

/// Brute-force test for a nonzero `x` with `A x = 0` under signs and pairs.
pub fn oracle_nonzero_kernel(a: &DMatrix<f64>, signs: &[Sign], pairs: &[(usize, usize)]) -> bool {
    cases(signs, pairs).iter().any(|s| {
        let (free, nonneg) = split(s);
        if rank(&columns(a, &free)) < free.len() {
            return true;
        }
        if nonneg.is_empty() {
            return false;
        }
        let mut aug = a.clone().insert_row(a.nrows(), 0.0);
        for &j in &nonneg {
            aug[(a.nrows(), j)] = 1.0;
        }
        let mut rhs = DVector::zeros(a.nrows() + 1);
        rhs[a.nrows()] = 1.0;
        basic_feasible(&aug, &rhs, &free, &nonneg)
    })
}

pub fn to_dmatrix(a: &mpsc_core::linalg::Matrix) -> DMatrix<f64> {
    DMatrix::from_fn(a.rows(), a.cols(), |i, j| a[(i, j)])
}

/// A small random instance feasible at the origin, with candidate directions.
pub struct RandomCase {
    pub inst: MpscInstance,
    pub point: Vec<f64>,
    pub directions: Vec<Vec<f64>>,
}

fn small_int(s: &mut Stream) -> f64 {
    s.below(5) as f64 - 2.0
}

fn random_poly(s: &mut Stream, n: usize, c0: f64, quadratic: bool) -> Expr {
    let mut e = Expr::constant(c0);
    for i in 0..n {
        let a = small_int(s);
        if a != 0.0 {
            e = e + Expr::constant(a) * Expr::var(i);
        }
    }
    if quadratic {
        for i in 0..n {
            for j in i..n {
                if s.below(3) == 0 {
                    let b = small_int(s);
                    e = e + Expr::constant(b) * Expr::var(i) * Expr::var(j);
                }
            }
        }
    }
    e
}

pub fn random_case(seed: u64) -> RandomCase {
    let mut s = stream(seed, 0);
    let n = 1 + s.below(4) as usize;
    let (p, q, m) = (s.below(3) as usize, s.below(3) as usize, s.below(3) as usize);
    let quadratic = s.below(2) == 0;
    let mut ineq = Vec::new();
    for _ in 0..p {
        let c0 = if s.below(3) == 0 { -1.0 } else { 0.0 };
        ineq.push(random_poly(&mut s, n, c0, quadratic));
    }
    let eq: Vec<Expr> = (0..q).map(|_| random_poly(&mut s, n, 0.0, quadratic)).collect();
    let mut switch = Vec::new();
    for _ in 0..m {
        let off = if s.below(2) == 0 { 1.0 } else { -1.0 };
        let (cg, ch) = match s.below(3) {
            0 => (0.0, 0.0),
            1 => (0.0, off),
            _ => (off, 0.0),
        };
        switch.push((random_poly(&mut s, n, cg, quadratic), random_poly(&mut s, n, ch, quadratic)));
    }
    let placeholder = MpscInstance::new(n, Expr::constant(0.0), ineq.clone(), eq.clone(), switch.clone()).expect("valid");
    let point = vec![0.0; n];
    let jac = placeholder.constraint_jacobian_columns(&point).expect("polynomial");
    // objective gradient -A lambda for a random lambda, sometimes perturbed
    let mut grad = vec![0.0; n];
    for k in 0..jac.cols() {
        let l = small_int(&mut s);
        for i in 0..n {
            grad[i] -= l * jac[(i, k)];
        }
    }
    if s.below(3) == 0 {
        let i = s.below(n as u64) as usize;
        grad[i] += small_int(&mut s);
    }
    let mut f = random_poly(&mut s, n, 0.0, true);
    let base = MpscInstance::new(n, f.clone(), ineq.clone(), eq.clone(), switch.clone()).expect("valid");
    // shift the linear part so that grad f(0) = grad
    let g0 = base.objective().gradient(&point).expect("polynomial");
    for i in 0..n {
        f = f + Expr::constant(grad[i] - g0[i]) * Expr::var(i);
    }
    let inst = MpscInstance::new(n, f, ineq, eq, switch).expect("valid");
    let mut directions = Vec::new();
    for _ in 0..3 {
        directions.push((0..n).map(|_| s.below(3) as f64 - 1.0).collect());
    }
    RandomCase { inst, point, directions }
}

use mpsc_core::analysis::{ActivePattern, DirectionalPattern};
use mpsc_core::cq::{self, Bundle, CqOptions, NlpCq};
use mpsc_core::stationarity::{self, Ladder, StationarityOptions};

/// Every verdict the implication lattice talks about, at the origin of a random case.
pub fn lattice_bundle(case: &RandomCase, seed: u64) -> Bundle {
    let inst = &case.inst;
    let pat = ActivePattern::compute(inst, &case.point, 1e-8).expect("evaluable");
    let so = StationarityOptions { seed, ..StationarityOptions::default() };
    let co = CqOptions { sampling: mpsc_core::cq::SamplingParams { seed, ..Default::default() }, ..CqOptions::default() };
    let mut b = Bundle::default();
    for rung in [stationarity::check_w, stationarity::check_m, stationarity::check_s, stationarity::check_qm] {
        b.verdicts.push(rung(&pat, &so).expect("within caps"));
    }
    b.reports.push(cq::check_licq(&DirectionalPattern::zero(&pat), &co));
    b.reports.push(cq::check_mfcq(&pat, &co).expect("within caps"));
    b.reports.push(cq::check_tnlp(inst, &pat, NlpCq::Crcq, &co).expect("within caps"));
    b.reports.push(cq::check_tnlp(inst, &pat, NlpCq::Cpld, &co).expect("within caps"));
    b.reports.push(cq::check_piecewise(inst, &pat, NlpCq::Cpld, &co).expect("within caps"));
    let mut dirs = vec![vec![0.0; pat.dim()]];
    dirs.extend(case.directions.iter().filter(|d| pat.linearization_cone_member(d, 1e-9)).cloned());
    for d in &dirs {
        let dp = DirectionalPattern::new(&pat, d, 1e-8).expect("dimensions agree");
        let zero = d.iter().all(|v| *v == 0.0);
        if !zero {
            b.reports.push(cq::check_licq(&dp, &co));
            for rung in [Ladder::W, Ladder::M, Ladder::S] {
                b.verdicts.push(stationarity::check_directional(&dp, rung, &so).expect("within caps"));
            }
            b.verdicts.push(stationarity::check_strong_m(&dp, &so).expect("within caps"));
        }
        b.reports.push(cq::check_foscms(&dp, &co).expect("within caps"));
        b.reports.push(cq::check_soscms(inst, &dp, &co).expect("within caps"));
        b.reports.push(cq::check_pseudo_normality(inst, &dp, &co).expect("within caps"));
        b.reports.push(cq::check_quasi_normality(inst, &dp, &co).expect("within caps"));
    }
    b
}

use mpsc_core::kernel::SignPattern;
use mpsc_core::linalg::Matrix;

pub struct System {
    pub a: Matrix,
    pub b: Vec<f64>,
    pub pattern: SignPattern,
}

fn entry(s: &mut Stream, integer: bool) -> f64 {
    if integer {
        s.below(5) as f64 - 2.0
    } else {
        s.uniform_in(-1.0, 1.0)
    }
}

/// Random `rows x cols` system with a random sign pattern and at most two
/// complementary pairs.
pub fn random_system(seed: u64, rows: usize, cols: usize) -> System {
    let mut s = stream(seed, 0);
    let integer = s.below(2) == 0;
    let mut a = Matrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            a[(i, j)] = entry(&mut s, integer);
        }
    }
    let signs: Vec<Sign> = (0..cols)
        .map(|_| match s.below(5) {
            0 => Sign::Free,
            1 => Sign::Zero,
            _ => Sign::NonNeg,
        })
        .collect();
    let mut pattern = SignPattern::new(signs);
    let npairs = s.below(3) as usize;
    let mut used = Vec::new();
    while pattern.pairs().len() < npairs {
        let (x, y) = (s.below(cols as u64) as usize, s.below(cols as u64) as usize);
        if x != y && !used.contains(&x) && !used.contains(&y) {
            pattern.add_pair(x, y).unwrap();
            used.extend([x, y]);
        }
    }
    // half of the right-hand sides come from an admissible point
    let b = if s.below(2) == 0 {
        let case = pattern.case(s.below(pattern.case_count() as u64));
        let x: Vec<f64> = case
            .iter()
            .map(|sg| match sg {
                Sign::Free => entry(&mut s, integer),
                Sign::NonNeg => s.uniform_in(0.0, 1.0),
                Sign::Zero => 0.0,
            })
            .collect();
        a.mul_vec(&x)
    } else {
        (0..rows).map(|_| entry(&mut s, integer)).collect()
    };
    System { a, b, pattern }
}

/// Closed-form distance to `{(t, 0): t >= 0} ∪ {(0, t): t <= 0}`, the
/// feasible set of the first fixture.
pub fn ladder_distance(z: [f64; 2]) -> f64 {
    let on_a = (z[0].min(0.0).powi(2) + z[1].powi(2)).sqrt();
    let on_b = (z[0].powi(2) + z[1].max(0.0).powi(2)).sqrt();
    on_a.min(on_b)
}
