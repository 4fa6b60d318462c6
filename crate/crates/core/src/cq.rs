//! Constraint qualifications at a point, optionally along a direction.
//!
//! Exact conditions (LICQ, MFCQ, FOSCMS, SOSCMS) are decided by rank and
//! linear-programming computations. Conditions quantified over a
//! neighbourhood are decided exactly when every family involved is linearly
//! independent at the point or consists of affine functions; otherwise they
//! are checked on seeded samples and the verdict says so.

use crate::analysis::{enumerate_bipartitions, ActivePattern, AnalysisError, Bipartition, DirectionalPattern, NlpView, Tolerances};
use crate::cones;
use crate::expr::DomainError;
use crate::kernel::{self, CertificateStatus, KernelError, KernelOptions, Sign, SignPattern};
use crate::linalg::{nullspace_basis, rank, rank_of_family, Matrix};
use crate::lp::{LinearProgram, LpOutcome, Relation, Row, SimplexOptions, VarKind};
use crate::model::{MpscInstance, SmoothFunction};
use crate::num::{abs, dot};
use crate::prelude::*;
use crate::sampling;
use crate::stationarity::{StationarityKind, StationarityVerdict};
use core::fmt;

/// Constraint qualifications for a smooth NLP.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NlpCq {
    Licq,
    Mfcq,
    Crcq,
    Rcrcq,
    Cpld,
    Rcpld,
    Crsc,
}

impl NlpCq {
    pub fn label(self) -> &'static str {
        match self {
            NlpCq::Licq => "LICQ",
            NlpCq::Mfcq => "MFCQ",
            NlpCq::Crcq => "CRCQ",
            NlpCq::Rcrcq => "RCRCQ",
            NlpCq::Cpld => "CPLD",
            NlpCq::Rcpld => "RCPLD",
            NlpCq::Crsc => "CRSC",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        Some(match s.to_ascii_lowercase().as_str() {
            "licq" => NlpCq::Licq,
            "mfcq" => NlpCq::Mfcq,
            "crcq" => NlpCq::Crcq,
            "rcrcq" => NlpCq::Rcrcq,
            "cpld" => NlpCq::Cpld,
            "rcpld" => NlpCq::Rcpld,
            "crsc" => NlpCq::Crsc,
            _ => return None,
        })
    }

    pub const ALL: [NlpCq; 7] = [NlpCq::Licq, NlpCq::Mfcq, NlpCq::Crcq, NlpCq::Rcrcq, NlpCq::Cpld, NlpCq::Rcpld, NlpCq::Crsc];
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum CqName {
    /// NLP condition applied to the tightened problem.
    Tnlp(NlpCq),
    Foscms,
    Soscms,
    QuasiNormal,
    PseudoNormal,
    MpscRcpld,
    /// NLP condition on every branch problem.
    Piecewise(NlpCq),
    /// NLP condition on one branch problem.
    Branch(NlpCq, Bipartition),
}

#[derive(Clone, Debug, PartialEq)]
pub enum CqWitness {
    /// Nonzero multipliers in the `(g, h, G, H)` layout (or in the view's
    /// member order for branch problems).
    Multipliers(Vec<f64>),
    Rank { rank: usize, size: usize },
    Sample { point: Vec<f64>, family: Vec<String>, rank_at_point: usize, rank_at_sample: usize },
    Sequence { multipliers: Vec<f64>, t: f64, point: Vec<f64> },
    Branch { bipartition: Bipartition, verdict: Box<CqVerdict> },
}

#[derive(Clone, Debug, PartialEq)]
pub enum CqVerdict {
    Holds,
    Violated(CqWitness),
    HoldsOnSamples,
    ViolatedOnSamples(CqWitness),
    Inconclusive(String),
}

impl CqVerdict {
    pub fn tag(&self) -> &'static str {
        match self {
            CqVerdict::Holds => "HOLDS",
            CqVerdict::Violated(_) => "VIOLATED",
            CqVerdict::HoldsOnSamples => "HOLDS-ON-SAMPLES",
            CqVerdict::ViolatedOnSamples(_) => "VIOLATED-ON-SAMPLES",
            CqVerdict::Inconclusive(_) => "INCONCLUSIVE",
        }
    }

    /// `Some(true)` for either "holds" verdict, `Some(false)` for either
    /// violation, `None` when inconclusive.
    pub fn holds(&self) -> Option<bool> {
        match self {
            CqVerdict::Holds | CqVerdict::HoldsOnSamples => Some(true),
            CqVerdict::Violated(_) | CqVerdict::ViolatedOnSamples(_) => Some(false),
            CqVerdict::Inconclusive(_) => None,
        }
    }

    pub fn witness(&self) -> Option<&CqWitness> {
        match self {
            CqVerdict::Violated(w) | CqVerdict::ViolatedOnSamples(w) => Some(w),
            _ => None,
        }
    }
}

impl fmt::Display for CqVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SamplingParams {
    pub radius: f64,
    pub samples: usize,
    pub seed: u64,
}

impl Default for SamplingParams {
    fn default() -> Self {
        Self { radius: 1e-3, samples: 200, seed: 0 }
    }
}

/// Search parameters for the sequence condition of quasi/pseudo-normality.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SequenceParams {
    pub t0: f64,
    pub gamma: f64,
    pub steps: usize,
    pub delta: f64,
    pub perturbations: usize,
    pub max_rays: usize,
    pub seed: u64,
}

impl Default for SequenceParams {
    fn default() -> Self {
        Self { t0: 1e-1, gamma: 0.5, steps: 30, delta: 1e-3, perturbations: 32, max_rays: 64, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CqReport {
    pub name: CqName,
    pub verdict: CqVerdict,
    pub direction: Option<Vec<f64>>,
    pub sampling: Option<SamplingParams>,
    pub sequence: Option<SequenceParams>,
    pub note: Option<String>,
}

impl CqReport {
    fn new(name: CqName, verdict: CqVerdict) -> Self {
        Self { name, verdict, direction: None, sampling: None, sequence: None, note: None }
    }

    fn directional(&self) -> bool {
        self.direction.as_ref().is_some_and(|d| d.iter().any(|x| *x != 0.0))
    }

    /// Human-readable name, e.g. `MPSC-LICQ(d)`, `TNLP-CPLD`, `piecewise CPLD`.
    pub fn label(&self) -> String {
        let dir = if self.directional() { "(d)" } else { "" };
        match &self.name {
            CqName::Tnlp(c @ (NlpCq::Licq | NlpCq::Mfcq)) => format!("MPSC-{}{dir}", c.label()),
            CqName::Tnlp(c) => format!("TNLP-{}", c.label()),
            CqName::Foscms => format!("MPSC-FOSCMS{dir}"),
            CqName::Soscms => format!("MPSC-SOSCMS{dir}"),
            CqName::QuasiNormal => format!("MPSC-quasi-normality{dir}"),
            CqName::PseudoNormal => format!("MPSC-pseudo-normality{dir}"),
            CqName::MpscRcpld => "MPSC-RCPLD".to_string(),
            CqName::Piecewise(c) => format!("piecewise {}", c.label()),
            CqName::Branch(c, bp) => format!("NLP{bp} {}", c.label()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum CqError {
    Kernel(KernelError),
    Analysis(AnalysisError),
    Domain(DomainError),
    Cone(cones::ConeError),
}

impl fmt::Display for CqError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CqError::Kernel(e) => e.fmt(f),
            CqError::Analysis(e) => e.fmt(f),
            CqError::Domain(e) => e.fmt(f),
            CqError::Cone(e) => e.fmt(f),
        }
    }
}

impl core::error::Error for CqError {}

impl From<KernelError> for CqError {
    fn from(e: KernelError) -> Self {
        CqError::Kernel(e)
    }
}
impl From<AnalysisError> for CqError {
    fn from(e: AnalysisError) -> Self {
        CqError::Analysis(e)
    }
}
impl From<DomainError> for CqError {
    fn from(e: DomainError) -> Self {
        CqError::Domain(e)
    }
}
impl From<cones::ConeError> for CqError {
    fn from(e: cones::ConeError) -> Self {
        CqError::Cone(e)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CqOptions {
    pub tol: Tolerances,
    pub sampling: SamplingParams,
    pub sequence: SequenceParams,
    pub case_cap: u64,
    pub subset_cap: u64,
    pub bipartition_cap: usize,
    /// Sample even the families that can be decided exactly.
    pub force_sampling: bool,
}

impl Default for CqOptions {
    fn default() -> Self {
        Self {
            tol: Tolerances::default(),
            sampling: SamplingParams::default(),
            sequence: SequenceParams::default(),
            case_cap: 1 << 20,
            subset_cap: 1 << 12,
            bipartition_cap: crate::analysis::DEFAULT_BIPARTITION_CAP,
            force_sampling: false,
        }
    }
}

impl CqOptions {
    fn kernel(&self) -> KernelOptions {
        KernelOptions { tol_lin: self.tol.lin, tol_rank: self.tol.rank, case_cap: self.case_cap }
    }
}

fn columns(pat: &ActivePattern, coords: &[usize]) -> Matrix {
    pat.gradients.select_columns(coords)
}

/// MPSC-LICQ along `dp` (plain MPSC-LICQ for `d = 0`).
pub fn check_licq(dp: &DirectionalPattern, opts: &CqOptions) -> CqReport {
    let pat = &dp.base;
    let coords = crate::stationarity::directional_family(dp);
    let r = rank(&columns(pat, &coords), opts.tol.rank);
    let verdict = if r == coords.len() {
        CqVerdict::Holds
    } else {
        let kernel = nullspace_basis(&columns(pat, &coords), opts.tol.rank);
        let mut w = vec![0.0; pat.num_multipliers()];
        if let Some(v) = kernel.first() {
            for (j, &k) in coords.iter().enumerate() {
                w[k] = v[j];
            }
        }
        let _ = w;
        CqVerdict::Violated(CqWitness::Rank { rank: r, size: coords.len() })
    };
    let mut rep = CqReport::new(CqName::Tnlp(NlpCq::Licq), verdict);
    rep.direction = Some(dp.direction.clone());
    rep
}

/// MPSC-MFCQ: positive-linear independence of the tightened problem's
/// active gradients.
pub fn check_mfcq(pat: &ActivePattern, opts: &CqOptions) -> Result<CqReport, CqError> {
    let mut signs = vec![Sign::Zero; pat.num_multipliers()];
    for &i in &pat.active_ineq {
        signs[pat.g_coord(i)] = Sign::NonNeg;
    }
    for j in 0..pat.q {
        signs[pat.h_coord(j)] = Sign::Free;
    }
    for &i in pat.only_g.iter().chain(&pat.biactive) {
        signs[pat.big_g_coord(i)] = Sign::Free;
    }
    for &i in pat.only_h.iter().chain(&pat.biactive) {
        signs[pat.big_h_coord(i)] = Sign::Free;
    }
    let cert = kernel::nonzero_cone_kernel_intersection(&pat.gradients, &SignPattern::new(signs), &opts.kernel())?;
    let verdict = match cert.status {
        CertificateStatus::NonzeroFound(w) => CqVerdict::Violated(CqWitness::Multipliers(w)),
        _ => CqVerdict::Holds,
    };
    Ok(CqReport::new(CqName::Tnlp(NlpCq::Mfcq), verdict))
}

/// Pattern of conditions (i)-(ii): directional M-type signs without the objective.
fn abnormal_pattern(dp: &DirectionalPattern) -> Result<Option<SignPattern>, CqError> {
    Ok(cones::product_directional_normal(dp)?.sign_pattern())
}

/// MPSC-FOSCMS in direction `d` (MPSC-NNAMCQ for `d = 0`).
pub fn check_foscms(dp: &DirectionalPattern, opts: &CqOptions) -> Result<CqReport, CqError> {
    let mut rep = match abnormal_pattern(dp)? {
        None => CqReport::new(CqName::Foscms, CqVerdict::Inconclusive("direction is not in the linearization cone".into())),
        Some(sp) => {
            let cert = kernel::nonzero_cone_kernel_intersection(&dp.base.gradients, &sp, &opts.kernel())?;
            let verdict = match cert.status {
                CertificateStatus::NonzeroFound(w) => CqVerdict::Violated(CqWitness::Multipliers(w)),
                _ => CqVerdict::Holds,
            };
            CqReport::new(CqName::Foscms, verdict)
        }
    };
    rep.direction = Some(dp.direction.clone());
    Ok(rep)
}

fn curvatures(inst: &MpscInstance, z: &[f64], d: &[f64]) -> Result<Vec<f64>, DomainError> {
    (0..inst.num_multipliers()).map(|k| inst.constraint(k).hessian_quadratic_form(z, d)).collect()
}

/// MPSC-SOSCMS in direction `d`: no nonzero abnormal multiplier with
/// nonnegative constraint curvature along `d`.
pub fn check_soscms(inst: &MpscInstance, dp: &DirectionalPattern, opts: &CqOptions) -> Result<CqReport, CqError> {
    let pat = &dp.base;
    let mut rep = CqReport::new(CqName::Soscms, CqVerdict::Holds);
    rep.direction = Some(dp.direction.clone());
    let Some(sp) = abnormal_pattern(dp)? else {
        rep.verdict = CqVerdict::Inconclusive("direction is not in the linearization cone".into());
        return Ok(rep);
    };
    let c = curvatures(inst, &pat.point, &dp.direction)?;
    let a = &pat.gradients;
    let count = sp.case_count();
    if count > opts.case_cap as u128 {
        return Err(KernelError::CapExceeded { cases: count, cap: opts.case_cap }.into());
    }
    let nm = pat.num_multipliers();
    for k in 0..count as u64 {
        let signs = sp.case(k);
        let free: Vec<usize> = (0..nm).filter(|&i| signs[i] == Sign::Free).collect();
        if let Some(v) = nullspace_basis(&a.select_columns(&free), opts.tol.rank).first() {
            // a lineality direction: one of +v, -v has nonnegative curvature
            let mut w = vec![0.0; nm];
            for (j, &i) in free.iter().enumerate() {
                w[i] = v[j];
            }
            if dot(&c, &w) < 0.0 {
                w.iter_mut().for_each(|x| *x = -*x);
            }
            rep.verdict = CqVerdict::Violated(CqWitness::Multipliers(w));
            return Ok(rep);
        }
        let case_pattern = SignPattern::new(signs.clone());
        for i in (0..nm).filter(|&i| signs[i] == Sign::NonNeg) {
            let mut fix = vec![0.0; nm];
            fix[i] = 1.0;
            let extra = [Row { coeffs: fix, relation: Relation::Eq, rhs: 1.0 }];
            match kernel::maximize_linear_with_rows(&c, a, &vec![0.0; a.rows()], &extra, &case_pattern, &opts.kernel()) {
                Ok(out) if out.value() >= -opts.tol.lin => {
                    rep.verdict = CqVerdict::Violated(CqWitness::Multipliers(out.witness().to_vec()));
                    return Ok(rep);
                }
                Ok(_) | Err(KernelError::InfeasibleProblem) => {}
                Err(e) => return Err(e.into()),
            }
        }
    }
    Ok(rep)
}

/// Candidate abnormal multipliers: lineality directions (both signs) and
/// fixed-coordinate LP witnesses, per convex case.
fn abnormal_rays(pat: &ActivePattern, sp: &SignPattern, opts: &CqOptions) -> Result<Vec<Vec<f64>>, CqError> {
    let nm = pat.num_multipliers();
    let a = &pat.gradients;
    let mut rays = Vec::new();
    let count = sp.case_count();
    if count > opts.case_cap as u128 {
        return Err(KernelError::CapExceeded { cases: count, cap: opts.case_cap }.into());
    }
    for k in 0..count as u64 {
        let signs = sp.case(k);
        let mut face = Vec::new();
        let free: Vec<usize> = (0..nm).filter(|&i| signs[i] == Sign::Free).collect();
        for v in nullspace_basis(&a.select_columns(&free), opts.tol.rank) {
            let mut w = vec![0.0; nm];
            for (j, &i) in free.iter().enumerate() {
                w[i] = v[j];
            }
            face.push(w.clone());
            face.push(w.into_iter().map(|x| -x).collect());
        }
        let case_pattern = SignPattern::new(signs.clone());
        for i in (0..nm).filter(|&i| signs[i] == Sign::NonNeg) {
            let mut fix = vec![0.0; nm];
            fix[i] = 1.0;
            let extra = [Row { coeffs: fix, relation: Relation::Eq, rhs: 1.0 }];
            let cert = kernel::feasible_with_rows(a, &vec![0.0; a.rows()], &extra, &case_pattern, &opts.kernel())?;
            if let CertificateStatus::Feasible(w) = cert.status {
                face.push(w);
            }
        }
        face.truncate(opts.sequence.max_rays);
        rays.extend(face);
    }
    Ok(rays)
}

fn constraint_values(inst: &MpscInstance, z: &[f64]) -> Result<Vec<f64>, DomainError> {
    (0..inst.num_multipliers()).map(|k| inst.constraint(k).value(z)).collect()
}

fn check_normality(inst: &MpscInstance, dp: &DirectionalPattern, pseudo: bool, opts: &CqOptions) -> Result<CqReport, CqError> {
    let name = if pseudo { CqName::PseudoNormal } else { CqName::QuasiNormal };
    let fos = check_foscms(dp, opts)?;
    let mut rep = CqReport::new(name, CqVerdict::Holds);
    rep.direction = Some(dp.direction.clone());
    rep.sequence = Some(opts.sequence);
    match fos.verdict {
        CqVerdict::Holds => {
            rep.note = Some("no nonzero abnormal multiplier".into());
            return Ok(rep);
        }
        CqVerdict::Inconclusive(r) => {
            rep.verdict = CqVerdict::Inconclusive(r);
            return Ok(rep);
        }
        _ => {}
    }
    let sp = abnormal_pattern(dp)?.expect("FOSCMS found a multiplier, so the cone is nonempty");
    let rays = abnormal_rays(&dp.base, &sp, opts)?;
    let s = &opts.sequence;
    let n = dp.base.dim();
    let mut dirs = vec![dp.direction.clone()];
    for j in 0..s.perturbations as u64 {
        let u = sampling::stream(s.seed, j).unit_vector(n);
        dirs.push(dp.direction.iter().zip(&u).map(|(d, u)| d + s.delta * u).collect());
    }
    let tol = opts.tol.lin;
    for lambda in &rays {
        let support: Vec<usize> = (0..lambda.len()).filter(|&k| abs(lambda[k]) > tol).collect();
        let mut t = s.t0;
        for _ in 0..=s.steps {
            for d in &dirs {
                let z: Vec<f64> = dp.base.point.iter().zip(d).map(|(z, d)| z + t * d).collect();
                let vals = constraint_values(inst, &z)?;
                let violated = if pseudo {
                    support.iter().map(|&k| lambda[k] * vals[k]).sum::<f64>() > 0.0
                } else {
                    support.iter().all(|&k| lambda[k] * vals[k] > 0.0)
                };
                if violated {
                    rep.verdict = CqVerdict::ViolatedOnSamples(CqWitness::Sequence { multipliers: lambda.clone(), t, point: z });
                    return Ok(rep);
                }
            }
            t *= s.gamma;
        }
    }
    rep.verdict = CqVerdict::HoldsOnSamples;
    Ok(rep)
}

/// MPSC quasi-normality in direction `d`.
pub fn check_quasi_normality(inst: &MpscInstance, dp: &DirectionalPattern, opts: &CqOptions) -> Result<CqReport, CqError> {
    check_normality(inst, dp, false, opts)
}

/// MPSC pseudo-normality in direction `d`.
pub fn check_pseudo_normality(inst: &MpscInstance, dp: &DirectionalPattern, opts: &CqOptions) -> Result<CqReport, CqError> {
    check_normality(inst, dp, true, opts)
}

/// A neighbourhood condition on one gradient family.
#[derive(Clone, Debug)]
enum Requirement {
    /// The rank stays equal to its value at the point.
    ConstantRank,
    /// The family stays linearly dependent.
    StaysDependent,
}

#[derive(Clone, Debug)]
struct FamilyCondition {
    members: Vec<usize>,
    requirement: Requirement,
    rank_at_point: usize,
    exact: bool,
}

/// Members of a neighbourhood test: functions and their labels.
struct Members<'a> {
    functions: Vec<&'a SmoothFunction>,
    labels: Vec<String>,
}

impl Members<'_> {
    fn gradients(&self, z: &[f64]) -> Result<Vec<Vec<f64>>, DomainError> {
        self.functions.iter().map(|f| f.gradient(z)).collect()
    }

    fn affine(&self, members: &[usize]) -> bool {
        members.iter().all(|&k| self.functions[k].is_affine())
    }
}

fn family_rank(grads: &[Vec<f64>], members: &[usize], tol: f64) -> usize {
    let vecs: Vec<Vec<f64>> = members.iter().map(|&k| grads[k].clone()).collect();
    rank_of_family(&vecs, tol)
}

fn condition(members: Vec<usize>, requirement: Requirement, grads: &[Vec<f64>], fns: &Members<'_>, tol: f64) -> FamilyCondition {
    let r = family_rank(grads, &members, tol);
    let exact = fns.affine(&members) || matches!(requirement, Requirement::ConstantRank if r == members.len());
    FamilyCondition { members, requirement, rank_at_point: r, exact }
}

/// Positive-linear dependence at the point; `nonneg` flags members whose
/// coefficient must be nonnegative.
fn positively_dependent(grads: &[Vec<f64>], members: &[usize], nonneg: &[bool], opts: &CqOptions) -> Result<bool, CqError> {
    if members.is_empty() {
        return Ok(false);
    }
    let n = grads[0].len();
    let cols: Vec<Vec<f64>> = members.iter().map(|&k| grads[k].clone()).collect();
    let signs = members.iter().map(|&k| if nonneg[k] { Sign::NonNeg } else { Sign::Free }).collect();
    let cert = kernel::nonzero_cone_kernel_intersection(&Matrix::from_columns(&cols, n), &SignPattern::new(signs), &opts.kernel())?;
    Ok(cert.found_nonzero())
}

/// Evaluates the family conditions exactly where possible and on samples otherwise.
fn decide(name: CqName, z: &[f64], fns: &Members<'_>, conds: &[FamilyCondition], opts: &CqOptions) -> Result<CqReport, CqError> {
    let pending: Vec<&FamilyCondition> = conds.iter().filter(|c| opts.force_sampling || !c.exact).collect();
    if pending.is_empty() {
        return Ok(CqReport::new(name, CqVerdict::Holds));
    }
    let sp = opts.sampling;
    for k in 0..sp.samples as u64 {
        let y = sampling::ball_point(sp.seed, k, z, sp.radius);
        let grads = fns.gradients(&y)?;
        for c in &pending {
            let r = family_rank(&grads, &c.members, opts.tol.rank);
            let ok = match c.requirement {
                Requirement::ConstantRank => r == c.rank_at_point,
                Requirement::StaysDependent => r < c.members.len(),
            };
            if !ok {
                let mut rep = CqReport::new(
                    name,
                    CqVerdict::ViolatedOnSamples(CqWitness::Sample {
                        point: y,
                        family: c.members.iter().map(|&m| fns.labels[m].clone()).collect(),
                        rank_at_point: c.rank_at_point,
                        rank_at_sample: r,
                    }),
                );
                rep.sampling = Some(sp);
                return Ok(rep);
            }
        }
    }
    let mut rep = CqReport::new(name, CqVerdict::HoldsOnSamples);
    rep.sampling = Some(sp);
    Ok(rep)
}

fn subsets(bits: usize, cap: u64) -> Option<impl Iterator<Item = u64>> {
    (bits < 63 && (1u64 << bits) <= cap).then(|| 0..1u64 << bits)
}

fn pick(items: &[usize], mask: u64) -> Vec<usize> {
    items.iter().enumerate().filter(|(j, _)| (mask >> j) & 1 == 1).map(|(_, &k)| k).collect()
}

/// Indices of a maximal linearly independent prefix-greedy subfamily.
fn greedy_basis(grads: &[Vec<f64>], members: &[usize], tol: f64) -> Vec<usize> {
    let mut basis: Vec<usize> = Vec::new();
    for &k in members {
        let mut trial = basis.clone();
        trial.push(k);
        if family_rank(grads, &trial, tol) == trial.len() {
            basis = trial;
        }
    }
    basis
}

/// Active inequalities of a view that the linearization cone keeps at zero.
fn crsc_indices(grads: &[Vec<f64>], active: &[usize], eqs: &[usize], opts: &CqOptions) -> Result<Vec<usize>, CqError> {
    let n = grads.first().map_or(0, |g| g.len());
    let mut out = Vec::new();
    for &i in active {
        let mut lp = LinearProgram::new(vec![VarKind::Free; n]);
        for &j in active {
            lp.add_row(grads[j].clone(), Relation::Le, 0.0);
        }
        for &j in eqs {
            lp.add_row(grads[j].clone(), Relation::Eq, 0.0);
        }
        for k in 0..n {
            let mut e = vec![0.0; n];
            e[k] = 1.0;
            lp.add_row(e.clone(), Relation::Le, 1.0);
            lp.add_row(e, Relation::Ge, -1.0);
        }
        // min of grad g_i . d over the box-truncated cone; it is 0 iff i in I^-
        let obj: Vec<f64> = grads[i].iter().map(|x| -x).collect();
        let simplex = SimplexOptions { feas_tol: opts.tol.lin, ..SimplexOptions::default() };
        if let LpOutcome::Optimal { value, .. } = lp.solve(Some(&obj), &simplex).map_err(|_| KernelError::PivotLimit)? {
            if value <= opts.tol.lin {
                out.push(i);
            }
        }
    }
    Ok(out)
}

/// Exact LICQ for an NLP view at `z`.
pub fn check_nlp_licq(view: &NlpView, z: &[f64], opts: &CqOptions) -> Result<CqVerdict, CqError> {
    let active = view.active_ineq(z, opts.tol.act)?;
    let mut vecs: Vec<Vec<f64>> = Vec::new();
    for &i in &active {
        vecs.push(view.ineq[i].function.gradient(z)?);
    }
    for c in &view.eq {
        vecs.push(c.function.gradient(z)?);
    }
    let r = rank_of_family(&vecs, opts.tol.rank);
    Ok(if r == vecs.len() { CqVerdict::Holds } else { CqVerdict::Violated(CqWitness::Rank { rank: r, size: vecs.len() }) })
}

/// Exact MFCQ for an NLP view at `z`; the witness lists active inequality
/// multipliers first, then equality multipliers.
pub fn check_nlp_mfcq(view: &NlpView, z: &[f64], opts: &CqOptions) -> Result<CqVerdict, CqError> {
    let active = view.active_ineq(z, opts.tol.act)?;
    let mut cols: Vec<Vec<f64>> = Vec::new();
    let mut signs = Vec::new();
    for &i in &active {
        cols.push(view.ineq[i].function.gradient(z)?);
        signs.push(Sign::NonNeg);
    }
    for c in &view.eq {
        cols.push(c.function.gradient(z)?);
        signs.push(Sign::Free);
    }
    if cols.is_empty() {
        return Ok(CqVerdict::Holds);
    }
    let cert = kernel::nonzero_cone_kernel_intersection(&Matrix::from_columns(&cols, view.n), &SignPattern::new(signs), &opts.kernel())?;
    Ok(match cert.status {
        CertificateStatus::NonzeroFound(w) => CqVerdict::Violated(CqWitness::Multipliers(w)),
        _ => CqVerdict::Holds,
    })
}

/// Any of the seven NLP conditions on a view, with the neighbourhood
/// conditions decided exactly where possible and sampled otherwise.
pub fn check_nlp_cq(view: &NlpView, z: &[f64], which: NlpCq, name: CqName, opts: &CqOptions) -> Result<CqReport, CqError> {
    match which {
        NlpCq::Licq => return Ok(CqReport::new(name, check_nlp_licq(view, z, opts)?)),
        NlpCq::Mfcq => return Ok(CqReport::new(name, check_nlp_mfcq(view, z, opts)?)),
        _ => {}
    }
    let active = view.active_ineq(z, opts.tol.act)?;
    // members: active inequalities, then equalities
    let mut fns = Members { functions: Vec::new(), labels: Vec::new() };
    for &i in &active {
        fns.functions.push(&view.ineq[i].function);
        fns.labels.push(format!("{}", view.ineq[i].origin));
    }
    for c in &view.eq {
        fns.functions.push(&c.function);
        fns.labels.push(format!("{}", c.origin));
    }
    let a = active.len();
    let ineq_members: Vec<usize> = (0..a).collect();
    let eq_members: Vec<usize> = (a..fns.functions.len()).collect();
    let nonneg: Vec<bool> = (0..fns.functions.len()).map(|k| k < a).collect();
    let grads = fns.gradients(z)?;
    let tol = opts.tol.rank;
    let too_many = || CqReport::new(name.clone(), CqVerdict::Inconclusive("subset count exceeds the enumeration cap".into()));
    let mut conds = Vec::new();
    match which {
        NlpCq::Crcq | NlpCq::Cpld => {
            let all: Vec<usize> = (0..fns.functions.len()).collect();
            let Some(masks) = subsets(all.len(), opts.subset_cap) else {
                return Ok(too_many());
            };
            for mask in masks {
                let members = pick(&all, mask);
                if which == NlpCq::Crcq {
                    conds.push(condition(members, Requirement::ConstantRank, &grads, &fns, tol));
                } else if positively_dependent(&grads, &members, &nonneg, opts)? {
                    conds.push(condition(members, Requirement::StaysDependent, &grads, &fns, tol));
                }
            }
        }
        NlpCq::Rcrcq => {
            let Some(masks) = subsets(a, opts.subset_cap) else {
                return Ok(too_many());
            };
            for mask in masks {
                let mut members = pick(&ineq_members, mask);
                members.extend(&eq_members);
                conds.push(condition(members, Requirement::ConstantRank, &grads, &fns, tol));
            }
        }
        NlpCq::Rcpld => {
            conds.push(condition(eq_members.clone(), Requirement::ConstantRank, &grads, &fns, tol));
            let basis = greedy_basis(&grads, &eq_members, tol);
            let Some(masks) = subsets(a, opts.subset_cap) else {
                return Ok(too_many());
            };
            for mask in masks {
                let mut members = pick(&ineq_members, mask);
                members.extend(&basis);
                if positively_dependent(&grads, &members, &nonneg, opts)? {
                    conds.push(condition(members, Requirement::StaysDependent, &grads, &fns, tol));
                }
            }
        }
        NlpCq::Crsc => {
            let mut members = crsc_indices(&grads, &ineq_members, &eq_members, opts)?;
            members.extend(&eq_members);
            conds.push(condition(members, Requirement::ConstantRank, &grads, &fns, tol));
        }
        NlpCq::Licq | NlpCq::Mfcq => unreachable!(),
    }
    decide(name, z, &fns, &conds, opts)
}

/// NLP condition on the tightened problem (MPSC-CRCQ/-CPLD and relatives).
pub fn check_tnlp(inst: &MpscInstance, pat: &ActivePattern, which: NlpCq, opts: &CqOptions) -> Result<CqReport, CqError> {
    let view = NlpView::tnlp(inst, pat);
    check_nlp_cq(&view, &pat.point, which, CqName::Tnlp(which), opts)
}

/// MPSC-RCPLD.
pub fn check_mpsc_rcpld(inst: &MpscInstance, pat: &ActivePattern, opts: &CqOptions) -> Result<CqReport, CqError> {
    let z = &pat.point;
    let mut fns = Members { functions: Vec::new(), labels: Vec::new() };
    let mut push = |f: &'static str, k: usize, func| {
        let _ = f;
        fns.functions.push(func);
        fns.labels.push(k.to_string());
    };
    // members: active g, h, G on I_G, H on I_H, G on I_GH, H on I_GH
    let groups: [Vec<usize>; 6] = [
        pat.active_ineq.iter().map(|&i| pat.g_coord(i)).collect(),
        (0..pat.q).map(|j| pat.h_coord(j)).collect(),
        pat.only_g.iter().map(|&i| pat.big_g_coord(i)).collect(),
        pat.only_h.iter().map(|&i| pat.big_h_coord(i)).collect(),
        pat.biactive.iter().map(|&i| pat.big_g_coord(i)).collect(),
        pat.biactive.iter().map(|&i| pat.big_h_coord(i)).collect(),
    ];
    let mut offsets = [0usize; 7];
    for (g, coords) in groups.iter().enumerate() {
        offsets[g + 1] = offsets[g] + coords.len();
        for &k in coords {
            push("", k, inst.constraint(k));
        }
    }
    let labels: Vec<String> = groups.iter().flatten().map(|&k| coord_label(pat, k)).collect();
    fns.labels = labels;
    let range = |g: usize| (offsets[g]..offsets[g + 1]).collect::<Vec<usize>>();
    let grads = fns.gradients(z)?;
    let tol = opts.tol.rank;
    let mut conds = Vec::new();
    let mut fixed = range(1);
    fixed.extend(range(2));
    fixed.extend(range(3));
    conds.push(condition(fixed.clone(), Requirement::ConstantRank, &grads, &fns, tol));
    let basis = greedy_basis(&grads, &fixed, tol);
    let (g_members, bg, bh) = (range(0), range(4), range(5));
    let bits = g_members.len() + bg.len() + bh.len();
    let Some(masks) = subsets(bits, opts.subset_cap) else {
        return Ok(CqReport::new(CqName::MpscRcpld, CqVerdict::Inconclusive("subset count exceeds the enumeration cap".into())));
    };
    let s = pat.biactive.len();
    for mask in masks {
        let i4 = pick(&g_members, mask);
        let i5 = pick(&bg, mask >> g_members.len());
        let i6 = pick(&bh, mask >> (g_members.len() + s));
        let mut members = i4.clone();
        members.extend(&basis);
        members.extend(&i5);
        members.extend(&i6);
        let cols: Vec<Vec<f64>> = members.iter().map(|&k| grads[k].clone()).collect();
        let mut signs: Vec<Sign> = members.iter().map(|k| if i4.contains(k) { Sign::NonNeg } else { Sign::Free }).collect();
        signs.truncate(members.len());
        let mut sp = SignPattern::new(signs);
        for (j5, &k5) in i5.iter().enumerate() {
            let pair = k5 - offsets[4];
            if let Some(j6) = i6.iter().position(|&k6| k6 - offsets[5] == pair) {
                sp.add_pair(i4.len() + basis.len() + j5, i4.len() + basis.len() + i5.len() + j6)?;
            }
        }
        if members.is_empty() {
            continue;
        }
        let cert = kernel::nonzero_cone_kernel_intersection(&Matrix::from_columns(&cols, pat.dim()), &sp, &opts.kernel())?;
        if cert.found_nonzero() {
            conds.push(condition(members, Requirement::StaysDependent, &grads, &fns, tol));
        }
    }
    decide(CqName::MpscRcpld, z, &fns, &conds, opts)
}

fn coord_label(pat: &ActivePattern, k: usize) -> String {
    let (p, q, m) = (pat.p, pat.q, pat.m);
    if k < p {
        format!("g{}", k + 1)
    } else if k < p + q {
        format!("h{}", k - p + 1)
    } else if k < p + q + m {
        format!("G{}", k - p - q + 1)
    } else {
        format!("H{}", k - p - q - m + 1)
    }
}

/// NLP condition on one branch problem.
pub fn check_branch(inst: &MpscInstance, pat: &ActivePattern, bp: &Bipartition, which: NlpCq, opts: &CqOptions) -> Result<CqReport, CqError> {
    let view = NlpView::branch(inst, pat, bp);
    check_nlp_cq(&view, &pat.point, which, CqName::Branch(which, bp.clone()), opts)
}

/// Piecewise condition: the NLP condition holds on every branch problem.
pub fn check_piecewise(inst: &MpscInstance, pat: &ActivePattern, which: NlpCq, opts: &CqOptions) -> Result<CqReport, CqError> {
    let mut sampled = false;
    let mut inconclusive = None;
    for bp in enumerate_bipartitions(pat, opts.bipartition_cap)? {
        let r = check_branch(inst, pat, &bp, which, opts)?;
        match r.verdict {
            CqVerdict::Holds => {}
            CqVerdict::HoldsOnSamples => sampled = true,
            CqVerdict::Inconclusive(reason) => inconclusive = inconclusive.or(Some(reason)),
            v @ (CqVerdict::Violated(_) | CqVerdict::ViolatedOnSamples(_)) => {
                let exact = matches!(v, CqVerdict::Violated(_));
                let w = CqWitness::Branch { bipartition: bp, verdict: Box::new(v) };
                let verdict = if exact { CqVerdict::Violated(w) } else { CqVerdict::ViolatedOnSamples(w) };
                let mut rep = CqReport::new(CqName::Piecewise(which), verdict);
                rep.sampling = r.sampling;
                return Ok(rep);
            }
        }
    }
    let mut rep = CqReport::new(
        CqName::Piecewise(which),
        match (inconclusive, sampled) {
            (Some(r), _) => CqVerdict::Inconclusive(r),
            (None, true) => CqVerdict::HoldsOnSamples,
            (None, false) => CqVerdict::Holds,
        },
    );
    if sampled {
        rep.sampling = Some(opts.sampling);
    }
    Ok(rep)
}

/// Reports and verdicts gathered at one point.
#[derive(Clone, Debug, Default)]
pub struct Bundle {
    pub reports: Vec<CqReport>,
    pub verdicts: Vec<StationarityVerdict>,
    /// The point is known (or assumed) to be a local minimizer.
    pub local_minimizer: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatticeViolation {
    pub premise: String,
    pub conclusion: String,
    /// A sampled verdict was read as exact for this edge.
    pub uses_samples: bool,
}

fn same_dir(a: &Option<Vec<f64>>, b: &Option<Vec<f64>>) -> bool {
    let z = |v: &Option<Vec<f64>>| v.clone().unwrap_or_default().iter().all(|x| *x == 0.0);
    match (a, b) {
        (Some(x), Some(y)) if !z(a) || !z(b) => x == y,
        _ => z(a) && z(b),
    }
}

/// Implication edges between conditions that are all stated in the theory:
/// LICQ ⇒ MFCQ ⇒ {CPLD, NNAMCQ}, CRCQ ⇒ CPLD, NNAMCQ ⇒ pseudo ⇒ quasi,
/// FOSCMS(d) ⇒ SOSCMS(d), MPSC-CPLD ⇒ piecewise CPLD, S ⇒ M ⇒ W (plain and
/// directional), QM ⇒ M, strong M(d) ⇒ M(d), and LICQ(d) ⇒ (strong M(d) ⇔
/// S(d)); at local minimizers LICQ ⇒ S and {MFCQ, CPLD, CRCQ, RCPLD, quasi,
/// pseudo} ⇒ M.
pub fn cross_check_implications(bundle: &Bundle) -> Vec<LatticeViolation> {
    let mut out = Vec::new();
    let cq = |name: &CqName, dir: &Option<Vec<f64>>| -> Option<(bool, bool)> {
        bundle
            .reports
            .iter()
            .find(|r| r.name == *name && same_dir(&r.direction, dir))
            .and_then(|r| r.verdict.holds().map(|h| (h, matches!(r.verdict, CqVerdict::HoldsOnSamples | CqVerdict::ViolatedOnSamples(_)))))
    };
    let st = |kind: StationarityKind, dir: &Option<Vec<f64>>| -> Option<bool> {
        bundle.verdicts.iter().find(|v| v.kind == kind && (v.direction.is_none() || same_dir(&v.direction, dir))).map(|v| v.holds)
    };
    let zero: Option<Vec<f64>> = None;
    let mut dirs: Vec<Option<Vec<f64>>> = vec![zero.clone()];
    for r in &bundle.reports {
        if r.directional() && !dirs.contains(&r.direction) {
            dirs.push(r.direction.clone());
        }
    }
    for v in &bundle.verdicts {
        if v.direction.as_ref().is_some_and(|d| d.iter().any(|x| *x != 0.0)) && !dirs.contains(&v.direction) {
            dirs.push(v.direction.clone());
        }
    }
    let mut equivalence = Vec::new();
    let mut edge = |premise: String, p: Option<(bool, bool)>, conclusion: String, c: Option<(bool, bool)>| {
        if let (Some((true, ps)), Some((false, cs))) = (p, c) {
            out.push(LatticeViolation { premise, conclusion, uses_samples: ps || cs });
        }
    };
    let exact = |b: Option<bool>| b.map(|x| (x, false));
    let tn = |c: NlpCq| CqName::Tnlp(c);

    edge("MPSC-LICQ".into(), cq(&tn(NlpCq::Licq), &zero), "MPSC-MFCQ".into(), cq(&tn(NlpCq::Mfcq), &zero));
    edge("MPSC-MFCQ".into(), cq(&tn(NlpCq::Mfcq), &zero), "TNLP-CPLD".into(), cq(&tn(NlpCq::Cpld), &zero));
    edge("MPSC-MFCQ".into(), cq(&tn(NlpCq::Mfcq), &zero), "MPSC-NNAMCQ".into(), cq(&CqName::Foscms, &zero));
    edge("TNLP-CRCQ".into(), cq(&tn(NlpCq::Crcq), &zero), "TNLP-CPLD".into(), cq(&tn(NlpCq::Cpld), &zero));
    edge("TNLP-CPLD".into(), cq(&tn(NlpCq::Cpld), &zero), "piecewise CPLD".into(), cq(&CqName::Piecewise(NlpCq::Cpld), &zero));
    for d in &dirs {
        let sfx = if d.is_some() { "(d)" } else { "" };
        edge(format!("MPSC-FOSCMS{sfx}"), cq(&CqName::Foscms, d), format!("MPSC-pseudo-normality{sfx}"), cq(&CqName::PseudoNormal, d));
        edge(format!("MPSC-FOSCMS{sfx}"), cq(&CqName::Foscms, d), format!("MPSC-SOSCMS{sfx}"), cq(&CqName::Soscms, d));
        edge(format!("MPSC-pseudo-normality{sfx}"), cq(&CqName::PseudoNormal, d), format!("MPSC-quasi-normality{sfx}"), cq(&CqName::QuasiNormal, d));
        edge("S(d)".into(), exact(st(StationarityKind::SDir, d)), "M(d)".into(), exact(st(StationarityKind::MDir, d)));
        edge("M(d)".into(), exact(st(StationarityKind::MDir, d)), "W(d)".into(), exact(st(StationarityKind::WDir, d)));
        edge("strongM(d)".into(), exact(st(StationarityKind::StrongM, d)), "M(d)".into(), exact(st(StationarityKind::MDir, d)));
        if cq(&tn(NlpCq::Licq), d) == Some((true, false)) {
            let (a, b) = (st(StationarityKind::StrongM, d), st(StationarityKind::SDir, d));
            if let (Some(a), Some(b)) = (a, b) {
                if a != b {
                    equivalence.push(LatticeViolation { premise: "MPSC-LICQ(d)".into(), conclusion: "strongM(d) = S(d)".into(), uses_samples: false });
                }
            }
        }
    }
    edge("S".into(), exact(st(StationarityKind::S, &zero)), "M".into(), exact(st(StationarityKind::M, &zero)));
    edge("M".into(), exact(st(StationarityKind::M, &zero)), "W".into(), exact(st(StationarityKind::W, &zero)));
    edge("QM".into(), exact(st(StationarityKind::QM, &zero)), "M".into(), exact(st(StationarityKind::M, &zero)));
    if bundle.local_minimizer {
        let m = exact(st(StationarityKind::M, &zero));
        edge("MPSC-LICQ".into(), cq(&tn(NlpCq::Licq), &zero), "S".into(), exact(st(StationarityKind::S, &zero)));
        for (label, name) in [
            ("MPSC-MFCQ", tn(NlpCq::Mfcq)),
            ("TNLP-CPLD", tn(NlpCq::Cpld)),
            ("TNLP-CRCQ", tn(NlpCq::Crcq)),
            ("MPSC-RCPLD", CqName::MpscRcpld),
            ("MPSC-quasi-normality", CqName::QuasiNormal),
            ("MPSC-pseudo-normality", CqName::PseudoNormal),
        ] {
            edge(label.into(), cq(&name, &zero), "M".into(), m);
        }
    }
    out.extend(equivalence);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{ladder_example, switching_counterexample};

    fn at_origin(inst: &MpscInstance) -> ActivePattern {
        ActivePattern::compute(inst, &[0.0, 0.0], 1e-8).unwrap()
    }

    #[test]
    fn licq_examples() {
        let inst = ladder_example();
        let pat = at_origin(&inst);
        let dp = DirectionalPattern::new(&pat, &[0.0, -1.0], 1e-8).unwrap();
        let r = check_licq(&dp, &CqOptions::default());
        assert_eq!(r.verdict, CqVerdict::Holds);
        assert_eq!(r.label(), "MPSC-LICQ(d)");
        let r0 = check_licq(&DirectionalPattern::zero(&pat), &CqOptions::default());
        assert_eq!(r0.verdict, CqVerdict::Violated(CqWitness::Rank { rank: 2, size: 3 }));
        let cx = switching_counterexample();
        let r = check_licq(&DirectionalPattern::zero(&at_origin(&cx)), &CqOptions::default());
        assert_eq!(r.verdict, CqVerdict::Violated(CqWitness::Rank { rank: 1, size: 2 }));
    }

    #[test]
    fn mfcq_examples() {
        let cx = switching_counterexample();
        let r = check_mfcq(&at_origin(&cx), &CqOptions::default()).unwrap();
        assert_eq!(r.verdict, CqVerdict::Violated(CqWitness::Multipliers(vec![1.0, 1.0])));
        let inst = ladder_example();
        let r = check_mfcq(&at_origin(&inst), &CqOptions::default()).unwrap();
        match r.verdict {
            CqVerdict::Violated(CqWitness::Multipliers(w)) => {
                assert!(w[0] > 0.0 && (w[1] - w[0]).abs() < 1e-12 && (w[2] + w[0]).abs() < 1e-12)
            }
            v => panic!("{v:?}"),
        }
    }

    #[test]
    fn foscms_examples() {
        let opts = CqOptions::default();
        let inst = ladder_example();
        let pat = at_origin(&inst);
        assert_eq!(check_foscms(&DirectionalPattern::zero(&pat), &opts).unwrap().verdict, CqVerdict::Holds);
        let cx = switching_counterexample();
        let cpat = at_origin(&cx);
        assert_eq!(check_foscms(&DirectionalPattern::zero(&cpat), &opts).unwrap().verdict, CqVerdict::Holds);
        let dp = DirectionalPattern::new(&cpat, &[0.0, 1.0], 1e-8).unwrap();
        assert_eq!(check_quasi_normality(&cx, &dp, &opts).unwrap().verdict, CqVerdict::Holds);
        assert_eq!(check_soscms(&cx, &dp, &opts).unwrap().verdict, CqVerdict::Holds);
    }

    #[test]
    fn counterexample_cpld() {
        let cx = switching_counterexample();
        let pat = at_origin(&cx);
        let opts = CqOptions::default();
        let r = check_tnlp(&cx, &pat, NlpCq::Cpld, &opts).unwrap();
        assert_eq!(r.label(), "TNLP-CPLD");
        match &r.verdict {
            CqVerdict::ViolatedOnSamples(CqWitness::Sample { point, rank_at_sample, .. }) => {
                assert_eq!(*rank_at_sample, 2);
                assert!(crate::num::dist2(point, &[0.0, 0.0]) <= 1e-3);
            }
            v => panic!("{v:?}"),
        }
        for bp in enumerate_bipartitions(&pat, 20).unwrap() {
            assert_eq!(check_branch(&cx, &pat, &bp, NlpCq::Licq, &opts).unwrap().verdict, CqVerdict::Holds);
        }
        let pw = check_piecewise(&cx, &pat, NlpCq::Cpld, &opts).unwrap();
        assert_eq!(pw.verdict, CqVerdict::Holds);
        assert_eq!(pw.label(), "piecewise CPLD");
    }

    #[test]
    fn affine_views_hold_and_sampler_agrees() {
        let inst = ladder_example();
        let pat = at_origin(&inst);
        for which in NlpCq::ALL {
            let r = check_piecewise(&inst, &pat, which, &CqOptions::default()).unwrap();
            assert_eq!(r.verdict, CqVerdict::Holds, "{which:?}");
            let forced = CqOptions { force_sampling: true, ..CqOptions::default() };
            let r = check_tnlp(&inst, &pat, which, &forced).unwrap();
            if !matches!(which, NlpCq::Licq | NlpCq::Mfcq) {
                assert_eq!(r.verdict, CqVerdict::HoldsOnSamples, "{which:?}");
            }
        }
    }

    #[test]
    fn crsc_index_set() {
        // g1 = -z1, g2 = z1: both gradients vanish along the cone d1 = 0
        use crate::expr::Expr;
        let z = Expr::var;
        let inst = MpscInstance::new(2, z(1), vec![-z(0), z(0), z(1)], vec![], vec![]).unwrap();
        let pat = at_origin(&inst);
        let view = NlpView::tnlp(&inst, &pat);
        let fns = view.ineq.iter().map(|c| c.function.gradient(&[0.0, 0.0]).unwrap()).collect::<Vec<_>>();
        assert_eq!(crsc_indices(&fns, &[0, 1, 2], &[], &CqOptions::default()).unwrap(), vec![0, 1]);
    }

    #[test]
    fn rcpld_on_examples() {
        let opts = CqOptions::default();
        let inst = ladder_example();
        assert_eq!(check_mpsc_rcpld(&inst, &at_origin(&inst), &opts).unwrap().verdict, CqVerdict::Holds);
        let cx = switching_counterexample();
        // the only dependence needs both switching multipliers nonzero
        assert_eq!(check_mpsc_rcpld(&cx, &at_origin(&cx), &opts).unwrap().verdict, CqVerdict::Holds);
    }

    #[test]
    fn lattice_checks() {
        assert!(cross_check_implications(&Bundle::default()).is_empty());
        let mut b = Bundle::default();
        b.reports.push(CqReport::new(CqName::Tnlp(NlpCq::Mfcq), CqVerdict::Holds));
        b.reports.push(CqReport::new(CqName::Tnlp(NlpCq::Cpld), CqVerdict::Violated(CqWitness::Rank { rank: 0, size: 0 })));
        let v = cross_check_implications(&b);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].conclusion, "TNLP-CPLD");
    }
}
