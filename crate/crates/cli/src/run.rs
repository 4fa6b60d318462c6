//! Command execution.

use crate::format::{key, nums, num, rmult, rset, tnum, tset, tvec, OutputMode, Report};
use crate::parser::{parse_instance, ParseError};
use mpsc_core::analysis::{enumerate_bipartitions, ActivePattern, Bipartition, DirectionalPattern, NlpView, Tolerances};
use mpsc_core::bounds::{self, DirectionalRestriction, DistanceOptions, ErrorBoundEstimate};
use mpsc_core::cones::{self, ProductCone};
use mpsc_core::cq::{self, Bundle, CqOptions, CqReport, CqWitness, NlpCq, SamplingParams};
use mpsc_core::model::MpscInstance;
use mpsc_core::stationarity::{self, Ladder, StationarityKind, StationarityOptions, StationarityVerdict};
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{source}")]
    Parse { path: PathBuf, source: ParseError },
    #[error("{0}")]
    Usage(String),
    #[error("analysis failed: {0}")]
    Analysis(String),
}

fn analysis<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Analysis(e.to_string())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StationarityChoice {
    W,
    M,
    S,
    Q,
    QM,
    StrongM,
    Am,
    Sonc,
    Sosc,
    Descent,
}

impl StationarityChoice {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s.to_ascii_lowercase().as_str() {
            "w" => Self::W,
            "m" => Self::M,
            "s" => Self::S,
            "q" => Self::Q,
            "qm" => Self::QM,
            "strongm" => Self::StrongM,
            "am" => Self::Am,
            "sonc" => Self::Sonc,
            "sosc" => Self::Sosc,
            "descent" => Self::Descent,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Command {
    Analyze,
    Stationarity(StationarityChoice),
    Cq(String),
    Branches,
    ErrorBound,
    Penalty,
    Cones,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub command: Command,
    pub instance: PathBuf,
    pub points: Vec<Vec<f64>>,
    pub directions: Vec<Vec<f64>>,
    pub tol: Tolerances,
    pub radius: Option<f64>,
    pub samples: Option<usize>,
    pub seed: u64,
    /// 0-based `(beta1, beta2)`.
    pub bipartition: Option<(Vec<usize>, Vec<usize>)>,
    pub bipartition_cap: usize,
    pub output: OutputMode,
    pub jobs: usize,
    pub delta: f64,
    pub assume_local_min: bool,
    pub weight: Option<f64>,
}

impl RunConfig {
    pub fn new(command: Command, instance: impl Into<PathBuf>) -> Self {
        Self {
            command,
            instance: instance.into(),
            points: Vec::new(),
            directions: Vec::new(),
            tol: Tolerances::default(),
            radius: None,
            samples: None,
            seed: 0,
            bipartition: None,
            bipartition_cap: mpsc_core::analysis::DEFAULT_BIPARTITION_CAP,
            output: OutputMode::Text,
            jobs: 1,
            delta: 0.2,
            assume_local_min: false,
            weight: None,
        }
    }

    fn validate(&self) -> Result<(), CliError> {
        let t = &self.tol;
        if [t.act, t.dir, t.lin, t.rank].iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(CliError::Usage("tolerances must be positive".into()));
        }
        if self.radius.is_some_and(|r| !(r > 0.0 && r.is_finite())) {
            return Err(CliError::Usage("radius must be positive".into()));
        }
        if self.delta.is_nan() || self.delta <= 0.0 {
            return Err(CliError::Usage("delta must be positive".into()));
        }
        if self.jobs == 0 {
            return Err(CliError::Usage("jobs must be at least 1".into()));
        }
        Ok(())
    }
}

/// Exit status and rendered output of a command.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub output: String,
    pub exit_code: i32,
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_LATTICE: i32 = 2;

struct Ctx {
    inst: MpscInstance,
    pat: ActivePattern,
    directions: Vec<Vec<f64>>,
    cfg: RunConfig,
    so: StationarityOptions,
    co: CqOptions,
}

impl Ctx {
    fn report(&self) -> Report {
        Report::new(self.cfg.output)
    }

    fn directional(&self, d: &[f64]) -> Result<DirectionalPattern, CliError> {
        DirectionalPattern::new(&self.pat, d, self.cfg.tol.dir).map_err(analysis)
    }

    fn bipartitions(&self) -> Result<Vec<Bipartition>, CliError> {
        match &self.cfg.bipartition {
            Some((b1, b2)) => Ok(vec![Bipartition::new(b1.clone(), b2.clone(), &self.pat.biactive)
                .map_err(|_| CliError::Usage("the bipartition must split the biactive set".into()))?]),
            None => enumerate_bipartitions(&self.pat, self.cfg.bipartition_cap).map_err(analysis),
        }
    }
}

/// Loads the instance and runs the configured command.
pub fn execute(cfg: &RunConfig) -> Result<Outcome, CliError> {
    cfg.validate()?;
    let text = std::fs::read_to_string(&cfg.instance).map_err(|source| CliError::Io { path: cfg.instance.clone(), source })?;
    let inst = parse_instance(&text).map_err(|source| CliError::Parse { path: cfg.instance.clone(), source })?;
    execute_instance(inst, cfg)
}

pub fn execute_instance(inst: MpscInstance, cfg: &RunConfig) -> Result<Outcome, CliError> {
    cfg.validate()?;
    let n = inst.dim();
    let point = cfg.points.first().cloned().unwrap_or_else(|| vec![0.0; n]);
    for v in cfg.points.iter().chain(&cfg.directions) {
        if v.len() != n {
            return Err(CliError::Usage(format!("expected {n} coordinates, got {}", v.len())));
        }
    }
    let pat = ActivePattern::compute(&inst, &point, cfg.tol.act).map_err(analysis)?;
    let so = StationarityOptions { tol: cfg.tol, bipartition_cap: cfg.bipartition_cap, seed: cfg.seed, ..StationarityOptions::default() };
    let sampling = SamplingParams {
        radius: if matches!(cfg.command, Command::Analyze | Command::Cq(_) | Command::Branches) {
            cfg.radius.unwrap_or(SamplingParams::default().radius)
        } else {
            SamplingParams::default().radius
        },
        samples: cfg.samples.unwrap_or(SamplingParams::default().samples),
        seed: cfg.seed,
    };
    let co = CqOptions {
        tol: cfg.tol,
        sampling,
        sequence: cq::SequenceParams { seed: cfg.seed, ..Default::default() },
        bipartition_cap: cfg.bipartition_cap,
        ..CqOptions::default()
    };
    let ctx = Ctx { inst, pat, directions: cfg.directions.clone(), cfg: cfg.clone(), so, co };
    match &cfg.command {
        Command::Analyze => analyze(&ctx),
        Command::Stationarity(kind) => stationarity_cmd(&ctx, kind).map(ok),
        Command::Cq(name) => cq_cmd(&ctx, name).map(ok),
        Command::Branches => branches(&ctx).map(ok),
        Command::ErrorBound => errorbound(&ctx).map(ok),
        Command::Penalty => penalty(&ctx).map(ok),
        Command::Cones => cones_cmd(&ctx).map(ok),
    }
}

fn ok(r: Report) -> Outcome {
    Outcome { output: r.render(), exit_code: EXIT_OK }
}

fn header(ctx: &Ctx, r: &mut Report) {
    let (inst, pat) = (&ctx.inst, &ctx.pat);
    r.text(format!(
        "instance: n={} p={} q={} m={}",
        inst.dim(),
        inst.num_ineq(),
        inst.num_eq(),
        inst.num_switch()
    ));
    r.rec("instance.n", inst.dim().to_string());
    r.rec("instance.p", inst.num_ineq().to_string());
    r.rec("instance.q", inst.num_eq().to_string());
    r.rec("instance.m", inst.num_switch().to_string());
    r.text(format!("point: {}", tvec(&pat.point)));
    r.rec("point", nums(&pat.point));
    r.text(format!("residual: {}{}", tnum(pat.residual), if pat.is_feasible() { "" } else { " (infeasible)" }));
    r.rec("residual", num(pat.residual));
    r.rec("feasible", pat.is_feasible().to_string());
    for (label, set) in [("I_g", &pat.active_ineq), ("I_G", &pat.only_g), ("I_H", &pat.only_h), ("I_GH", &pat.biactive)] {
        r.text(format!("{label} = {}", tset(set)));
        r.rec(format!("sets.{label}"), rset(set));
    }
    if !pat.broken_pairs.is_empty() {
        r.text(format!("pairs with both switching functions nonzero: {}", tset(&pat.broken_pairs)));
        r.rec("sets.broken", rset(&pat.broken_pairs));
    }
    if !pat.near_ties.is_empty() {
        let list: Vec<String> = pat.near_ties.iter().map(|c| c.to_string()).collect();
        r.text(format!("warning: values within twice the activity tolerance: {}", list.join(", ")));
        r.rec("warning.near_ties", list.join(","));
    }
}

fn stationarity_lines(r: &mut Report, prefix: &str, label: &str, v: &StationarityVerdict) {
    stationarity_lines_keyed(r, &format!("{prefix}{}", key(label)), label, v)
}

fn stationarity_lines_keyed(r: &mut Report, k: &str, label: &str, v: &StationarityVerdict) {
    let tag = if v.holds { "HOLDS" } else { "FAILS" };
    let mut line = format!("{label}: {tag}");
    r.rec(k, tag);
    if let Some(bp) = &v.bipartition {
        r.rec(format!("{k}.bipartition"), bp.to_string());
    }
    let value_kinds = [StationarityKind::AmResidual, StationarityKind::LinDescent, StationarityKind::Sonc, StationarityKind::Sosc];
    if let Some(value) = v.value.filter(|_| value_kinds.contains(&v.kind)) {
        line += &format!(", value {}", tnum(value));
        r.rec(format!("{k}.value"), num(value));
    }
    if v.holds || v.kind == StationarityKind::Sonc {
        if let Some(m) = &v.multipliers {
            line += &format!(", λ = {m}");
            r.rec(format!("{k}.lambda"), rmult(m));
            r.rec(format!("{k}.residual"), num(v.residual));
        }
        if let Some(mu) = &v.mu {
            line += &format!(", μ = {mu}");
            r.rec(format!("{k}.mu"), rmult(mu));
        }
        if let Some(ws) = &v.working_set {
            line += &format!(", working set ({}, {}, {})", tset(&ws.jg), tset(&ws.jbig_g), tset(&ws.jbig_h));
            r.rec(format!("{k}.working_set"), format!("{};{};{}", rset(&ws.jg), rset(&ws.jbig_g), rset(&ws.jbig_h)));
        }
    }
    if v.kind == StationarityKind::LinDescent {
        if let Some(d) = &v.direction {
            line += &format!(", d = {}", tvec(d));
            r.rec(format!("{k}.direction"), nums(d));
        }
    }
    for (i, dc) in v.directions.iter().enumerate() {
        let show = |x: Option<f64>| x.map_or("none".to_string(), tnum);
        r.text(format!(
            "  critical direction {}: plain {}, directional {}",
            tvec(&dc.direction),
            show(dc.plain_value),
            show(dc.directional_value)
        ));
        let dk = format!("{k}.critical.{}", i + 1);
        r.rec(format!("{dk}.direction"), nums(&dc.direction));
        r.rec(format!("{dk}.plain"), dc.plain_value.map_or("none".into(), num));
        r.rec(format!("{dk}.directional"), dc.directional_value.map_or("none".into(), num));
    }
    if let Some(note) = &v.note {
        line += &format!(" [{note}]");
        r.rec(format!("{k}.note"), note.clone());
    }
    r.text(line);
}

fn witness_text(w: &CqWitness) -> (String, Vec<(String, String)>) {
    match w {
        CqWitness::Multipliers(m) => (format!("multipliers {}", tvec(m)), vec![("multipliers".into(), nums(m))]),
        CqWitness::Rank { rank, size } => (format!("rank {rank} of {size}"), vec![("rank".into(), format!("{rank}/{size}"))]),
        CqWitness::Sample { point, family, rank_at_point, rank_at_sample } => (
            format!("at {}: rank of {{{}}} changes from {rank_at_point} to {rank_at_sample}", tvec(point), family.join(", ")),
            vec![
                ("point".into(), nums(point)),
                ("family".into(), family.join(",")),
                ("rank".into(), format!("{rank_at_point}->{rank_at_sample}")),
            ],
        ),
        CqWitness::Sequence { multipliers, t, point } => (
            format!("multipliers {} with t = {} at {}", tvec(multipliers), tnum(*t), tvec(point)),
            vec![("multipliers".into(), nums(multipliers)), ("t".into(), num(*t)), ("point".into(), nums(point))],
        ),
        CqWitness::Branch { bipartition, verdict } => {
            let (inner, mut recs) = verdict.witness().map(witness_text).unwrap_or_default();
            recs.insert(0, ("branch".into(), bipartition.to_string()));
            (format!("branch {bipartition} {}: {inner}", verdict.tag()), recs)
        }
    }
}

fn cq_lines(r: &mut Report, prefix: &str, rep: &CqReport) {
    let label = rep.label();
    let k = format!("{prefix}{}", key(&label));
    let mut line = format!("{label}: {}", rep.verdict.tag());
    r.rec(&k, rep.verdict.tag());
    if let Some(w) = rep.verdict.witness() {
        let (t, recs) = witness_text(w);
        line += &format!(" ({t})");
        for (a, b) in recs {
            r.rec(format!("{k}.witness.{a}"), b);
        }
    }
    if let mpsc_core::CqVerdict::Inconclusive(reason) = &rep.verdict {
        line += &format!(" ({reason})");
        r.rec(format!("{k}.reason"), reason.clone());
    }
    if let Some(s) = &rep.sampling {
        line += &format!(" [radius {}, {} samples, seed {}]", tnum(s.radius), s.samples, s.seed);
        r.rec(format!("{k}.radius"), num(s.radius));
        r.rec(format!("{k}.samples"), s.samples.to_string());
        r.rec(format!("{k}.seed"), s.seed.to_string());
    }
    r.text(line);
}

struct Section {
    report: Report,
    verdicts: Vec<StationarityVerdict>,
    cqs: Vec<CqReport>,
}

type SectionFn = fn(&Ctx) -> Result<Section, CliError>;

fn section(ctx: &Ctx) -> Section {
    Section { report: ctx.report(), verdicts: Vec::new(), cqs: Vec::new() }
}

fn plain_stationarity(ctx: &Ctx) -> Result<Section, CliError> {
    let mut s = section(ctx);
    let (pat, so) = (&ctx.pat, &ctx.so);
    s.report.text("-- stationarity");
    for v in [stationarity::check_w(pat, so), stationarity::check_m(pat, so), stationarity::check_s(pat, so)] {
        let v = v.map_err(analysis)?;
        stationarity_lines(&mut s.report, "stationarity.", v.kind.label(), &v);
        s.verdicts.push(v);
    }
    for (i, bp) in ctx.bipartitions()?.iter().enumerate() {
        let v = stationarity::check_q(pat, bp, so).map_err(analysis)?;
        stationarity_lines_keyed(&mut s.report, &format!("stationarity.Q.{}", i + 1), &format!("Q{bp}"), &v);
        let up = stationarity::check_q_to_s_upgrade(pat, bp, so);
        let detail: Vec<String> =
            up.failures.iter().map(|f| format!("{} product at pairs ({}, {})", f.condition.label(), f.first + 1, f.second + 1)).collect();
        s.report.text(format!(
            "Q{bp} -> S upgrade: {}{}",
            if up.holds { "HOLDS" } else { "FAILS" },
            if detail.is_empty() { String::new() } else { format!(" ({})", detail.join("; ")) }
        ));
        let k = format!("stationarity.upgrade.{}", i + 1);
        s.report.rec(&k, if up.holds { "HOLDS" } else { "FAILS" });
        s.report.rec(
            format!("{k}.failures"),
            up.failures.iter().map(|f| format!("{}:{}:{}", key(f.condition.label()), f.first + 1, f.second + 1)).collect::<Vec<_>>().join(","),
        );
    }
    let qm = stationarity::check_qm(pat, so).map_err(analysis)?;
    stationarity_lines(&mut s.report, "stationarity.", "QM", &qm);
    s.verdicts.push(qm);
    let am = stationarity::am_residual(&ctx.inst, &pat.point, so).map_err(analysis)?;
    stationarity_lines(&mut s.report, "stationarity.", "AM-residual", &am);
    let ld = stationarity::linearized_descent(pat, so).map_err(analysis)?;
    stationarity_lines(&mut s.report, "stationarity.", "linearized-descent", &ld);
    let sosc = stationarity::second_order_sufficient(&ctx.inst, pat, so).map_err(analysis)?;
    stationarity_lines(&mut s.report, "stationarity.", "SOSC", &sosc);
    Ok(s)
}

fn directional_section(ctx: &Ctx) -> Result<Section, CliError> {
    let mut s = section(ctx);
    let (so, co) = (&ctx.so, &ctx.co);
    for (i, d) in ctx.directions.iter().enumerate() {
        let dp = ctx.directional(d)?;
        let prefix = format!("direction.{}.", i + 1);
        s.report.text(format!("-- direction d = {}", tvec(d)));
        s.report.rec(format!("direction.{}", i + 1), nums(d));
        for rung in [Ladder::W, Ladder::M, Ladder::S] {
            let v = stationarity::check_directional(&dp, rung, so).map_err(analysis)?;
            stationarity_lines(&mut s.report, &prefix, v.kind.label(), &v);
            s.verdicts.push(v);
        }
        let v = stationarity::check_strong_m(&dp, so).map_err(analysis)?;
        stationarity_lines(&mut s.report, &prefix, v.kind.label(), &v);
        s.verdicts.push(v);
        let v = stationarity::second_order_necessary(&ctx.inst, &dp, so).map_err(analysis)?;
        stationarity_lines(&mut s.report, &prefix, v.kind.label(), &v);
        let reports = vec![
            cq::check_licq(&dp, co),
            cq::check_foscms(&dp, co).map_err(analysis)?,
            cq::check_soscms(&ctx.inst, &dp, co).map_err(analysis)?,
            cq::check_pseudo_normality(&ctx.inst, &dp, co).map_err(analysis)?,
            cq::check_quasi_normality(&ctx.inst, &dp, co).map_err(analysis)?,
        ];
        for rep in reports {
            cq_lines(&mut s.report, &prefix, &rep);
            s.cqs.push(rep);
        }
    }
    Ok(s)
}

fn exact_cq_section(ctx: &Ctx) -> Result<Section, CliError> {
    let mut s = section(ctx);
    let co = &ctx.co;
    let zero = DirectionalPattern::zero(&ctx.pat);
    s.report.text("-- constraint qualifications");
    let reports = vec![
        cq::check_licq(&zero, co),
        cq::check_mfcq(&ctx.pat, co).map_err(analysis)?,
        cq::check_foscms(&zero, co).map_err(analysis)?,
        cq::check_pseudo_normality(&ctx.inst, &zero, co).map_err(analysis)?,
        cq::check_quasi_normality(&ctx.inst, &zero, co).map_err(analysis)?,
    ];
    for rep in reports {
        cq_lines(&mut s.report, "cq.", &rep);
        s.cqs.push(rep);
    }
    Ok(s)
}

const NEIGHBOURHOOD: [NlpCq; 5] = [NlpCq::Crcq, NlpCq::Rcrcq, NlpCq::Cpld, NlpCq::Rcpld, NlpCq::Crsc];

fn tnlp_section(ctx: &Ctx) -> Result<Section, CliError> {
    let mut s = section(ctx);
    for which in NEIGHBOURHOOD {
        let rep = cq::check_tnlp(&ctx.inst, &ctx.pat, which, &ctx.co).map_err(analysis)?;
        cq_lines(&mut s.report, "cq.", &rep);
        s.cqs.push(rep);
    }
    let rep = cq::check_mpsc_rcpld(&ctx.inst, &ctx.pat, &ctx.co).map_err(analysis)?;
    cq_lines(&mut s.report, "cq.", &rep);
    s.cqs.push(rep);
    Ok(s)
}

fn piecewise_section(ctx: &Ctx) -> Result<Section, CliError> {
    let mut s = section(ctx);
    for which in NlpCq::ALL {
        let rep = cq::check_piecewise(&ctx.inst, &ctx.pat, which, &ctx.co).map_err(analysis)?;
        cq_lines(&mut s.report, "cq.", &rep);
        s.cqs.push(rep);
    }
    Ok(s)
}

/// Runs `sections` on up to `jobs` threads; results keep the input order.
fn run_sections(ctx: &Ctx, sections: &[SectionFn]) -> Vec<Result<Section, CliError>> {
    let jobs = ctx.cfg.jobs.min(sections.len()).max(1);
    if jobs == 1 {
        return sections.iter().map(|f| f(ctx)).collect();
    }
    let mut slots: Vec<Option<Result<Section, CliError>>> = (0..sections.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..jobs)
            .map(|w| {
                scope.spawn(move || {
                    (w..sections.len()).step_by(jobs).map(|i| (i, sections[i](ctx))).collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (i, res) in h.join().expect("worker panicked") {
                slots[i] = Some(res);
            }
        }
    });
    slots.into_iter().map(|s| s.expect("every section ran")).collect()
}

fn analyze(ctx: &Ctx) -> Result<Outcome, CliError> {
    let mut r = ctx.report();
    header(ctx, &mut r);
    cones_lines(ctx, &mut r, &ctx.pat, None)?;
    let sections: [SectionFn; 5] = [plain_stationarity, directional_section, exact_cq_section, tnlp_section, piecewise_section];
    let mut bundle = Bundle { local_minimizer: ctx.cfg.assume_local_min, ..Bundle::default() };
    for s in run_sections(ctx, &sections) {
        let s = s?;
        r.append(s.report);
        bundle.verdicts.extend(s.verdicts);
        bundle.reports.extend(s.cqs);
    }
    let violations = cq::cross_check_implications(&bundle);
    r.text("-- implication lattice");
    r.text(format!("lattice violations: {}", violations.len()));
    r.rec("lattice.violations", violations.len().to_string());
    for (i, v) in violations.iter().enumerate() {
        let sampled = if v.uses_samples { " (involves a sampled verdict)" } else { "" };
        r.text(format!("  {} holds but {} fails{sampled}", v.premise, v.conclusion));
        r.rec(format!("lattice.violation.{}", i + 1), format!("{}=>{}", v.premise, v.conclusion));
    }
    Ok(Outcome { output: r.render(), exit_code: if violations.is_empty() { EXIT_OK } else { EXIT_LATTICE } })
}

fn stationarity_cmd(ctx: &Ctx, kind: &StationarityChoice) -> Result<Report, CliError> {
    let mut r = ctx.report();
    let (pat, so) = (&ctx.pat, &ctx.so);
    let dirs: Vec<Vec<f64>> = if ctx.directions.is_empty() { vec![vec![0.0; pat.dim()]] } else { ctx.directions.clone() };
    let emit = |r: &mut Report, label: &str, v: &StationarityVerdict| stationarity_lines(r, "stationarity.", label, v);
    match kind {
        StationarityChoice::W | StationarityChoice::M | StationarityChoice::S => {
            let rung = match kind {
                StationarityChoice::W => Ladder::W,
                StationarityChoice::M => Ladder::M,
                _ => Ladder::S,
            };
            if ctx.directions.is_empty() {
                let v = match rung {
                    Ladder::W => stationarity::check_w(pat, so),
                    Ladder::M => stationarity::check_m(pat, so),
                    Ladder::S => stationarity::check_s(pat, so),
                }
                .map_err(analysis)?;
                emit(&mut r, v.kind.label(), &v);
            }
            for d in &ctx.directions {
                let v = stationarity::check_directional(&ctx.directional(d)?, rung, so).map_err(analysis)?;
                emit(&mut r, &format!("{} at d = {}", v.kind.label(), tvec(d)), &v);
            }
        }
        StationarityChoice::Q => {
            for (i, bp) in ctx.bipartitions()?.into_iter().enumerate() {
                let v = stationarity::check_q(pat, &bp, so).map_err(analysis)?;
                stationarity_lines_keyed(&mut r, &format!("stationarity.Q.{}", i + 1), &format!("Q{bp}"), &v);
                let up = stationarity::check_q_to_s_upgrade(pat, &bp, so);
                let mut conds: Vec<String> = up.failures.iter().map(|f| format!("{} product", f.condition.label())).collect();
                conds.dedup();
                r.text(format!("Q{bp} -> S upgrade: {}{}", if up.holds { "HOLDS" } else { "FAILS" }, if conds.is_empty() { String::new() } else { format!(", {}", conds.join(", ")) }));
                r.rec(format!("stationarity.upgrade.{}", i + 1), if up.holds { "HOLDS" } else { "FAILS" });
            }
        }
        StationarityChoice::QM => {
            let v = stationarity::check_qm(pat, so).map_err(analysis)?;
            emit(&mut r, "QM", &v);
        }
        StationarityChoice::StrongM => {
            for d in &dirs {
                let v = stationarity::check_strong_m(&ctx.directional(d)?, so).map_err(analysis)?;
                emit(&mut r, &format!("strongM at d = {}", tvec(d)), &v);
            }
        }
        StationarityChoice::Am => {
            if ctx.cfg.points.len() > 1 {
                let rep = stationarity::am_sequence(&ctx.inst, &pat.point, &ctx.cfg.points[1..], ctx.cfg.tol.lin.max(1e-6), so)
                    .map_err(analysis)?;
                for (k, (res, dist)) in rep.residuals.iter().zip(&rep.distances).enumerate() {
                    r.text(format!("z^{}: AM residual {}, distance {}", k + 1, tnum(*res), tnum(*dist)));
                    r.rec(format!("am.{}.residual", k + 1), num(*res));
                    r.rec(format!("am.{}.distance", k + 1), num(*dist));
                }
                r.text(format!("AM sequence: {}", if rep.certified { "CERTIFIED" } else { "NOT CERTIFIED" }));
                r.rec("am.certified", rep.certified.to_string());
            } else {
                let v = stationarity::am_residual(&ctx.inst, &pat.point, so).map_err(analysis)?;
                emit(&mut r, "AM-residual", &v);
            }
        }
        StationarityChoice::Sonc => {
            for d in &dirs {
                let v = stationarity::second_order_necessary(&ctx.inst, &ctx.directional(d)?, so).map_err(analysis)?;
                emit(&mut r, &format!("SONC at d = {}", tvec(d)), &v);
            }
        }
        StationarityChoice::Sosc => {
            let v = stationarity::second_order_sufficient(&ctx.inst, pat, so).map_err(analysis)?;
            emit(&mut r, "SOSC", &v);
        }
        StationarityChoice::Descent => {
            let v = stationarity::linearized_descent(pat, so).map_err(analysis)?;
            emit(&mut r, "linearized-descent", &v);
        }
    }
    Ok(r)
}

fn cq_cmd(ctx: &Ctx, name: &str) -> Result<Report, CliError> {
    let mut r = ctx.report();
    let co = &ctx.co;
    let lower = name.to_ascii_lowercase();
    let dirs: Vec<Vec<f64>> = if ctx.directions.is_empty() { vec![vec![0.0; ctx.pat.dim()]] } else { ctx.directions.clone() };
    let mut reports = Vec::new();
    match lower.as_str() {
        "licq" | "foscms" | "nnamcq" | "soscms" | "quasi" | "pseudo" => {
            for d in &dirs {
                let dp = ctx.directional(d)?;
                let mut rep = match lower.as_str() {
                    "licq" => cq::check_licq(&dp, co),
                    "foscms" | "nnamcq" => cq::check_foscms(&dp, co).map_err(analysis)?,
                    "soscms" => cq::check_soscms(&ctx.inst, &dp, co).map_err(analysis)?,
                    "quasi" => cq::check_quasi_normality(&ctx.inst, &dp, co).map_err(analysis)?,
                    _ => cq::check_pseudo_normality(&ctx.inst, &dp, co).map_err(analysis)?,
                };
                rep.direction = Some(d.clone());
                reports.push(rep);
            }
        }
        "mfcq" => reports.push(cq::check_mfcq(&ctx.pat, co).map_err(analysis)?),
        "mpsc-rcpld" => reports.push(cq::check_mpsc_rcpld(&ctx.inst, &ctx.pat, co).map_err(analysis)?),
        other => {
            if let Some(which) = other.strip_prefix("piecewise-").and_then(NlpCq::from_label) {
                reports.push(cq::check_piecewise(&ctx.inst, &ctx.pat, which, co).map_err(analysis)?);
            } else if let Some(which) = NlpCq::from_label(other.strip_prefix("tnlp-").unwrap_or(other)) {
                reports.push(cq::check_tnlp(&ctx.inst, &ctx.pat, which, co).map_err(analysis)?);
            } else {
                return Err(CliError::Usage(format!("unknown constraint qualification `{name}`")));
            }
        }
    }
    for rep in &reports {
        cq_lines(&mut r, "cq.", rep);
    }
    Ok(r)
}

fn branches(ctx: &Ctx) -> Result<Report, CliError> {
    let mut r = ctx.report();
    let names = |view: &NlpView| -> (String, String) {
        let list = |cs: &[mpsc_core::analysis::ViewConstraint]| cs.iter().map(|c| c.origin.to_string()).collect::<Vec<_>>().join(",");
        (list(&view.ineq), list(&view.eq))
    };
    let tnlp = NlpView::tnlp(&ctx.inst, &ctx.pat);
    let (ti, te) = names(&tnlp);
    r.text(format!("TNLP: inequalities [{ti}], equalities [{te}]"));
    r.rec("tnlp.ineq", ti);
    r.rec("tnlp.eq", te);
    let bps = ctx.bipartitions()?;
    r.text(format!("bipartitions of I_GH = {}: {}", tset(&ctx.pat.biactive), bps.len()));
    r.rec("branches.count", bps.len().to_string());
    for (i, bp) in bps.iter().enumerate() {
        let view = NlpView::branch(&ctx.inst, &ctx.pat, bp);
        let (bi, be) = names(&view);
        let k = format!("branch.{}", i + 1);
        r.rec(&k, bp.to_string());
        r.rec(format!("{k}.ineq"), bi.clone());
        r.rec(format!("{k}.eq"), be.clone());
        let mut cells = Vec::new();
        for which in NlpCq::ALL {
            let rep = cq::check_branch(&ctx.inst, &ctx.pat, bp, which, &ctx.co).map_err(analysis)?;
            cells.push(format!("{} {}", which.label(), rep.verdict.tag()));
            r.rec(format!("{k}.{}", which.label()), rep.verdict.tag());
        }
        r.text(format!("NLP{bp}: equalities [{be}]; {}", cells.join(", ")));
    }
    Ok(r)
}

fn distance_options(ctx: &Ctx) -> DistanceOptions {
    DistanceOptions {
        tol_act: ctx.cfg.tol.act,
        tol_rank: ctx.cfg.tol.rank,
        bipartition_cap: ctx.cfg.bipartition_cap,
        seed: ctx.cfg.seed,
        ..DistanceOptions::default()
    }
}

pub const ERROR_BOUND_RADIUS: f64 = 0.5;
pub const ERROR_BOUND_SAMPLES: usize = 10_000;

fn estimate_lines(r: &mut Report, k: &str, label: &str, est: &ErrorBoundEstimate) {
    match est.modulus {
        Some(a) => {
            let w = est.witness.as_deref().unwrap_or(&[]);
            r.text(format!(
                "{label}: alpha = {} ({} infeasible of {} considered; worst at {}, distance {}, residual {}{})",
                tnum(a),
                est.infeasible,
                est.considered,
                tvec(w),
                tnum(est.witness_distance),
                tnum(est.witness_residual),
                if est.exact { "" } else { "; local projections, upper estimate" }
            ));
            r.rec(k, num(a));
            r.rec(format!("{k}.witness"), nums(w));
            r.rec(format!("{k}.distance"), num(est.witness_distance));
            r.rec(format!("{k}.residual"), num(est.witness_residual));
        }
        None => {
            r.text(format!("{label}: INCONCLUSIVE ({} infeasible samples)", est.infeasible));
            r.rec(k, "INCONCLUSIVE");
        }
    }
    r.rec(format!("{k}.considered"), est.considered.to_string());
    r.rec(format!("{k}.infeasible"), est.infeasible.to_string());
    r.rec(format!("{k}.exact"), est.exact.to_string());
    r.rec(format!("{k}.radius"), num(est.radius));
    r.rec(format!("{k}.samples"), est.samples.to_string());
    r.rec(format!("{k}.seed"), est.seed.to_string());
    if let Some(res) = &est.restriction {
        r.rec(format!("{k}.direction"), nums(&res.direction));
        r.rec(format!("{k}.rho"), num(res.rho));
        r.rec(format!("{k}.delta"), num(res.delta));
    }
}

fn errorbound(ctx: &Ctx) -> Result<Report, CliError> {
    let mut r = ctx.report();
    let radius = ctx.cfg.radius.unwrap_or(ERROR_BOUND_RADIUS);
    let n = ctx.cfg.samples.unwrap_or(ERROR_BOUND_SAMPLES);
    let opts = distance_options(ctx);
    let z = &ctx.pat.point;
    let res = bounds::residual(&ctx.inst, z).map_err(analysis)?;
    r.text(format!(
        "residual at {}: {} (g {}, h {}, switching {})",
        tvec(z),
        tnum(res.total),
        tnum(res.g_part),
        tnum(res.h_part),
        tnum(res.switch_part)
    ));
    r.rec("residual", num(res.total));
    r.text("distance: Euclidean; residual: sum of constraint violations");
    let est = bounds::estimate_error_bound_modulus(&ctx.inst, z, radius, n, None, &opts).map_err(analysis)?;
    estimate_lines(&mut r, "errorbound", "error bound", &est);
    for (i, d) in ctx.directions.iter().enumerate() {
        let restriction = DirectionalRestriction { direction: d.clone(), rho: radius, delta: ctx.cfg.delta };
        let est = bounds::estimate_error_bound_modulus(&ctx.inst, z, radius, n, Some(restriction), &opts).map_err(analysis)?;
        estimate_lines(
            &mut r,
            &format!("errorbound.direction.{}", i + 1),
            &format!("error bound near d = {} (delta {})", tvec(d), tnum(ctx.cfg.delta)),
            &est,
        );
    }
    Ok(r)
}

fn penalty(ctx: &Ctx) -> Result<Report, CliError> {
    let mut r = ctx.report();
    let radius = ctx.cfg.radius.unwrap_or(ERROR_BOUND_RADIUS);
    let n = ctx.cfg.samples.unwrap_or(ERROR_BOUND_SAMPLES);
    let z = &ctx.pat.point;
    let est = bounds::estimate_error_bound_modulus(&ctx.inst, z, radius, n, None, &distance_options(ctx)).map_err(analysis)?;
    estimate_lines(&mut r, "errorbound", "error bound", &est);
    let Some(alpha) = est.modulus else {
        r.text("penalty: INCONCLUSIVE (no error-bound estimate)");
        r.rec("penalty", "INCONCLUSIVE");
        return Ok(r);
    };
    let mut pen = bounds::build_penalty(&ctx.inst, z, alpha, radius, ctx.cfg.seed).map_err(analysis)?;
    if let Some(w) = ctx.cfg.weight {
        pen = pen.with_weight(w);
    }
    r.text(format!("Lf = {}, alpha = {}, weight = {}{}", tnum(pen.lipschitz), tnum(alpha), tnum(pen.weight), if pen.degenerate { " (degenerate)" } else { "" }));
    r.rec("penalty.lipschitz", num(pen.lipschitz));
    r.rec("penalty.weight", num(pen.weight));
    r.rec("penalty.degenerate", pen.degenerate.to_string());
    let check = bounds::verify_penalty_local_min(&pen, z, radius, n, ctx.cfg.seed.wrapping_add(1), 1e-9).map_err(analysis)?;
    let tag = if check.holds { "HOLDS" } else { "FAILS" };
    let mut line = format!("penalized local minimum: {tag}, worst improvement {}", tnum(check.worst_violation));
    r.rec("penalty", tag);
    r.rec("penalty.worst", num(check.worst_violation));
    if let Some(w) = &check.witness {
        line += &format!(" at {}", tvec(w));
        r.rec("penalty.witness", nums(w));
    }
    r.text(line);
    Ok(r)
}

fn product_lines(ctx: &Ctx, r: &mut Report, name: &str, rec_name: &str, cone: &ProductCone) {
    let inst = &ctx.inst;
    let mut parts = Vec::new();
    for i in 0..inst.num_ineq() {
        parts.push(format!("g{}: {}", i + 1, cone.ineq(i)));
    }
    for j in 0..inst.num_eq() {
        parts.push(format!("h{}: {}", j + 1, cone.eq(j)));
    }
    for i in 0..inst.num_switch() {
        parts.push(format!("(G{0},H{0}): {1}", i + 1, cone.switch(i)));
    }
    r.text(format!("{name}: {}", parts.join(", ")));
    for part in parts {
        let (c, tag) = part.split_once(": ").expect("formatted above");
        r.rec(format!("cones.{rec_name}.{c}"), tag.to_string());
    }
}

fn cones_lines(ctx: &Ctx, r: &mut Report, pat: &ActivePattern, dirs: Option<&[Vec<f64>]>) -> Result<(), CliError> {
    if !pat.is_feasible() {
        r.text("cones: not computed at an infeasible point");
        r.rec("cones", "infeasible");
        return Ok(());
    }
    product_lines(ctx, r, "tangent", "tangent", &cones::product_tangent(pat).map_err(analysis)?);
    product_lines(ctx, r, "regular normal", "regular_normal", &cones::product_regular_normal(pat).map_err(analysis)?);
    product_lines(ctx, r, "limiting normal", "limiting_normal", &cones::product_limiting_normal(pat).map_err(analysis)?);
    for (i, d) in dirs.unwrap_or(&[]).iter().enumerate() {
        let dp = DirectionalPattern::new(pat, d, ctx.cfg.tol.dir).map_err(analysis)?;
        let cone = cones::product_directional_normal(&dp).map_err(analysis)?;
        r.rec(format!("cones.directional_normal.{}", i + 1), nums(d));
        product_lines(ctx, r, &format!("directional normal at d = {}", tvec(d)), &format!("directional_normal.{}", i + 1), &cone);
    }
    Ok(())
}

fn cones_cmd(ctx: &Ctx) -> Result<Report, CliError> {
    let mut r = ctx.report();
    r.text(format!("point: {}", tvec(&ctx.pat.point)));
    r.rec("point", nums(&ctx.pat.point));
    cones_lines(ctx, &mut r, &ctx.pat, Some(&ctx.directions))?;
    let k = ctx.pat.p + ctx.pat.q;
    for i in 0..ctx.inst.num_switch() {
        let a = [ctx.pat.values[k + i], ctx.pat.values[k + ctx.pat.m + i]];
        for (j, d) in ctx.directions.iter().enumerate() {
            let pair = [ctx.pat.gradient(k + i), ctx.pat.gradient(k + ctx.pat.m + i)];
            let dd = [pair[0].iter().zip(d).map(|(g, d)| g * d).sum::<f64>(), pair[1].iter().zip(d).map(|(g, d)| g * d).sum::<f64>()];
            let tag = cones::regular_normal_of_tangent_switch(a, dd, ctx.cfg.tol.dir)
                .map(|c| c.to_string())
                .unwrap_or_else(|e| format!("undefined ({e})"));
            r.text(format!("regular normal of tangent, pair {} along {}: {tag}", i + 1, tvec(&dd)));
            r.rec(format!("cones.regular_normal_of_tangent.{}.{}", j + 1, i + 1), tag);
        }
    }
    Ok(r)
}
