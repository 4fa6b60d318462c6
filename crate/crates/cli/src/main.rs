use clap::{Args, Parser, Subcommand, ValueEnum};
use mpsc_cli::format::{parse_list, OutputMode};
use mpsc_cli::run::{self, CliError, Command, RunConfig, StationarityChoice};
use mpsc_core::analysis::{Tolerances, DEFAULT_BIPARTITION_CAP};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

/// Stationarity, constraint-qualification and error-bound analysis for
/// programs with switching constraints.
#[derive(Parser, Debug)]
#[command(name = "mpsc", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Index sets, cones, every stationarity and CQ verdict, and the implication check.
    Analyze(Common),
    /// One stationarity concept.
    Stationarity {
        #[arg(long, value_parser = parse_kind)]
        kind: StationarityChoice,
        #[command(flatten)]
        common: Common,
    },
    /// One constraint qualification (licq, mfcq, foscms, soscms, quasi, pseudo,
    /// tnlp-<name>, piecewise-<name>, mpsc-rcpld).
    Cq {
        #[arg(long)]
        name: String,
        #[command(flatten)]
        common: Common,
    },
    /// Bipartitions of the biactive set with their branch problems.
    Branches(Common),
    /// Sampled error-bound modulus.
    Errorbound(Common),
    /// Exact-penalty check with the estimated modulus.
    Penalty {
        /// Overrides the weight Lf * alpha.
        #[arg(long)]
        weight: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Tangent and normal cone tags per constraint.
    Cones(Common),
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Output {
    Text,
    Records,
}

#[derive(Args, Debug)]
struct Common {
    /// Instance file.
    instance: PathBuf,
    /// Point, comma separated; repeat for AM sequences.
    #[arg(long = "point", visible_alias = "at", value_parser = parse_vec, allow_hyphen_values = true)]
    points: Vec<Vec<f64>>,
    /// Direction, comma separated; may be repeated.
    #[arg(long = "dir", value_parser = parse_vec, allow_hyphen_values = true)]
    directions: Vec<Vec<f64>>,
    #[arg(long, default_value_t = Tolerances::default().act)]
    tol_act: f64,
    #[arg(long, default_value_t = Tolerances::default().dir)]
    tol_dir: f64,
    #[arg(long, default_value_t = Tolerances::default().lin)]
    tol_lin: f64,
    #[arg(long, default_value_t = Tolerances::default().rank)]
    tol_rank: f64,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Bipartition of the biactive set as `beta1;beta2` with 1-based pair indices.
    #[arg(long, value_parser = parse_bipartition, allow_hyphen_values = true)]
    bipartition: Option<(Vec<usize>, Vec<usize>)>,
    #[arg(long, default_value_t = DEFAULT_BIPARTITION_CAP)]
    bipartition_cap: usize,
    /// Width of the directional sector for `errorbound --dir`.
    #[arg(long, default_value_t = 0.2)]
    delta: f64,
    #[arg(long, value_enum, default_value_t = Output::Text)]
    output: Output,
    /// Worker threads for `analyze`.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Treat the point as a local minimizer when checking implications.
    #[arg(long)]
    local_min: bool,
}

fn parse_vec(s: &str) -> Result<Vec<f64>, String> {
    parse_list(s)
}

fn parse_kind(s: &str) -> Result<StationarityChoice, String> {
    StationarityChoice::parse(s).ok_or_else(|| format!("unknown stationarity kind `{s}`"))
}

fn parse_bipartition(s: &str) -> Result<(Vec<usize>, Vec<usize>), String> {
    let (a, b) = s.split_once(';').ok_or("expected `beta1;beta2`")?;
    let side = |t: &str| -> Result<Vec<usize>, String> {
        t.split(',')
            .map(str::trim)
            .filter(|x| !x.is_empty())
            .map(|x| match x.parse::<usize>() {
                Ok(i) if i >= 1 => Ok(i - 1),
                _ => Err(format!("`{x}` is not a 1-based index")),
            })
            .collect()
    };
    Ok((side(a)?, side(b)?))
}

fn config(command: Command, c: Common, weight: Option<f64>) -> RunConfig {
    let mut cfg = RunConfig::new(command, c.instance);
    cfg.points = c.points;
    cfg.directions = c.directions;
    cfg.tol = Tolerances { act: c.tol_act, dir: c.tol_dir, lin: c.tol_lin, rank: c.tol_rank };
    cfg.radius = c.radius;
    cfg.samples = c.samples;
    cfg.seed = c.seed;
    cfg.bipartition = c.bipartition;
    cfg.bipartition_cap = c.bipartition_cap;
    cfg.delta = c.delta;
    cfg.output = match c.output {
        Output::Text => OutputMode::Text,
        Output::Records => OutputMode::Records,
    };
    cfg.jobs = c.jobs;
    cfg.assume_local_min = c.local_min;
    cfg.weight = weight;
    cfg
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match cli.command {
        Cmd::Analyze(c) => config(Command::Analyze, c, None),
        Cmd::Stationarity { kind, common } => config(Command::Stationarity(kind), common, None),
        Cmd::Cq { name, common } => config(Command::Cq(name), common, None),
        Cmd::Branches(c) => config(Command::Branches, c, None),
        Cmd::Errorbound(c) => config(Command::ErrorBound, c, None),
        Cmd::Penalty { weight, common } => config(Command::Penalty, common, weight),
        Cmd::Cones(c) => config(Command::Cones, c, None),
    };
    match run::execute(&cfg) {
        Ok(outcome) => {
            let mut out = std::io::stdout().lock();
            if out.write_all(outcome.output.as_bytes()).and_then(|_| out.flush()).is_err() {
                return ExitCode::from(run::EXIT_ERROR as u8);
            }
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Usage(_) = e {
                eprintln!("run `mpsc --help` for usage");
            }
            ExitCode::from(run::EXIT_ERROR as u8)
        }
    }
}
