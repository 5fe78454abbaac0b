//! Command-line surface: generate synthetic problems, build affinity
//! tensors, run solvers, sweep benchmarks, and run reference checks.
//!
//! Exit codes: 0 success, 2 usage error (bad flags, malformed input files),
//! 3 numerical failure.

mod algo;
mod bench;
mod check;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use hypermatch::affinity::{
    accuracy, build_pairwise, build_tensor, gen_synthetic, FeatureKind, GammaMode,
};
use hypermatch::qap::PsiKind;
use hypermatch::solvers::pairwise_ipfp;
use hypermatch::{
    AffinityConfigF64, Error, MatchProblemF64, SolverConfigF64, SparseTensor3F64,
    SyntheticConfigF64,
};

use algo::{AlgoSpec, Family};

/// Hypergraph matching between 2-D point sets.
#[derive(Parser)]
#[command(name = "hypermatch", version, about)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic matching problem file
    Generate(GenerateArgs),
    /// Build an affinity tensor from a problem file
    BuildTensor(BuildTensorArgs),
    /// Run one solver on a problem or tensor file
    Solve(SolveArgs),
    /// Run a benchmark sweep described by a spec file
    Bench(BenchArgs),
    /// Run desk-scale reference checks against the brute-force oracles
    OracleCheck(check::OracleCheckArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Number of inlier points
    #[arg(long)]
    n_in: usize,
    /// Number of outlier points appended to the target set
    #[arg(long, default_value_t = 0)]
    n_out: usize,
    /// Standard deviation of the additive deformation noise
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    sigma: f64,
    /// Multiplicative scale applied to the target copies
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    scale: f64,
    /// RNG seed (default: HYPERMATCH_SEED or 0)
    #[arg(long)]
    seed: Option<u64>,
    /// Output problem file (JSON)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum FeatureArg {
    /// Sines of the interior angles
    Sines,
    /// Interior angles in radians
    Angles,
}

#[derive(Args)]
struct AffinityArgs {
    /// Nearest target triples kept per sampled source triple
    #[arg(long, default_value_t = 300)]
    knn: usize,
    /// Ordered source triples to sample (default: n^2, capped)
    #[arg(long)]
    triples: Option<usize>,
    /// Hard cap on sampled triples
    #[arg(long, default_value_t = 200_000)]
    max_triples: usize,
    /// Weight decay rate: `auto` or a positive number
    #[arg(long, default_value = "auto")]
    gamma: String,
    /// Triangle descriptor
    #[arg(long, value_enum, default_value_t = FeatureArg::Sines)]
    feature: FeatureArg,
    /// Degeneracy threshold on triangle area
    #[arg(long, default_value_t = 1e-12)]
    min_area: f64,
}

impl AffinityArgs {
    fn to_config(&self, seed: u64) -> Result<AffinityConfigF64, CliError> {
        let gamma = if self.gamma.eq_ignore_ascii_case("auto") {
            GammaMode::Auto
        } else {
            let g: f64 = self
                .gamma
                .parse()
                .map_err(|_| CliError::usage(format!("bad --gamma value `{}`", self.gamma)))?;
            GammaMode::Fixed(g)
        };
        Ok(AffinityConfigF64 {
            gamma,
            triples_sampled: self.triples,
            max_triples: self.max_triples,
            knn: self.knn,
            min_area: self.min_area,
            feature: match self.feature {
                FeatureArg::Sines => FeatureKind::AngleSines,
                FeatureArg::Angles => FeatureKind::Angles,
            },
            seed,
        })
    }
}

#[derive(Args)]
struct BuildTensorArgs {
    /// Input problem file (JSON)
    #[arg(long)]
    problem: PathBuf,
    /// Output tensor file (text format)
    #[arg(long)]
    out: PathBuf,
    /// RNG seed for triple sampling (default: HYPERMATCH_SEED or 0)
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    affinity: AffinityArgs,
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("input").required(true).multiple(false))]
struct SolveArgs {
    /// Input problem file (JSON); the tensor is built on the fly
    #[arg(long, group = "input")]
    problem: Option<PathBuf>,
    /// Input tensor file (text format)
    #[arg(long, group = "input")]
    tensor: Option<PathBuf>,
    /// Algorithm name, e.g. bcagm3, adapt-bcagm3+mp, bcagm4, ipfp2
    #[arg(long)]
    algo: String,
    /// Quadratic subroutine override
    #[arg(long, value_enum)]
    psi: Option<PsiArg>,
    /// Use the adaptive (homotopy) schedule
    #[arg(long)]
    adaptive: bool,
    /// RNG seed for the tensor construction (default: HYPERMATCH_SEED or 0)
    #[arg(long)]
    seed: Option<u64>,
    /// Write the per-iteration trace to this file
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Homotopy increment override
    #[arg(long)]
    xi: Option<f64>,
    /// Relative equality tolerance override
    #[arg(long)]
    eq_tol: Option<f64>,
    /// Outer iteration cap override
    #[arg(long)]
    max_outer: Option<usize>,
    /// Pairwise affinity bandwidth for ipfp2
    #[arg(long, default_value_t = 0.5)]
    sigma_s: f64,
    #[command(flatten)]
    affinity: AffinityArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum PsiArg {
    Ipfp,
    Mpm,
}

#[derive(Args)]
struct BenchArgs {
    /// Benchmark spec file (JSON)
    #[arg(long)]
    spec: PathBuf,
    /// Directory for data.csv, summary.csv, pairs.csv
    #[arg(long)]
    out_dir: PathBuf,
    /// Master seed override (default: spec seed, HYPERMATCH_SEED, or 0)
    #[arg(long)]
    seed: Option<u64>,
}

/// CLI failure with its exit code classification.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numeric(String),
}

impl CliError {
    fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) => ExitCode::from(2),
            CliError::Numeric(_) => ExitCode::from(3),
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Numeric(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match &e {
            // bad inputs or configuration
            Error::BadShape { .. }
            | Error::ConfigInvalid(_)
            | Error::Parse(_)
            | Error::BadSigma(_)
            | Error::TooFewPoints { .. }
            | Error::IndexOutOfRange { .. }
            | Error::DiagonalEntry { .. }
            | Error::NegativeWeight { .. }
            | Error::LengthMismatch(..)
            | Error::DimensionMismatch { .. }
            | Error::Io(_) => CliError::Usage(e.to_string()),
            // numerical trouble
            Error::NonFiniteEntry { .. }
            | Error::NotAnAssignment
            | Error::HomogeneousTuple
            | Error::TooLarge { .. }
            | Error::NotSymmetric
            | Error::DegenerateTriangle
            | Error::AllTriplesDegenerate => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

/// Seed resolution: explicit flag, then HYPERMATCH_SEED, then 0.
fn resolve_seed(flag: Option<u64>) -> Result<u64, CliError> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var("HYPERMATCH_SEED") {
        Ok(v) => v
            .parse()
            .map_err(|_| CliError::usage(format!("HYPERMATCH_SEED must be an integer, got `{v}`"))),
        Err(_) => Ok(0),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Cmd::Generate(a) => cmd_generate(a),
        Cmd::BuildTensor(a) => cmd_build_tensor(a),
        Cmd::Solve(a) => cmd_solve(a),
        Cmd::Bench(a) => cmd_bench(a),
        Cmd::OracleCheck(a) => check::run(a),
    }
}

fn load_problem(path: &PathBuf) -> Result<MatchProblemF64, CliError> {
    let file = File::open(path)?;
    let problem: MatchProblemF64 = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    for p in problem.source.points.iter().chain(&problem.target.points) {
        if !p[0].is_finite() || !p[1].is_finite() {
            return Err(CliError::usage(format!(
                "{}: points must be finite",
                path.display()
            )));
        }
    }
    Ok(problem)
}

fn cmd_generate(a: GenerateArgs) -> Result<(), CliError> {
    let cfg = SyntheticConfigF64 {
        n_in: a.n_in,
        n_out: a.n_out,
        sigma: a.sigma,
        scale: a.scale,
        seed: resolve_seed(a.seed)?,
    };
    let problem = gen_synthetic(&cfg)?;
    let file = File::create(&a.out)?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer(&mut w, &problem).map_err(|e| CliError::usage(e.to_string()))?;
    w.write_all(b"\n")?;
    Ok(())
}

fn cmd_build_tensor(a: BuildTensorArgs) -> Result<(), CliError> {
    let problem = load_problem(&a.problem)?;
    let cfg = a.affinity.to_config(resolve_seed(a.seed)?)?;
    let tensor = build_tensor(&problem.source, &problem.target, &cfg)?;
    let file = File::create(&a.out)?;
    let mut w = BufWriter::new(file);
    tensor.write_text(&mut w)?;
    Ok(())
}

#[derive(Serialize)]
struct SolveRecord {
    algo: String,
    score: f64,
    accuracy: Option<f64>,
    iterations: usize,
    alpha_final: f64,
    runtime_ms: f64,
    assignment: Vec<u32>,
}

fn cmd_solve(a: SolveArgs) -> Result<(), CliError> {
    let psi = a.psi.map(|p| match p {
        PsiArg::Ipfp => PsiKind::Ipfp,
        PsiArg::Mpm => PsiKind::Mpm,
    });
    let spec = AlgoSpec::parse(&a.algo)
        .and_then(|s| s.with_flags(psi, a.adaptive))
        .map_err(CliError::usage)?;

    let solver_cfg = SolverConfigF64 {
        xi: a.xi,
        eq_tol: a.eq_tol.unwrap_or(1e-9),
        max_outer: a.max_outer,
        ..SolverConfigF64::default()
    };

    let record = if spec.family == Family::Pairwise {
        let path = a.problem.as_ref().ok_or_else(|| {
            CliError::usage("ipfp2 works on the pairwise affinity and needs --problem")
        })?;
        if a.trace.is_some() {
            return Err(CliError::usage("ipfp2 does not produce an iteration trace"));
        }
        let problem = load_problem(path)?;
        let dims = problem.dims()?;
        let start = Instant::now();
        let w = build_pairwise(&problem.source, &problem.target, a.sigma_s)?;
        let r = pairwise_ipfp(&w, dims)?;
        let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
        SolveRecord {
            algo: spec.name(),
            score: r.value,
            accuracy: problem
                .ground_truth
                .as_deref()
                .map(|gt| accuracy::<f64>(&r.assignment, gt)),
            iterations: 1,
            alpha_final: 0.0,
            runtime_ms,
            assignment: r.assignment.cols().to_vec(),
        }
    } else {
        let (tensor, ground_truth): (SparseTensor3F64, Option<Vec<usize>>) = match (&a.problem, &a.tensor) {
            (Some(p), None) => {
                let problem = load_problem(p)?;
                let cfg = a.affinity.to_config(resolve_seed(a.seed)?)?;
                let t = build_tensor(&problem.source, &problem.target, &cfg)?;
                (t, problem.ground_truth)
            }
            (None, Some(tp)) => {
                let file = File::open(tp)?;
                let t = SparseTensor3F64::read_text(&mut BufReader::new(file))?;
                (t, None)
            }
            _ => unreachable!("clap group enforces exactly one input"),
        };
        let start = Instant::now();
        let r = spec.run_tensor(&tensor, &solver_cfg)?;
        let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
        if let Some(path) = &a.trace {
            let file = File::create(path)?;
            let mut w = BufWriter::new(file);
            r.write_trace(&mut w)?;
        }
        SolveRecord {
            algo: spec.name(),
            score: r.score,
            accuracy: ground_truth
                .as_deref()
                .map(|gt| accuracy::<f64>(&r.assignment, gt)),
            iterations: r.iterations,
            alpha_final: r.alpha_trace.last().copied().unwrap_or(0.0),
            runtime_ms,
            assignment: r.assignment.cols().to_vec(),
        }
    };

    let text = serde_json::to_string(&record).map_err(|e| CliError::usage(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> Result<(), CliError> {
    let file = File::open(&a.spec)?;
    let spec: bench::BenchSpec = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| CliError::usage(format!("{}: {e}", a.spec.display())))?;
    let master = match a.seed {
        Some(s) => s,
        None => match spec.seed {
            Some(s) => s,
            None => resolve_seed(None)?,
        },
    };
    bench::run(&spec, &a.out_dir, master)
}
