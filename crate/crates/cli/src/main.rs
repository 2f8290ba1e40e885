use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cvarcut::bench::{self, BenchConfig};
use cvarcut::cutting_plane::write_trace_csv;
use cvarcut::frontier::{self, PointStatus, SweepOptions};
use cvarcut::{
    BackendKind, Error, GeneratorSpec, Method, Portfolio, PositionBounds,
    ProfitVector, RiskSpec, ScenarioMatrix, SolveConfig, Termination,
};

mod exit {
    pub const USAGE: u8 = 2;
    pub const IO: u8 = 3;
    pub const INFEASIBLE: u8 = 4;
    pub const SOLVER: u8 = 5;
    pub const ITERATION_LIMIT: u8 = 6;
}

#[derive(Parser)]
#[command(name = "cvarcut", version, about = "CVaR-constrained portfolio optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic factor-model scenario matrix.
    Generate(GenerateArgs),
    /// Maximize expected profit under a risk cap.
    Optimize(OptimizeArgs),
    /// Sweep target risks and write the efficient frontier.
    Frontier(FrontierArgs),
    /// Time both methods on generated instances.
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    scenarios: usize,
    #[arg(long)]
    instruments: usize,
    #[arg(long, default_value_t = 100)]
    factors: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct ModelArgs {
    /// Scenario matrix CSV (header of instrument names, one row per scenario).
    #[arg(short, long)]
    input: PathBuf,
    /// Comma-separated `return_period:weight` terms.
    #[arg(long, default_value = "100:1")]
    risk: String,
    #[arg(long, allow_hyphen_values = true)]
    lower: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    upper: Option<f64>,
    /// Per-instrument bounds CSV with `lower` and `upper` columns.
    #[arg(long, conflicts_with_all = ["lower", "upper"])]
    bounds: Option<PathBuf>,
    /// Profit CSV with a `profit` column; defaults to the column means of Y.
    #[arg(long)]
    profit: Option<PathBuf>,
    #[arg(long, default_value = "simplex")]
    backend: String,
    #[arg(long, default_value_t = 1e-6)]
    delta: f64,
    #[arg(long)]
    max_iterations: Option<usize>,
}

#[derive(Args)]
struct OptimizeArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value = "cutting-plane")]
    method: String,
    /// Risk cap, or `current` for the risk of the unit portfolio.
    #[arg(long, allow_hyphen_values = true)]
    target_risk: String,
    #[arg(long)]
    no_verify: bool,
    /// Write x* here as `instrument,position`.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Write the per-iteration trace here.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct FrontierArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value = "cutting-plane")]
    method: String,
    /// Lowest target; defaults to the minimum achievable risk.
    #[arg(long, allow_hyphen_values = true)]
    risk_lo: Option<f64>,
    /// Highest target; defaults to the risk of the box-only optimum.
    #[arg(long, allow_hyphen_values = true)]
    risk_hi: Option<f64>,
    #[arg(long, default_value_t = 9)]
    steps: usize,
    #[arg(long)]
    parallel: bool,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Instances as `JxN` pairs, e.g. `1000x100,10000x100`.
    #[arg(long)]
    grid: Option<String>,
    /// Add the two largest instances (needs ~8 GB).
    #[arg(long)]
    full: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "100:1")]
    risk: String,
    #[arg(long, default_value = "ipm")]
    backend: String,
    #[arg(long)]
    parallel: bool,
    /// Byte budget for Y (overrides the environment variable).
    #[arg(long)]
    memory_budget: Option<String>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: exit::USAGE, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io { .. } | Error::Parse { .. } | Error::Csv(_) => exit::IO,
            Error::Solver { .. } | Error::RepeatedCut { .. } | Error::NotVerifiable { .. } => {
                exit::SOLVER
            }
            Error::Dimension(_) | Error::InvalidInput(_) | Error::ReturnPeriod { .. } => exit::USAGE,
        };
        Self { code, message: e.to_string() }
    }
}

type CmdResult = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Optimize(a) => cmd_optimize(a),
        Command::Frontier(a) => cmd_frontier(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

/// 10 significant digits.
fn sig(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return v.to_string();
    }
    let decimals = 9 - v.abs().log10().floor() as i32;
    if (0..=17).contains(&decimals) {
        format!("{:.*}", decimals as usize, v)
    } else {
        format!("{v:.9e}")
    }
}

fn create(path: &Path) -> std::result::Result<BufWriter<File>, Failure> {
    File::create(path).map(BufWriter::new).map_err(|e| Failure {
        code: exit::IO,
        message: format!("{}: {e}", path.display()),
    })
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure { code: exit::IO, message: format!("{}: {e}", path.display()) }
}

fn cmd_generate(a: GenerateArgs) -> CmdResult {
    let spec = GeneratorSpec::new(a.scenarios, a.instruments, a.seed).with_factors(a.factors);
    let y = cvarcut::scenario::generate_synthetic(&spec)?;
    y.save_csv(&a.output)?;
    println!("scenarios: {}", y.scenarios());
    println!("instruments: {}", y.instruments());
    println!("factors: {}", a.factors);
    println!("mean entry: {}", sig(y.mean_entry()));
    Ok(())
}

struct Model {
    y: ScenarioMatrix,
    profit: ProfitVector,
    bounds: PositionBounds,
    risk: cvarcut::RiskVector,
    backend: BackendKind,
    config: SolveConfig,
}

fn read_columns(path: &Path, wanted: &[&str]) -> std::result::Result<Vec<Vec<f64>>, Failure> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| io_failure(path, e))?;
    let headers = reader.headers().map_err(|e| io_failure(path, e))?.clone();
    let idx: Vec<usize> = wanted
        .iter()
        .map(|w| {
            headers
                .iter()
                .position(|h| h.trim() == *w)
                .ok_or_else(|| io_failure(path, format!("missing column `{w}`")))
        })
        .collect::<std::result::Result<_, _>>()?;
    let mut out = vec![Vec::new(); wanted.len()];
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| io_failure(path, e))?;
        for (k, &i) in idx.iter().enumerate() {
            let field = record.get(i).unwrap_or("").trim();
            let v = field.parse::<f64>().map_err(|_| {
                io_failure(path, format!("row {}: `{field}` is not a number", line + 2))
            })?;
            out[k].push(v);
        }
    }
    Ok(out)
}

fn load_model(m: &ModelArgs) -> std::result::Result<Model, Failure> {
    let y = ScenarioMatrix::load_csv(&m.input)?;
    let n = y.instruments();
    let spec: RiskSpec = m.risk.parse()?;
    let risk = spec.risk_vector(y.scenarios())?;
    let bounds = match &m.bounds {
        Some(path) => {
            let mut cols = read_columns(path, &["lower", "upper"])?;
            let upper = cols.pop().unwrap_or_default();
            let lower = cols.pop().unwrap_or_default();
            if lower.len() != n {
                return Err(Failure::usage(format!(
                    "{}: {} bounds rows for {n} instruments",
                    path.display(),
                    lower.len()
                )));
            }
            PositionBounds::new(lower, upper)?
        }
        None => {
            let lower = m.lower.ok_or_else(|| Failure::usage("--lower or --bounds is required"))?;
            let upper = m.upper.ok_or_else(|| Failure::usage("--upper or --bounds is required"))?;
            PositionBounds::uniform(n, lower, upper)?
        }
    };
    let profit = match &m.profit {
        Some(path) => {
            let p = read_columns(path, &["profit"])?.remove(0);
            if p.len() != n {
                return Err(Failure::usage(format!(
                    "{}: {} profit rows for {n} instruments",
                    path.display(),
                    p.len()
                )));
            }
            ProfitVector::new(p)?
        }
        None => y.column_means(),
    };
    let backend: BackendKind = m.backend.parse()?;
    let config = SolveConfig {
        delta: m.delta,
        max_iterations: m.max_iterations,
        ..SolveConfig::default()
    };
    config.validate()?;
    Ok(Model { y, profit, bounds, risk, backend, config })
}

fn cmd_optimize(a: OptimizeArgs) -> CmdResult {
    let mut model = load_model(&a.model)?;
    let method: Method = a.method.parse()?;
    model.config.verify = !a.no_verify;
    let portfolio = Portfolio::new(&model.y, &model.profit, &model.bounds, &model.risk)?;
    let target = match a.target_risk.trim() {
        "current" => portfolio.current_risk()?,
        s => s
            .parse::<f64>()
            .map_err(|_| Failure::usage(format!("--target-risk `{s}` is not a number")))?,
    };
    let backend = model.backend.backend();
    let result = cvarcut::solve(method, &portfolio, target, &model.config, backend.as_ref())?;

    if result.termination == Termination::InfeasibleTarget {
        let d = frontier::min_achievable_risk(&model.y, &model.bounds, &model.risk, backend.as_ref())?;
        return Err(Failure {
            code: exit::INFEASIBLE,
            message: format!(
                "infeasible target risk {}: minimum achievable risk is {}",
                sig(target),
                sig(d.risk)
            ),
        });
    }
    if let Some(path) = &a.output {
        let mut w = create(path)?;
        writeln!(w, "instrument,position").map_err(|e| io_failure(path, e))?;
        for (name, x) in model.y.names().iter().zip(&result.x_star) {
            writeln!(w, "{name},{x}").map_err(|e| io_failure(path, e))?;
        }
        w.flush().map_err(|e| io_failure(path, e))?;
    }
    if let Some(path) = &a.trace {
        let mut w = create(path)?;
        write_trace_csv(&result.trace, &mut w)
            .and_then(|_| w.flush())
            .map_err(|e| io_failure(path, e))?;
    }
    println!("method: {method}");
    println!("risk constraint: {}", sig(target));
    println!("achieved risk: {}", sig(result.achieved_risk));
    println!("profit: {}", sig(result.profit));
    println!("iterations: {}", result.iterations);
    println!("cuts: {}", result.cuts.len());
    println!(
        "verification: {}",
        match &result.verification {
            None => "skipped".to_string(),
            Some(r) if r.verified => format!("passed (duality gap {:.3e})", r.duality_gap),
            Some(r) => format!("FAILED (duality gap {:.3e})", r.duality_gap),
        }
    );
    if result.termination == Termination::IterationLimit {
        return Err(Failure {
            code: exit::ITERATION_LIMIT,
            message: format!("iteration limit reached after {} LP solves", result.iterations),
        });
    }
    if matches!(&result.verification, Some(r) if !r.verified) {
        return Err(Failure {
            code: exit::SOLVER,
            message: "solution failed verification".into(),
        });
    }
    Ok(())
}

fn cmd_frontier(a: FrontierArgs) -> CmdResult {
    let model = load_model(&a.model)?;
    let method: Method = a.method.parse()?;
    let portfolio = Portfolio::new(&model.y, &model.profit, &model.bounds, &model.risk)?;
    let backend = model.backend.backend();
    let lo = match a.risk_lo {
        Some(v) => v,
        None => {
            frontier::min_achievable_risk(&model.y, &model.bounds, &model.risk, backend.as_ref())?
                .risk
        }
    };
    let hi = match a.risk_hi {
        Some(v) => v,
        None => portfolio.risk_of(&model.bounds.box_optimum(&model.profit))?,
    };
    let options = SweepOptions {
        method,
        config: SolveConfig { verify: false, ..model.config },
        parallel: a.parallel,
    };
    let points = frontier::sweep(&portfolio, lo, hi, a.steps, &options, backend.as_ref())?;
    let w = create(&a.output)?;
    frontier::write_frontier_csv(&points, w)?;
    let infeasible = points.iter().filter(|p| p.status == PointStatus::Infeasible).count();
    let failed = points
        .iter()
        .filter(|p| matches!(p.status, PointStatus::Failed | PointStatus::IterationLimit))
        .count();
    println!("points: {}", points.len());
    println!("risk range: {} .. {}", sig(lo), sig(hi));
    println!("infeasible: {infeasible}");
    println!("failed: {failed}");
    if failed > 0 {
        return Err(Failure {
            code: exit::SOLVER,
            message: format!("{failed} frontier points did not solve"),
        });
    }
    Ok(())
}

fn parse_grid(s: &str) -> std::result::Result<Vec<(usize, usize)>, Failure> {
    s.split(',')
        .map(|item| {
            let (j, n) = item
                .trim()
                .split_once(['x', 'X'])
                .ok_or_else(|| Failure::usage(format!("grid entry `{item}` is not JxN")))?;
            let parse = |v: &str| {
                v.trim()
                    .replace('_', "")
                    .parse::<usize>()
                    .map_err(|_| Failure::usage(format!("grid entry `{item}` is not JxN")))
            };
            Ok((parse(j)?, parse(n)?))
        })
        .collect()
}

fn cmd_bench(a: BenchArgs) -> CmdResult {
    let mut grid = match &a.grid {
        Some(s) => parse_grid(s)?,
        None => bench::DEFAULT_GRID.to_vec(),
    };
    if a.full {
        grid.extend_from_slice(bench::FULL_GRID_EXTRA);
    }
    let mut config = BenchConfig {
        risk: a.risk.parse()?,
        backend: a.backend.parse()?,
        parallel: a.parallel,
        ..BenchConfig::default()
    }
    .with_env_overrides()?;
    if let Some(b) = &a.memory_budget {
        config.memory_budget = bench::parse_bytes(b)?;
    }
    let report = bench::run_case_study(&grid, a.seed, &config)?;
    print!("{}", report.table());
    if let Some(path) = &a.output {
        report.write_csv(create(path)?)?;
    }
    let failures = report
        .records
        .iter()
        .filter(|r| r.status != "ok")
        .count();
    if failures > 0 {
        return Err(Failure {
            code: exit::SOLVER,
            message: format!("{failures} bench runs failed"),
        });
    }
    Ok(())
}
