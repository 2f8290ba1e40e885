//! Case-study harness: both methods on generated instances, with counts and timings.

use std::fmt::Write as _;
use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;

use crate::cutting_plane::{Portfolio, PositionBounds, SolveConfig, Termination};
use crate::error::{Error, Result};
use crate::lp::BackendKind;
use crate::risk::{evaluate_risk, RiskSpec};
use crate::scenario::{generate_synthetic, GeneratorSpec};
use crate::Method;

/// Environment variable overriding [`BenchConfig::memory_budget`], in bytes
/// (suffixes `K`, `M`, `G` accepted).
pub const MEMORY_BUDGET_ENV: &str = "CVARCUT_MEMORY_BUDGET";

pub const DEFAULT_MEMORY_BUDGET: u64 = 2 << 30;

/// Benchmark instances that run in seconds to minutes.
pub const DEFAULT_GRID: &[(usize, usize)] = &[
    (1_000, 100),
    (2_000, 100),
    (5_000, 100),
    (10_000, 100),
    (1_000, 200),
    (10_000, 200),
];

/// The two large instances.
pub const FULL_GRID_EXTRA: &[(usize, usize)] = &[(100_000, 500), (1_000_000, 1_000)];

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub risk: RiskSpec,
    pub lower: f64,
    pub upper: f64,
    pub factors: usize,
    pub backend: BackendKind,
    pub solve: SolveConfig,
    /// Bytes allowed for `Y`; larger instances are skipped.
    pub memory_budget: u64,
    /// Run instances concurrently; timings are then marked non-comparable.
    pub parallel: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            risk: "100:1".parse().expect("valid risk spec"),
            lower: 0.5,
            upper: 1.5,
            factors: 100,
            backend: BackendKind::InteriorPoint,
            solve: SolveConfig {
                verify: false,
                ..SolveConfig::default()
            },
            memory_budget: DEFAULT_MEMORY_BUDGET,
            parallel: false,
        }
    }
}

impl BenchConfig {
    /// Applies [`MEMORY_BUDGET_ENV`] if set.
    pub fn with_env_overrides(mut self) -> Result<Self> {
        if let Ok(v) = std::env::var(MEMORY_BUDGET_ENV) {
            self.memory_budget = parse_bytes(&v)?;
        }
        Ok(self)
    }
}

pub fn parse_bytes(s: &str) -> Result<u64> {
    let s = s.trim();
    let (digits, mult) = match s.chars().last().map(|c| c.to_ascii_uppercase()) {
        Some('K') => (&s[..s.len() - 1], 1u64 << 10),
        Some('M') => (&s[..s.len() - 1], 1 << 20),
        Some('G') => (&s[..s.len() - 1], 1 << 30),
        _ => (s, 1),
    };
    digits
        .trim()
        .parse::<u64>()
        .ok()
        .and_then(|v| v.checked_mul(mult))
        .ok_or_else(|| Error::invalid(format!("bad memory size `{s}`")))
}

#[derive(Debug, Clone)]
pub struct BenchRecord {
    pub scenarios: usize,
    pub instruments: usize,
    pub method: Method,
    pub variables: usize,
    pub rows: usize,
    /// LP solves for the reformulation (always 1), cuts added for the cutting plane.
    pub iterations: usize,
    pub wall_time: f64,
    pub objective: f64,
    pub achieved_risk: f64,
    pub target_risk: f64,
    pub status: String,
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub records: Vec<BenchRecord>,
    pub notes: Vec<String>,
    pub backend: String,
    pub threads: usize,
    pub comparable_timings: bool,
}

impl BenchReport {
    /// Reformulation time over cutting-plane time, per instance.
    pub fn speedups(&self) -> Vec<((usize, usize), f64)> {
        let mut out = Vec::new();
        for a in self.records.iter().filter(|r| r.method == Method::Reformulation) {
            if let Some(b) = self.records.iter().find(|r| {
                r.method == Method::CuttingPlane
                    && r.scenarios == a.scenarios
                    && r.instruments == a.instruments
            }) {
                if a.status == "ok" && b.status == "ok" && b.wall_time > 0.0 {
                    out.push(((a.scenarios, a.instruments), a.wall_time / b.wall_time));
                }
            }
        }
        out
    }

    /// Soft check that speedup grows with `J` at fixed `n`; returns warnings only.
    pub fn trend_warnings(&self) -> Vec<String> {
        let speedups = self.speedups();
        let mut ns: Vec<usize> = speedups.iter().map(|((_, n), _)| *n).collect();
        ns.sort_unstable();
        ns.dedup();
        let mut warnings = Vec::new();
        for n in ns {
            let mut row: Vec<_> = speedups.iter().filter(|((_, m), _)| *m == n).collect();
            row.sort_by_key(|((j, _), _)| *j);
            if let (Some(first), Some(last)) = (row.first(), row.last()) {
                if row.len() > 1 && last.1 < first.1 {
                    warnings.push(format!(
                        "warning: speedup at n={n} falls from {:.2} (J={}) to {:.2} (J={})",
                        first.1, first.0 .0, last.1, last.0 .0
                    ));
                }
            }
        }
        warnings
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "scenarios",
            "instruments",
            "method",
            "variables",
            "rows",
            "iterations",
            "wall_time",
            "objective",
            "achieved_risk",
            "target_risk",
            "status",
        ])?;
        for r in &self.records {
            w.write_record([
                r.scenarios.to_string(),
                r.instruments.to_string(),
                r.method.to_string(),
                r.variables.to_string(),
                r.rows.to_string(),
                r.iterations.to_string(),
                r.wall_time.to_string(),
                r.objective.to_string(),
                r.achieved_risk.to_string(),
                r.target_risk.to_string(),
                r.status.clone(),
            ])?;
        }
        w.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }

    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "backend: {}  threads: {}{}",
            self.backend,
            self.threads,
            if self.comparable_timings { "" } else { "  (parallel run, timings not comparable)" }
        );
        let _ = writeln!(
            s,
            "{:>9} {:>6} {:>14} {:>10} {:>10} {:>6} {:>10} {:>16} {:>16}  status",
            "J", "n", "method", "variables", "rows", "iter", "time_s", "objective", "risk"
        );
        for r in &self.records {
            let _ = writeln!(
                s,
                "{:>9} {:>6} {:>14} {:>10} {:>10} {:>6} {:>10.4} {:>16.10} {:>16.10}  {}",
                r.scenarios,
                r.instruments,
                r.method.to_string(),
                r.variables,
                r.rows,
                r.iterations,
                r.wall_time,
                r.objective,
                r.achieved_risk,
                r.status
            );
        }
        let speedups = self.speedups();
        if !speedups.is_empty() {
            let _ = writeln!(s, "\nspeedup (reformulation time / cutting-plane time)");
            for ((j, n), f) in speedups {
                let _ = writeln!(s, "{j:>9} {n:>6} {f:>10.2}");
            }
        }
        for note in self.notes.iter().chain(&self.trend_warnings()) {
            let _ = writeln!(s, "{note}");
        }
        s
    }
}

struct InstanceOutcome {
    records: Vec<BenchRecord>,
    notes: Vec<String>,
}

fn failed(j: usize, n: usize, method: Method, msg: String) -> BenchRecord {
    BenchRecord {
        scenarios: j,
        instruments: n,
        method,
        variables: 0,
        rows: 0,
        iterations: 0,
        wall_time: f64::NAN,
        objective: f64::NAN,
        achieved_risk: f64::NAN,
        target_risk: f64::NAN,
        status: msg,
    }
}

fn run_instance(j: usize, n: usize, seed: u64, config: &BenchConfig) -> InstanceOutcome {
    let mut notes = Vec::new();
    let bytes = (j as u64).saturating_mul(n as u64).saturating_mul(8);
    if bytes > config.memory_budget {
        notes.push(format!(
            "skipped J={j} n={n}: scenario matrix needs {bytes} bytes, budget {} (set {MEMORY_BUDGET_ENV})",
            config.memory_budget
        ));
        return InstanceOutcome {
            records: Vec::new(),
            notes,
        };
    }
    let prepared = (|| -> Result<_> {
        let y = generate_synthetic(&GeneratorSpec::new(j, n, seed).with_factors(config.factors))?;
        let r = config.risk.risk_vector(j)?;
        let p = y.column_means();
        let bounds = PositionBounds::uniform(n, config.lower, config.upper)?;
        let target = evaluate_risk(&r, &y.outcome_vector(&vec![1.0; n])?)?;
        Ok((y, r, p, bounds, target))
    })();
    let (y, r, p, bounds, target) = match prepared {
        Ok(v) => v,
        Err(e) => {
            let msg = format!("error: {e}");
            return InstanceOutcome {
                records: vec![
                    failed(j, n, Method::Reformulation, msg.clone()),
                    failed(j, n, Method::CuttingPlane, msg),
                ],
                notes,
            };
        }
    };
    let portfolio = match Portfolio::new(&y, &p, &bounds, &r) {
        Ok(p) => p,
        Err(e) => {
            let msg = format!("error: {e}");
            return InstanceOutcome {
                records: vec![
                    failed(j, n, Method::Reformulation, msg.clone()),
                    failed(j, n, Method::CuttingPlane, msg),
                ],
                notes,
            };
        }
    };
    let backend = config.backend.backend();
    let mut records = Vec::new();
    for method in [Method::Reformulation, Method::CuttingPlane] {
        let start = Instant::now();
        let outcome = crate::solve(method, &portfolio, target, &config.solve, backend.as_ref());
        let wall_time = start.elapsed().as_secs_f64();
        records.push(match outcome {
            Ok(res) => BenchRecord {
                scenarios: j,
                instruments: n,
                method,
                variables: res.lp_variables,
                rows: res.lp_rows,
                iterations: match method {
                    Method::Reformulation => res.iterations,
                    Method::CuttingPlane => res.cuts.len(),
                },
                wall_time,
                objective: res.profit,
                achieved_risk: res.achieved_risk,
                target_risk: target,
                status: match res.termination {
                    Termination::Converged => "ok".into(),
                    Termination::IterationLimit => "iteration_limit".into(),
                    Termination::InfeasibleTarget => "infeasible".into(),
                },
            },
            Err(e) => failed(j, n, method, format!("error: {e}")),
        });
    }
    if let [a, b] = &records[..] {
        if a.status == "ok" && b.status == "ok" {
            let rel = (a.objective - b.objective).abs() / a.objective.abs().max(1.0);
            if rel > 1e-6 {
                notes.push(format!(
                    "J={j} n={n}: objectives differ by {rel:.3e} relative ({} vs {})",
                    a.objective, b.objective
                ));
            }
        }
    }
    InstanceOutcome { records, notes }
}

/// Runs both methods over `grid`. Per-instance failures are recorded in the
/// report; only an empty grid is an error.
pub fn run_case_study(grid: &[(usize, usize)], seed: u64, config: &BenchConfig) -> Result<BenchReport> {
    if grid.is_empty() {
        return Err(Error::invalid("bench grid is empty"));
    }
    let outcomes: Vec<InstanceOutcome> = if config.parallel {
        grid.par_iter()
            .map(|&(j, n)| run_instance(j, n, seed, config))
            .collect()
    } else {
        grid.iter()
            .map(|&(j, n)| run_instance(j, n, seed, config))
            .collect()
    };
    let mut report = BenchReport {
        records: Vec::new(),
        notes: Vec::new(),
        backend: config.backend.backend().name().to_string(),
        threads: if config.parallel { rayon::current_num_threads() } else { 1 },
        comparable_timings: !config.parallel,
    };
    for o in outcomes {
        report.records.extend(o.records);
        report.notes.extend(o.notes);
    }
    Ok(report)
}
