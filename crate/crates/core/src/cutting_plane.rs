//! Cutting-plane solution of the CVaR-constrained portfolio LP.
//!
//! The risk constraint `mu_r(Yx) <= R` is equivalent to one linear row per
//! permutation of the scenarios. Starting from the box-only relaxation, each
//! iteration solves the current LP, sorts the outcomes of its optimum and,
//! if the achieved risk exceeds the target by more than the tolerance,
//! appends the single row generated by that ordering. Every such row
//! under-estimates `mu_r` and is tight at the iterate that produced it.

use std::collections::HashMap;
use std::io::Write;

use crate::error::{Error, Result};
use crate::lp::{
    duality_report, restart_report, DualityTolerances, LpBackend, LpProblem, LpSolution,
    LpStatus, Row, Sense, VerificationReport,
};
use crate::risk::{cut_coefficients, tail_ordering, RiskVector, TailOrdering};
use crate::scenario::{ProfitVector, ScenarioMatrix};
use crate::Method;

/// Box constraint `lower <= x <= upper` on positions.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionBounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl PositionBounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::dim(format!(
                "{} lower and {} upper bounds",
                lower.len(),
                upper.len()
            )));
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo > hi {
                return Err(Error::invalid(format!(
                    "bounds for instrument {i} must be finite with lower <= upper, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn uniform(n: usize, lower: f64, upper: f64) -> Result<Self> {
        Self::new(vec![lower; n], vec![upper; n])
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.len()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| *v >= lo - tol && *v <= hi + tol)
    }

    /// Maximizer of `p'x` over the box: upper bound where `p_i > 0`, lower
    /// bound otherwise.
    pub fn box_optimum(&self, profit: &ProfitVector) -> Vec<f64> {
        profit
            .as_slice()
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(p, (lo, hi))| if *p > 0.0 { *hi } else { *lo })
            .collect()
    }
}

/// The data shared by every solve of one portfolio problem.
#[derive(Debug, Clone, Copy)]
pub struct Portfolio<'a> {
    pub scenarios: &'a ScenarioMatrix,
    pub profit: &'a ProfitVector,
    pub bounds: &'a PositionBounds,
    pub risk: &'a RiskVector,
    /// Additional linear rows over `x` (e.g. budget or liquidity limits),
    /// present in every LP from the first iteration on.
    pub extra_rows: &'a [Row],
}

impl<'a> Portfolio<'a> {
    pub fn new(
        scenarios: &'a ScenarioMatrix,
        profit: &'a ProfitVector,
        bounds: &'a PositionBounds,
        risk: &'a RiskVector,
    ) -> Result<Self> {
        let n = scenarios.instruments();
        if profit.len() != n || bounds.len() != n {
            return Err(Error::dim(format!(
                "{n} instruments, but {} profits and {} bounds",
                profit.len(),
                bounds.len()
            )));
        }
        if risk.len() != scenarios.scenarios() {
            return Err(Error::dim(format!(
                "{} scenarios, but risk vector of length {}",
                scenarios.scenarios(),
                risk.len()
            )));
        }
        Ok(Self {
            scenarios,
            profit,
            bounds,
            risk,
            extra_rows: &[],
        })
    }

    pub fn with_extra_rows(mut self, rows: &'a [Row]) -> Result<Self> {
        let n = self.instruments();
        for row in rows {
            if row.indices.len() != row.values.len() || row.indices.iter().any(|&i| i >= n) {
                return Err(Error::dim("extra row references a non-position variable"));
            }
        }
        self.extra_rows = rows;
        Ok(self)
    }

    pub fn instruments(&self) -> usize {
        self.scenarios.instruments()
    }

    /// `mu_r(Yx)`.
    pub fn risk_of(&self, x: &[f64]) -> Result<f64> {
        crate::risk::evaluate_risk(self.risk, &self.scenarios.outcome_vector(x)?)
    }

    /// Risk of the unaltered portfolio, `x = 1`.
    pub fn current_risk(&self) -> Result<f64> {
        self.risk_of(&vec![1.0; self.instruments()])
    }

    /// The box-only LP every method starts from.
    pub(crate) fn box_lp(&self) -> Result<LpProblem> {
        let mut lp = LpProblem::with_bounds(
            self.profit.as_slice().to_vec(),
            self.bounds.lower().to_vec(),
            self.bounds.upper().to_vec(),
        )?;
        for row in self.extra_rows {
            lp.add_sparse_row(
                row.indices.iter().copied().zip(row.values.iter().copied()),
                row.sense,
                row.rhs,
            )?;
        }
        Ok(lp)
    }
}

/// One generated row `c'x <= R`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cut {
    pub coefficients: Vec<f64>,
    pub rhs: f64,
    /// Scenarios carrying nonzero risk weight, ascending.
    pub tail_set: Vec<usize>,
    /// LP solve whose optimum produced this cut (1-based).
    pub iteration_born: usize,
    /// Tail scenarios grouped by equal weight; identical keys mean identical rows.
    key: Vec<usize>,
}

impl Cut {
    pub fn from_ordering(
        r: &RiskVector,
        ordering: &TailOrdering,
        y: &ScenarioMatrix,
        rhs: f64,
        iteration_born: usize,
    ) -> Result<Self> {
        let coefficients = cut_coefficients(r, ordering, y)?;
        let tail = r.tail_len();
        let ranked = &ordering.ranked()[..tail];
        let mut tail_set = ranked.to_vec();
        tail_set.sort_unstable();
        let w = &r.weights()[..tail];
        let mut key = Vec::with_capacity(tail + 4);
        let mut start = 0;
        while start < tail {
            let end = (start..tail).find(|&k| w[k] != w[start]).unwrap_or(tail);
            let mut block = ranked[start..end].to_vec();
            block.sort_unstable();
            key.extend(block);
            key.push(usize::MAX);
            start = end;
        }
        Ok(Self {
            coefficients,
            rhs,
            tail_set,
            iteration_born,
            key,
        })
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.coefficients.iter().zip(x).map(|(c, x)| c * x).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveConfig {
    /// Relative risk tolerance.
    pub delta: f64,
    /// Defaults to `10 n + 1000`.
    pub max_iterations: Option<usize>,
    pub verify: bool,
    /// Lower limit on the tolerance scale for targets near zero.
    pub tolerance_floor: f64,
    /// Reuse the previous LP basis when the backend supports it.
    pub warm_start: bool,
    pub duality: DualityTolerances,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            delta: 1e-6,
            max_iterations: None,
            verify: false,
            tolerance_floor: 1e-12,
            warm_start: true,
            duality: DualityTolerances::default(),
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.delta.is_nan() || self.delta <= 0.0 || self.tolerance_floor.is_nan() || self.tolerance_floor < 0.0 {
            return Err(Error::invalid("delta must be positive and tolerance floor non-negative"));
        }
        if self.max_iterations == Some(0) {
            return Err(Error::invalid("max_iterations must be at least 1"));
        }
        Ok(())
    }

    /// Allowed excess `R* - R`: `delta * max(|R|, floor)`.
    pub fn risk_tolerance(&self, target: f64) -> f64 {
        self.delta * target.abs().max(self.tolerance_floor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    IterationLimit,
    InfeasibleTarget,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub iteration: usize,
    pub objective: f64,
    pub achieved_risk: f64,
    /// `R* - R`; cuts are added while this exceeds the tolerance.
    pub violation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub method: Method,
    /// Last LP iterate; empty if no LP was solved to optimality.
    pub x_star: Vec<f64>,
    pub target_risk: f64,
    pub achieved_risk: f64,
    pub profit: f64,
    /// Number of LP solves.
    pub iterations: usize,
    pub cuts: Vec<Cut>,
    pub trace: Vec<TraceEntry>,
    pub verification: Option<VerificationReport>,
    pub termination: Termination,
    /// Row duals of the final LP.
    pub duals: Vec<f64>,
    /// Variables of the final LP.
    pub lp_variables: usize,
    /// Constraints of the final LP, counting each finite box side as a row.
    pub lp_rows: usize,
}

impl OptimizationResult {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }
}

/// Runs the cutting-plane loop for target risk `target`.
pub fn optimize(
    portfolio: &Portfolio<'_>,
    target: f64,
    config: &SolveConfig,
    backend: &dyn LpBackend,
) -> Result<OptimizationResult> {
    config.validate()?;
    if !target.is_finite() {
        return Err(Error::invalid("target risk must be finite"));
    }
    let n = portfolio.instruments();
    let max_iterations = config.max_iterations.unwrap_or(10 * n + 1000);
    let tol = config.risk_tolerance(target);
    let y = portfolio.scenarios;
    let r = portfolio.risk;

    let mut lp = portfolio.box_lp()?;
    let mut basis = None;
    let mut seen: HashMap<Vec<usize>, usize> = HashMap::new();
    let mut result = OptimizationResult {
        method: Method::CuttingPlane,
        x_star: Vec::new(),
        target_risk: target,
        achieved_risk: f64::NAN,
        profit: f64::NAN,
        iterations: 0,
        cuts: Vec::new(),
        trace: Vec::new(),
        verification: None,
        termination: Termination::IterationLimit,
        duals: Vec::new(),
        lp_variables: n,
        lp_rows: 2 * n + portfolio.extra_rows.len(),
    };

    for iteration in 1..=max_iterations {
        let (solution, next_basis) = if config.warm_start {
            backend.solve_warm(&lp, basis.as_ref())
        } else {
            (backend.solve(&lp), None)
        };
        basis = next_basis;
        result.iterations = iteration;
        match solution.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => {
                result.termination = Termination::InfeasibleTarget;
                return Ok(result);
            }
            status => {
                return Err(Error::Solver {
                    status,
                    context: format!("cutting-plane iteration {iteration}"),
                })
            }
        }
        if iteration == 1 && portfolio.extra_rows.is_empty() {
            check_box_solution(portfolio, &solution)?;
        }
        let outcomes = y.outcome_vector(&solution.x)?;
        let ordering = tail_ordering(&outcomes);
        let achieved: f64 = r
            .weights()
            .iter()
            .zip(ordering.ranked())
            .take(r.tail_len())
            .map(|(w, &j)| w * outcomes[j])
            .sum();
        let violation = achieved - target;
        result.trace.push(TraceEntry {
            iteration,
            objective: solution.objective_value,
            achieved_risk: achieved,
            violation,
        });
        result.profit = portfolio.profit.dot(&solution.x);
        result.achieved_risk = achieved;
        result.x_star = solution.x;
        result.duals = solution.duals;
        if violation <= tol {
            result.termination = Termination::Converged;
            if config.verify {
                result.verification = Some(verify(&result, portfolio, config, backend)?);
            }
            return Ok(result);
        }
        let cut = Cut::from_ordering(r, &ordering, y, target, iteration)?;
        if let Some(&previous) = seen.get(&cut.key) {
            return Err(Error::RepeatedCut {
                iteration,
                previous,
                violation,
            });
        }
        seen.insert(cut.key.clone(), iteration);
        lp.add_row(&cut.coefficients, Sense::Le, target)?;
        result.cuts.push(cut);
        result.lp_rows = 2 * n + portfolio.extra_rows.len() + result.cuts.len();
    }
    Ok(result)
}

fn check_box_solution(portfolio: &Portfolio<'_>, solution: &LpSolution) -> Result<()> {
    let expect = portfolio
        .profit
        .dot(&portfolio.bounds.box_optimum(portfolio.profit));
    if (solution.objective_value - expect).abs() > 1e-9 * (1.0 + expect.abs()) {
        return Err(Error::Solver {
            status: LpStatus::NumericalFailure,
            context: format!(
                "box-only LP returned {} but the box optimum is {expect}",
                solution.objective_value
            ),
        });
    }
    Ok(())
}

/// Rebuilds the final relaxed LP of a converged run from its cuts.
pub fn final_lp(result: &OptimizationResult, portfolio: &Portfolio<'_>) -> Result<LpProblem> {
    let mut lp = portfolio.box_lp()?;
    for cut in &result.cuts {
        lp.add_row(&cut.coefficients, Sense::Le, cut.rhs)?;
    }
    Ok(lp)
}

/// Certifies a converged result: LP optimality of `x*` on the final relaxed
/// problem (by duality, or by a cold re-solve when the backend has no duals)
/// plus a from-scratch recomputation of the achieved risk against the
/// termination inequality.
pub fn verify(
    result: &OptimizationResult,
    portfolio: &Portfolio<'_>,
    config: &SolveConfig,
    backend: &dyn LpBackend,
) -> Result<VerificationReport> {
    if result.termination != Termination::Converged || result.method != Method::CuttingPlane {
        return Err(Error::NotVerifiable {
            expected: "converged cutting-plane",
            actual: format!("{:?} {:?}", result.method, result.termination),
        });
    }
    let lp = final_lp(result, portfolio)?;
    let solution = LpSolution {
        status: LpStatus::Optimal,
        x: result.x_star.clone(),
        objective_value: lp.objective_value(&result.x_star),
        duals: result.duals.clone(),
    };
    let mut report = if backend.provides_duals() && solution.duals.len() == lp.num_rows() {
        duality_report(&lp, &solution, &config.duality)?
    } else {
        restart_report(&lp, &solution, backend, &config.duality)?
    };
    let recomputed = portfolio.risk_of(&result.x_star)?;
    report.risk_recheck = Some(recomputed);
    report.verified &= recomputed - result.target_risk <= config.risk_tolerance(result.target_risk);
    Ok(report)
}

pub fn write_trace_csv<W: Write>(trace: &[TraceEntry], out: &mut W) -> std::io::Result<()> {
    writeln!(out, "iteration,objective,achieved_risk,violation")?;
    for t in trace {
        writeln!(
            out,
            "{},{},{},{}",
            t.iteration, t.objective, t.achieved_risk, t.violation
        )?;
    }
    Ok(())
}
