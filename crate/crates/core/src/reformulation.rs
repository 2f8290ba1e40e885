//! Dummy-variable LP reformulation of the CVaR constraint.
//!
//! Each tail-mean term `k` with tail size `m_k` gets a threshold `zeta_k` and
//! one excess variable `z_kj` per scenario:
//!
//! ```text
//! z_kj >= -(Yx)_j - zeta_k,   z_kj >= 0,
//! sum_k w_k (zeta_k + (1/m_k) sum_j z_kj) <= R.
//! ```
//!
//! For a single term this has `n + J + 1` variables and `2J + 2n + 1`
//! constraints when box sides and `z >= 0` are counted as rows. The whole
//! problem is one LP solve, which makes it the reference for the
//! cutting-plane method and the baseline it is timed against.

use crate::cutting_plane::{OptimizationResult, Portfolio, PositionBounds, Termination};
use crate::error::{Error, Result};
use crate::lp::{LpBackend, LpProblem, LpSolution, LpStatus, Row, Sense};
use crate::risk::{CvarTerm, TailTerm};
use crate::scenario::{ProfitVector, ScenarioMatrix};
use crate::Method;

/// How the simple bounds `lower <= x <= upper` and `z >= 0` are emitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundMode {
    /// As explicit rows, matching the textbook constraint count.
    Rows,
    /// As variable bounds; same optimum, smaller LP.
    #[default]
    VariableBounds,
}

/// Column layout: `x` first, then for every term `zeta_k` followed by `z_k1..z_kJ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub instruments: usize,
    pub scenarios: usize,
    pub terms: Vec<TailTerm>,
}

impl Layout {
    pub fn x(&self, i: usize) -> usize {
        i
    }

    pub fn zeta(&self, k: usize) -> usize {
        self.instruments + k * (self.scenarios + 1)
    }

    pub fn z(&self, k: usize, j: usize) -> usize {
        self.zeta(k) + 1 + j
    }

    /// `n + sum_k (J + 1)`.
    pub fn variables(&self) -> usize {
        self.instruments + self.terms.len() * (self.scenarios + 1)
    }

    /// `2n + sum_k 2J + 1`, counting every simple bound as a row.
    pub fn counted_rows(&self) -> usize {
        2 * self.instruments + 2 * self.scenarios * self.terms.len() + 1
    }

    /// Blended CVaR expression `sum_k w_k (zeta_k + (1/m_k) sum_j z_kj)` at LP point `v`.
    pub fn risk_expression(&self, v: &[f64]) -> f64 {
        self.terms
            .iter()
            .enumerate()
            .map(|(k, t)| {
                let excess: f64 = (0..self.scenarios).map(|j| v[self.z(k, j)]).sum();
                t.weight * (v[self.zeta(k)] + excess / t.tail_size as f64)
            })
            .sum()
    }

    pub(crate) fn risk_terms(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.terms.iter().enumerate().flat_map(move |(k, t)| {
            let share = t.weight / t.tail_size as f64;
            std::iter::once((self.zeta(k), t.weight))
                .chain((0..self.scenarios).map(move |j| (self.z(k, j), share)))
        })
    }
}

/// Converts `(return period, weight)` terms to tail sizes, checking divisibility.
pub fn tail_terms(scenarios: usize, terms: &[CvarTerm]) -> Result<Vec<TailTerm>> {
    if terms.is_empty() {
        return Err(Error::invalid("at least one CVaR term is required"));
    }
    terms
        .iter()
        .map(|t| {
            if t.return_period == 0 || !scenarios.is_multiple_of(t.return_period) {
                return Err(Error::ReturnPeriod {
                    scenarios,
                    return_period: t.return_period,
                });
            }
            if t.weight.is_nan() || t.weight <= 0.0 || !t.weight.is_finite() {
                return Err(Error::invalid(format!("CVaR weight {} must be positive", t.weight)));
            }
            Ok(TailTerm {
                tail_size: scenarios / t.return_period,
                weight: t.weight,
            })
        })
        .collect()
}

/// The risk part of the model: variables, excess rows and bounds, with a
/// zero objective and no risk row.
pub(crate) fn risk_model(
    y: &ScenarioMatrix,
    bounds: &PositionBounds,
    terms: Vec<TailTerm>,
    mode: BoundMode,
) -> Result<(LpProblem, Layout)> {
    let (j_count, n) = (y.scenarios(), y.instruments());
    if bounds.len() != n {
        return Err(Error::dim(format!("{} bounds for {n} instruments", bounds.len())));
    }
    if terms.iter().any(|t| t.tail_size == 0 || t.tail_size > j_count) {
        return Err(Error::invalid("tail sizes must lie in 1..=J"));
    }
    let layout = Layout {
        instruments: n,
        scenarios: j_count,
        terms,
    };
    let mut lp = LpProblem::maximize(vec![0.0; layout.variables()]);
    for v in 0..layout.variables() {
        lp.set_bounds(v, f64::NEG_INFINITY, f64::INFINITY)?;
    }
    match mode {
        BoundMode::Rows => {
            for i in 0..n {
                lp.add_sparse_row([(layout.x(i), 1.0)], Sense::Le, bounds.upper()[i])?;
            }
            for i in 0..n {
                lp.add_sparse_row([(layout.x(i), 1.0)], Sense::Ge, bounds.lower()[i])?;
            }
        }
        BoundMode::VariableBounds => {
            for i in 0..n {
                lp.set_bounds(layout.x(i), bounds.lower()[i], bounds.upper()[i])?;
            }
        }
    }
    for k in 0..layout.terms.len() {
        // (Yx)_j + zeta_k + z_kj >= 0
        for j in 0..j_count {
            let terms = y
                .row(j)
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(i, v)| (layout.x(i), *v))
                .chain([(layout.zeta(k), 1.0), (layout.z(k, j), 1.0)])
                .collect::<Vec<_>>();
            lp.add_sparse_row(terms, Sense::Ge, 0.0)?;
        }
        match mode {
            BoundMode::Rows => {
                for j in 0..j_count {
                    lp.add_sparse_row([(layout.z(k, j), 1.0)], Sense::Ge, 0.0)?;
                }
            }
            BoundMode::VariableBounds => {
                for j in 0..j_count {
                    lp.set_bounds(layout.z(k, j), 0.0, f64::INFINITY)?;
                }
            }
        }
    }
    Ok((lp, layout))
}

/// A built reformulated LP together with its column layout.
#[derive(Debug, Clone)]
pub struct ReformulatedLp {
    pub problem: LpProblem,
    pub layout: Layout,
    pub target_risk: f64,
    pub mode: BoundMode,
    /// Rows appended by [`ReformulatedLp::with_extra_rows`].
    pub extra_rows: usize,
}

impl ReformulatedLp {
    pub fn variables(&self) -> usize {
        self.problem.num_vars()
    }

    /// Constraint count with every simple bound counted as a row.
    pub fn counted_rows(&self) -> usize {
        self.layout.counted_rows() + self.extra_rows
    }

    /// Appends rows over the position variables.
    pub fn with_extra_rows(mut self, rows: &[Row]) -> Result<Self> {
        for row in rows {
            if row.indices.iter().any(|&i| i >= self.layout.instruments) {
                return Err(Error::dim("extra row references a non-position variable"));
            }
            self.problem.add_sparse_row(
                row.indices.iter().copied().zip(row.values.iter().copied()),
                row.sense,
                row.rhs,
            )?;
            self.extra_rows += 1;
        }
        Ok(self)
    }
}

/// Builds `max p'x` subject to the box and the reformulated risk row.
pub fn build(
    y: &ScenarioMatrix,
    profit: &ProfitVector,
    bounds: &PositionBounds,
    cvar_terms: &[CvarTerm],
    target_risk: f64,
    mode: BoundMode,
) -> Result<ReformulatedLp> {
    build_with_tails(
        y,
        profit,
        bounds,
        tail_terms(y.scenarios(), cvar_terms)?,
        target_risk,
        mode,
    )
}

pub fn build_with_tails(
    y: &ScenarioMatrix,
    profit: &ProfitVector,
    bounds: &PositionBounds,
    tails: Vec<TailTerm>,
    target_risk: f64,
    mode: BoundMode,
) -> Result<ReformulatedLp> {
    if profit.len() != y.instruments() {
        return Err(Error::dim("profit vector does not match instruments"));
    }
    if !target_risk.is_finite() {
        return Err(Error::invalid("target risk must be finite"));
    }
    let (mut problem, layout) = risk_model(y, bounds, tails, mode)?;
    let mut objective = vec![0.0; layout.variables()];
    objective[..layout.instruments].copy_from_slice(profit.as_slice());
    problem.set_objective(objective)?;
    problem.add_sparse_row(layout.risk_terms(), Sense::Le, target_risk)?;
    Ok(ReformulatedLp {
        problem,
        layout,
        target_risk,
        mode,
        extra_rows: 0,
    })
}

/// Result of one reformulated solve, with the raw LP solution attached.
#[derive(Debug, Clone)]
pub struct ReformulatedSolve {
    pub result: OptimizationResult,
    pub lp_solution: LpSolution,
    /// The LP's own CVaR expression at the optimum.
    pub lp_risk: f64,
}

/// Solves a built LP; the achieved risk is recomputed by sorting `Yx*`,
/// independently of the auxiliary variables.
pub fn optimize_reformulated(
    lp: &ReformulatedLp,
    portfolio: &Portfolio<'_>,
    backend: &dyn LpBackend,
) -> Result<ReformulatedSolve> {
    let n = lp.layout.instruments;
    if portfolio.instruments() != n || portfolio.scenarios.scenarios() != lp.layout.scenarios {
        return Err(Error::dim("portfolio does not match the reformulated LP"));
    }
    let solution = backend.solve(&lp.problem);
    let mut result = OptimizationResult {
        method: Method::Reformulation,
        x_star: Vec::new(),
        target_risk: lp.target_risk,
        achieved_risk: f64::NAN,
        profit: f64::NAN,
        iterations: 1,
        cuts: Vec::new(),
        trace: Vec::new(),
        verification: None,
        termination: Termination::Converged,
        duals: Vec::new(),
        lp_variables: lp.variables(),
        lp_rows: lp.counted_rows(),
    };
    match solution.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => {
            result.termination = Termination::InfeasibleTarget;
            return Ok(ReformulatedSolve {
                result,
                lp_solution: solution,
                lp_risk: f64::NAN,
            });
        }
        status => {
            return Err(Error::Solver {
                status,
                context: "reformulated LP".into(),
            })
        }
    }
    let x = solution.x[..n].to_vec();
    result.achieved_risk = portfolio.risk_of(&x)?;
    result.profit = portfolio.profit.dot(&x);
    result.x_star = x;
    result.duals = solution.duals.clone();
    let lp_risk = lp.layout.risk_expression(&solution.x);
    Ok(ReformulatedSolve {
        result,
        lp_solution: solution,
        lp_risk,
    })
}

/// Builds from the portfolio's own risk vector and solves in one step.
pub fn solve(
    portfolio: &Portfolio<'_>,
    target_risk: f64,
    mode: BoundMode,
    backend: &dyn LpBackend,
) -> Result<OptimizationResult> {
    let lp = build_with_tails(
        portfolio.scenarios,
        portfolio.profit,
        portfolio.bounds,
        portfolio.risk.tail_terms(),
        target_risk,
        mode,
    )?
    .with_extra_rows(portfolio.extra_rows)?;
    Ok(optimize_reformulated(&lp, portfolio, backend)?.result)
}
