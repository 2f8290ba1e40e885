//! Linear programming contract used by both optimization methods.
//!
//! Problems are always stated as maximization. Rows are stored sparsely so
//! that the reformulated LP (whose auxiliary columns each touch two rows)
//! stays small, while cut rows are simply fully populated.

use std::fmt;
use std::io::Write;

use crate::error::{Error, Result};

mod ipm;
mod simplex;

pub use ipm::InteriorPoint;
pub use simplex::{DenseSimplex, SimplexOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Row {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.indices.iter().zip(&self.values).map(|(&j, a)| a * x[j]).sum()
    }

    /// Sum of `|a_j x_j|`, the magnitude against which row residuals are scaled.
    fn activity_scale(&self, x: &[f64]) -> f64 {
        self.indices
            .iter()
            .zip(&self.values)
            .map(|(&j, a)| (a * x[j]).abs())
            .sum()
    }

    /// Amount by which `x` violates the row (zero when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let act = self.activity(x);
        match self.sense {
            Sense::Le => (act - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - act).max(0.0),
            Sense::Eq => (act - self.rhs).abs(),
        }
    }
}

/// `maximize c'x` subject to sparse rows and per-variable bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    objective: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    rows: Vec<Row>,
}

impl LpProblem {
    /// New maximization problem; every variable starts with bounds `[0, inf)`.
    pub fn maximize(objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            objective,
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
            rows: Vec::new(),
        }
    }

    pub fn with_bounds(objective: Vec<f64>, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let n = objective.len();
        if lower.len() != n || upper.len() != n {
            return Err(Error::dim(format!(
                "{n} variables but {} lower / {} upper bounds",
                lower.len(),
                upper.len()
            )));
        }
        let mut lp = Self::maximize(objective);
        for j in 0..n {
            lp.set_bounds(j, lower[j], upper[j])?;
        }
        Ok(lp)
    }

    pub fn set_objective(&mut self, objective: Vec<f64>) -> Result<()> {
        if objective.len() != self.num_vars() {
            return Err(Error::dim("objective length does not match variables"));
        }
        self.objective = objective;
        Ok(())
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) -> Result<()> {
        if var >= self.num_vars() {
            return Err(Error::dim(format!("variable {var} out of range")));
        }
        if lower.is_nan() || upper.is_nan() || lower > upper || lower == f64::INFINITY
            || upper == f64::NEG_INFINITY
        {
            return Err(Error::invalid(format!(
                "invalid bounds [{lower}, {upper}] for variable {var}"
            )));
        }
        self.lower[var] = lower;
        self.upper[var] = upper;
        Ok(())
    }

    /// Appends a row given as a dense coefficient vector; zeros are dropped.
    pub fn add_row(&mut self, coefficients: &[f64], sense: Sense, rhs: f64) -> Result<usize> {
        if coefficients.len() != self.num_vars() {
            return Err(Error::dim(format!(
                "row has {} coefficients, problem has {} variables",
                coefficients.len(),
                self.num_vars()
            )));
        }
        self.add_sparse_row(
            coefficients
                .iter()
                .enumerate()
                .filter(|(_, a)| **a != 0.0)
                .map(|(j, a)| (j, *a)),
            sense,
            rhs,
        )
    }

    pub fn add_sparse_row(
        &mut self,
        terms: impl IntoIterator<Item = (usize, f64)>,
        sense: Sense,
        rhs: f64,
    ) -> Result<usize> {
        let (indices, values): (Vec<usize>, Vec<f64>) = terms.into_iter().unzip();
        if let Some(j) = indices.iter().find(|&&j| j >= self.num_vars()) {
            return Err(Error::dim(format!("row references variable {j} out of range")));
        }
        if !rhs.is_finite() || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("row contains non-finite numbers"));
        }
        self.rows.push(Row {
            indices,
            values,
            sense,
            rhs,
        });
        Ok(self.rows.len() - 1)
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, x)| c * x).sum()
    }

    /// Largest scaled violation of any row or bound by `x`.
    pub fn primal_residual(&self, x: &[f64]) -> f64 {
        let rows = self
            .rows
            .iter()
            .map(|r| r.violation(x) / (1.0 + r.rhs.abs() + r.activity_scale(x)));
        let bounds = (0..self.num_vars()).map(|j| {
            let below = (self.lower[j] - x[j]).max(0.0) / (1.0 + self.lower[j].abs());
            let above = (x[j] - self.upper[j]).max(0.0) / (1.0 + self.upper[j].abs());
            below.max(above)
        });
        rows.chain(bounds).fold(0.0, f64::max)
    }

    /// Writes the problem in a line-oriented text format for cross-checking
    /// against external solvers:
    ///
    /// ```text
    /// maximize <num_vars> <num_rows>
    /// obj <var> <coef>              (nonzero objective terms)
    /// row <i> <sense> <rhs>         (followed by its terms)
    ///   <var> <coef>
    /// bound <var> <lower> <upper>   (inf / -inf for infinite bounds)
    /// end
    /// ```
    ///
    /// All numbers are fixed point with 12 decimals.
    pub fn write_dump<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        fn num(v: f64) -> String {
            if v == f64::INFINITY {
                "inf".into()
            } else if v == f64::NEG_INFINITY {
                "-inf".into()
            } else {
                format!("{v:.12}")
            }
        }
        writeln!(out, "maximize {} {}", self.num_vars(), self.num_rows())?;
        for (j, c) in self.objective.iter().enumerate().filter(|(_, c)| **c != 0.0) {
            writeln!(out, "obj {j} {}", num(*c))?;
        }
        for (i, row) in self.rows.iter().enumerate() {
            writeln!(out, "row {i} {} {}", row.sense, num(row.rhs))?;
            for (j, a) in row.indices.iter().zip(&row.values) {
                writeln!(out, "  {j} {}", num(*a))?;
            }
        }
        for j in 0..self.num_vars() {
            writeln!(out, "bound {j} {} {}", num(self.lower[j]), num(self.upper[j]))?;
        }
        writeln!(out, "end")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective_value: f64,
    /// One multiplier per row in the maximization convention: `>= 0` for
    /// `<=` rows, `<= 0` for `>=` rows. Only meaningful when optimal.
    pub duals: Vec<f64>,
}

impl LpSolution {
    pub(crate) fn failed(status: LpStatus, problem: &LpProblem) -> Self {
        Self {
            status,
            x: vec![0.0; problem.num_vars()],
            objective_value: f64::NAN,
            duals: Vec::new(),
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// Basis information carried from one solve to the next after rows are
/// appended. Opaque outside the backend that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct WarmStart {
    pub(crate) structural: Vec<BasisStatus>,
    pub(crate) slack: Vec<BasisStatus>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum BasisStatus {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable held at zero.
    Zero,
}

/// Anything that can solve an [`LpProblem`].
pub trait LpBackend: Sync {
    fn name(&self) -> &'static str;

    fn solve(&self, problem: &LpProblem) -> LpSolution;

    /// Whether optimal solutions carry row duals usable by [`duality_report`].
    fn provides_duals(&self) -> bool {
        true
    }

    /// Solve reusing a previous basis. Backends without warm starts ignore
    /// the hint; results must agree with [`LpBackend::solve`] up to tolerance.
    fn solve_warm(
        &self,
        problem: &LpProblem,
        _start: Option<&WarmStart>,
    ) -> (LpSolution, Option<WarmStart>) {
        (self.solve(problem), None)
    }
}

/// Backend selector used by configuration and the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BackendKind {
    #[default]
    Simplex,
    InteriorPoint,
}

impl BackendKind {
    pub fn backend(self) -> Box<dyn LpBackend + Send> {
        match self {
            BackendKind::Simplex => Box::new(DenseSimplex::default()),
            BackendKind::InteriorPoint => Box::new(InteriorPoint::default()),
        }
    }
}

impl std::str::FromStr for BackendKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "simplex" => Ok(BackendKind::Simplex),
            "ipm" | "interior-point" => Ok(BackendKind::InteriorPoint),
            other => Err(Error::invalid(format!("unknown backend {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualityTolerances {
    /// Bound on scaled primal and dual residuals.
    pub feasibility: f64,
    /// Bound on the gap and on complementary slackness, relative to `1 + |obj|`.
    pub gap_relative: f64,
}

impl Default for DualityTolerances {
    fn default() -> Self {
        Self {
            feasibility: 1e-9,
            gap_relative: 1e-7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerificationMethod {
    /// Dual multipliers checked for feasibility and a zero duality gap.
    Duality,
    /// Primal feasibility plus agreement with an independent cold re-solve.
    Restart,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub method: VerificationMethod,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub duality_gap: f64,
    pub complementary_slackness: f64,
    /// Achieved risk recomputed from scratch, when the caller checks it.
    pub risk_recheck: Option<f64>,
    pub verified: bool,
}

/// Checks an optimal solution against LP duality: primal and dual
/// feasibility, the duality gap and complementary slackness.
///
/// With row multipliers `y` the reduced costs are `d = c - A'y`; the dual
/// objective is `b'y + sum_j (u_j d_j if d_j > 0, l_j d_j if d_j < 0)`.
pub fn duality_report(
    problem: &LpProblem,
    solution: &LpSolution,
    tol: &DualityTolerances,
) -> Result<VerificationReport> {
    if solution.status != LpStatus::Optimal {
        return Err(Error::NotVerifiable {
            expected: "optimal",
            actual: format!("{:?}", solution.status),
        });
    }
    let n = problem.num_vars();
    if solution.x.len() != n || solution.duals.len() != problem.num_rows() {
        return Err(Error::dim("solution does not match problem dimensions"));
    }
    let x = &solution.x;
    let y = &solution.duals;
    let c = problem.objective();
    let c_scale = 1.0 + c.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    let mut reduced = c.to_vec();
    let mut reduced_scale: Vec<f64> = c.iter().map(|v| 1.0 + v.abs()).collect();
    let mut dual_residual = 0.0f64;
    let mut dual_objective = 0.0;
    let mut slackness = 0.0;
    for (row, &yi) in problem.rows().iter().zip(y) {
        let sign_violation = match row.sense {
            Sense::Le => (-yi).max(0.0),
            Sense::Ge => yi.max(0.0),
            Sense::Eq => 0.0,
        };
        dual_residual = dual_residual.max(sign_violation / c_scale);
        for (&j, a) in row.indices.iter().zip(&row.values) {
            reduced[j] -= yi * a;
            reduced_scale[j] += (yi * a).abs();
        }
        dual_objective += row.rhs * yi;
        slackness += (yi * (row.rhs - row.activity(x))).abs();
    }
    for j in 0..n {
        let d = reduced[j];
        let (lo, hi) = (problem.lower()[j], problem.upper()[j]);
        if d > 0.0 {
            if hi.is_finite() {
                dual_objective += hi * d;
                slackness += d * (hi - x[j]).abs();
            } else {
                dual_residual = dual_residual.max(d / reduced_scale[j]);
            }
        } else if d < 0.0 {
            if lo.is_finite() {
                dual_objective += lo * d;
                slackness += -d * (x[j] - lo).abs();
            } else {
                dual_residual = dual_residual.max(-d / reduced_scale[j]);
            }
        }
    }
    let primal_objective = problem.objective_value(x);
    let primal_residual = problem.primal_residual(x);
    let duality_gap = (primal_objective - dual_objective).abs();
    let gap_tol = tol.gap_relative * (1.0 + primal_objective.abs());
    let verified = primal_residual <= tol.feasibility
        && dual_residual <= tol.feasibility
        && duality_gap <= gap_tol
        && slackness <= gap_tol;
    Ok(VerificationReport {
        method: VerificationMethod::Duality,
        primal_residual,
        dual_residual,
        primal_objective,
        dual_objective,
        duality_gap,
        complementary_slackness: slackness,
        risk_recheck: None,
        verified,
    })
}

/// Verification for backends without duals: the solution must be primal
/// feasible and match a cold re-solve within `1e-7` relative.
pub fn restart_report(
    problem: &LpProblem,
    solution: &LpSolution,
    backend: &dyn LpBackend,
    tol: &DualityTolerances,
) -> Result<VerificationReport> {
    if solution.status != LpStatus::Optimal {
        return Err(Error::NotVerifiable {
            expected: "optimal",
            actual: format!("{:?}", solution.status),
        });
    }
    let fresh = backend.solve(problem);
    let primal_objective = problem.objective_value(&solution.x);
    let primal_residual = problem.primal_residual(&solution.x);
    let (dual_objective, verified) = if fresh.is_optimal() {
        let gap = (primal_objective - fresh.objective_value).abs();
        (
            fresh.objective_value,
            primal_residual <= tol.feasibility && gap <= 1e-7 * (1.0 + primal_objective.abs()),
        )
    } else {
        (f64::NAN, false)
    };
    Ok(VerificationReport {
        method: VerificationMethod::Restart,
        primal_residual,
        dual_residual: 0.0,
        primal_objective,
        dual_objective,
        duality_gap: (primal_objective - dual_objective).abs(),
        complementary_slackness: 0.0,
        risk_recheck: None,
        verified,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn box_lp() -> LpProblem {
        LpProblem::with_bounds(vec![1.0], vec![0.0], vec![1.0]).unwrap()
    }

    #[test]
    fn add_row_checks_dimension() {
        let mut lp = box_lp();
        assert!(lp.add_row(&[1.0, 2.0], Sense::Le, 1.0).is_err());
        assert_eq!(lp.add_row(&[1.0], Sense::Le, 1.0).unwrap(), 0);
        assert_eq!(lp.num_rows(), 1);
    }

    #[test]
    fn rejects_crossed_bounds() {
        assert!(LpProblem::with_bounds(vec![1.0], vec![2.0], vec![1.0]).is_err());
    }

    #[test]
    fn report_refuses_non_optimal() {
        let lp = box_lp();
        let sol = LpSolution::failed(LpStatus::Infeasible, &lp);
        assert!(duality_report(&lp, &sol, &DualityTolerances::default()).is_err());
    }

    #[test]
    fn dump_format() {
        let mut lp = LpProblem::maximize(vec![1.0, 0.0]);
        lp.add_row(&[1.0, 1.0], Sense::Le, 2.0).unwrap();
        let mut out = Vec::new();
        lp.write_dump(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(
            text,
            "maximize 2 1\nobj 0 1.000000000000\nrow 0 <= 2.000000000000\n  0 1.000000000000\n  \
             1 1.000000000000\nbound 0 0.000000000000 inf\nbound 1 0.000000000000 inf\nend\n"
        );
    }
}
