//! Efficient frontier: minimum achievable risk and target-risk sweeps.

use std::io::Write;

use rayon::prelude::*;

use crate::cutting_plane::{Portfolio, PositionBounds, SolveConfig, Termination};
use crate::error::{Error, Result};
use crate::lp::{LpBackend, LpProblem, LpStatus};
use crate::reformulation::{risk_model, BoundMode, Layout};
use crate::risk::RiskVector;
use crate::scenario::ScenarioMatrix;
use crate::Method;

/// The risk-minimizing LP over the box, as `max -(blended CVaR expression)`.
pub fn min_risk_lp(
    y: &ScenarioMatrix,
    bounds: &PositionBounds,
    r: &RiskVector,
) -> Result<(LpProblem, Layout)> {
    if r.len() != y.scenarios() {
        return Err(Error::dim(format!(
            "risk vector has {} entries for {} scenarios",
            r.len(),
            y.scenarios()
        )));
    }
    let (mut lp, layout) = risk_model(y, bounds, r.tail_terms(), BoundMode::VariableBounds)?;
    let mut objective = vec![0.0; layout.variables()];
    for (v, c) in layout.risk_terms() {
        objective[v] = -c;
    }
    lp.set_objective(objective)?;
    Ok((lp, layout))
}

/// Minimum of `mu_r(Yx)` over the box, together with a minimizer.
#[derive(Debug, Clone)]
pub struct MinRisk {
    pub risk: f64,
    pub x: Vec<f64>,
}

pub fn min_achievable_risk(
    y: &ScenarioMatrix,
    bounds: &PositionBounds,
    r: &RiskVector,
    backend: &dyn LpBackend,
) -> Result<MinRisk> {
    let (lp, layout) = min_risk_lp(y, bounds, r)?;
    let solution = backend.solve(&lp);
    if solution.status != LpStatus::Optimal {
        return Err(Error::Solver {
            status: solution.status,
            context: "minimum-risk LP".into(),
        });
    }
    let x = solution.x[..layout.instruments].to_vec();
    // The LP value is exact at its optimum; report the sorted evaluation of
    // the minimizer, which agrees up to solver tolerance.
    let risk = crate::risk::evaluate_risk(r, &y.outcome_vector(&x)?)?;
    Ok(MinRisk { risk, x })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointStatus {
    Optimal,
    Infeasible,
    IterationLimit,
    Failed,
}

impl PointStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            PointStatus::Optimal => "optimal",
            PointStatus::Infeasible => "infeasible",
            PointStatus::IterationLimit => "iteration_limit",
            PointStatus::Failed => "failed",
        }
    }
}

/// One point `(R', f(R'))` of the frontier.
#[derive(Debug, Clone)]
pub struct FrontierPoint {
    pub target_risk: f64,
    /// `None` when the point was not solved to optimality.
    pub profit: Option<f64>,
    pub achieved_risk: f64,
    pub iterations: usize,
    pub method: Method,
    pub status: PointStatus,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub method: Method,
    pub config: SolveConfig,
    /// Solve points on the rayon pool; output order is unaffected.
    pub parallel: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            method: Method::CuttingPlane,
            config: SolveConfig {
                verify: false,
                ..SolveConfig::default()
            },
            parallel: false,
        }
    }
}

/// `steps` evenly spaced targets from `lo` to `hi` inclusive.
pub fn targets(lo: f64, hi: f64, steps: usize) -> Result<Vec<f64>> {
    if steps < 2 {
        return Err(Error::invalid("a sweep needs at least 2 steps"));
    }
    if !(lo.is_finite() && hi.is_finite()) || hi < lo {
        return Err(Error::invalid(format!("bad risk range [{lo}, {hi}]")));
    }
    let span = hi - lo;
    Ok((0..steps)
        .map(|i| if i + 1 == steps { hi } else { lo + span * i as f64 / (steps - 1) as f64 })
        .collect())
}

/// Solves one frontier point; solver trouble is recorded, not raised.
pub fn solve_point(
    portfolio: &Portfolio<'_>,
    target: f64,
    options: &SweepOptions,
    backend: &dyn LpBackend,
) -> FrontierPoint {
    let mut point = FrontierPoint {
        target_risk: target,
        profit: None,
        achieved_risk: f64::NAN,
        iterations: 0,
        method: options.method,
        status: PointStatus::Failed,
        x: Vec::new(),
    };
    match crate::solve(options.method, portfolio, target, &options.config, backend) {
        Ok(res) => {
            point.iterations = res.iterations;
            point.achieved_risk = res.achieved_risk;
            point.status = match res.termination {
                Termination::Converged => PointStatus::Optimal,
                Termination::InfeasibleTarget => PointStatus::Infeasible,
                Termination::IterationLimit => PointStatus::IterationLimit,
            };
            if point.status == PointStatus::Optimal {
                point.profit = Some(res.profit);
            }
            point.x = res.x_star;
        }
        Err(_) => point.status = PointStatus::Failed,
    }
    point
}

/// Solves every target independently (cold start); output follows `targets`.
pub fn sweep_targets(
    portfolio: &Portfolio<'_>,
    targets: &[f64],
    options: &SweepOptions,
    backend: &dyn LpBackend,
) -> Vec<FrontierPoint> {
    if options.parallel {
        targets
            .par_iter()
            .map(|&t| solve_point(portfolio, t, options, backend))
            .collect()
    } else {
        targets
            .iter()
            .map(|&t| solve_point(portfolio, t, options, backend))
            .collect()
    }
}

pub fn sweep(
    portfolio: &Portfolio<'_>,
    lo: f64,
    hi: f64,
    steps: usize,
    options: &SweepOptions,
    backend: &dyn LpBackend,
) -> Result<Vec<FrontierPoint>> {
    Ok(sweep_targets(portfolio, &targets(lo, hi, steps)?, options, backend))
}

pub fn write_frontier_csv<W: Write>(points: &[FrontierPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "target_risk",
        "profit",
        "achieved_risk",
        "iterations",
        "method",
        "status",
    ])?;
    for p in points {
        w.write_record([
            p.target_risk.to_string(),
            p.profit.map(|v| v.to_string()).unwrap_or_default(),
            if p.achieved_risk.is_nan() { String::new() } else { p.achieved_risk.to_string() },
            p.iterations.to_string(),
            p.method.to_string(),
            p.status.as_str().to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::DenseSimplex;
    use crate::risk::make_cvar_vector;
    use ndarray::{array, Array2};

    #[test]
    fn singleton_box_gives_current_risk() {
        let y = ScenarioMatrix::from_values(array![[1.0, -2.0], [3.0, 0.5], [-4.0, 1.0], [2.0, 2.0]])
            .unwrap();
        let r = make_cvar_vector(4, 2).unwrap();
        let b = PositionBounds::uniform(2, 1.0, 1.0).unwrap();
        let d = min_achievable_risk(&y, &b, &r, &DenseSimplex::default()).unwrap();
        let direct = crate::risk::evaluate_risk(&r, &y.outcome_vector(&[1.0, 1.0]).unwrap()).unwrap();
        assert!((d.risk - direct).abs() < 1e-12);
    }

    #[test]
    fn identity_minimum_at_upper_corner() {
        // mu = -min(x1, x2) here, so the minimum sits at the top corner.
        let y = ScenarioMatrix::from_values(Array2::eye(2)).unwrap();
        let r = RiskVector::new(vec![-1.0, 0.0], "worst").unwrap();
        let b = PositionBounds::uniform(2, 0.0, 1.0).unwrap();
        let d = min_achievable_risk(&y, &b, &r, &DenseSimplex::default()).unwrap();
        assert!((d.risk + 1.0).abs() < 1e-12);
        assert!(d.x.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn targets_are_even_and_inclusive() {
        let t = targets(1.0, 2.0, 5).unwrap();
        assert_eq!(t, vec![1.0, 1.25, 1.5, 1.75, 2.0]);
        assert!(targets(1.0, 2.0, 1).is_err());
        assert!(targets(2.0, 1.0, 3).is_err());
    }
}
