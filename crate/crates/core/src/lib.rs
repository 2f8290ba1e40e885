//! Portfolio optimization under spectral (CVaR-type) risk constraints.
//!
//! Two solution routes share one data model: an iterative cutting-plane
//! method over a small LP, and a single large LP with auxiliary variables.

pub mod bench;
pub mod cutting_plane;
pub mod error;
pub mod frontier;
pub mod lp;
pub mod reformulation;
pub mod risk;
pub mod scenario;

use std::fmt;
use std::str::FromStr;

pub use cutting_plane::{
    optimize, OptimizationResult, Portfolio, PositionBounds, SolveConfig, Termination,
};
pub use error::{Error, Result};
pub use lp::{BackendKind, LpBackend};
pub use reformulation::BoundMode;
pub use risk::{evaluate_risk, make_cvar_vector, RiskSpec, RiskVector};
pub use scenario::{GeneratorSpec, ProfitVector, ScenarioMatrix};

/// Solution route.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Method {
    #[default]
    CuttingPlane,
    Reformulation,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::CuttingPlane => "cutting-plane",
            Method::Reformulation => "reformulation",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cutting-plane" | "cutting_plane" | "cp" | "b" => Ok(Method::CuttingPlane),
            "reformulation" | "lp" | "a" => Ok(Method::Reformulation),
            other => Err(Error::invalid(format!("unknown method `{other}`"))),
        }
    }
}

/// Solves with either route. The reformulation ignores `config` except for
/// `verify`, in which case the duality report of the single LP is attached.
pub fn solve(
    method: Method,
    portfolio: &Portfolio<'_>,
    target_risk: f64,
    config: &SolveConfig,
    backend: &dyn LpBackend,
) -> Result<OptimizationResult> {
    match method {
        Method::CuttingPlane => optimize(portfolio, target_risk, config, backend),
        Method::Reformulation => {
            let lp = reformulation::build_with_tails(
                portfolio.scenarios,
                portfolio.profit,
                portfolio.bounds,
                portfolio.risk.tail_terms(),
                target_risk,
                BoundMode::VariableBounds,
            )?
            .with_extra_rows(portfolio.extra_rows)?;
            let mut solved = reformulation::optimize_reformulated(&lp, portfolio, backend)?;
            if config.verify && solved.result.converged() && backend.provides_duals() {
                let mut report =
                    lp::duality_report(&lp.problem, &solved.lp_solution, &config.duality)?;
                let achieved = solved.result.achieved_risk;
                report.risk_recheck = Some(achieved);
                report.verified &= achieved - target_risk <= config.risk_tolerance(target_risk);
                solved.result.verification = Some(report);
            }
            Ok(solved.result)
        }
    }
}
