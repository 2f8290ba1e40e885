//! Sparse interior-point backend on top of the Clarabel conic solver.
//!
//! Used for the reformulated LP at sizes where a dense basis inverse no
//! longer fits. Solutions are interior-point accurate (not vertices) and are
//! clipped onto the variable bounds on return.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

use super::{LpBackend, LpProblem, LpSolution, LpStatus, Sense};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InteriorPoint {
    pub tolerance: f64,
    pub max_iterations: u32,
}

impl Default for InteriorPoint {
    fn default() -> Self {
        Self {
            tolerance: 1e-9,
            max_iterations: 200,
        }
    }
}

impl LpBackend for InteriorPoint {
    fn name(&self) -> &'static str {
        "clarabel-ipm"
    }

    fn solve(&self, problem: &LpProblem) -> LpSolution {
        let n = problem.num_vars();
        let (mut ti, mut tj, mut tv) = (Vec::new(), Vec::new(), Vec::new());
        let mut b = Vec::new();
        // (original row, sign) for every conic row that carries a row dual.
        let mut origin: Vec<(usize, f64)> = Vec::new();
        let mut push_row = |terms: &mut dyn Iterator<Item = (usize, f64)>, rhs: f64| {
            let r = b.len();
            for (j, a) in terms {
                ti.push(r);
                tj.push(j);
                tv.push(a);
            }
            b.push(rhs);
        };
        let rows = problem.rows();
        let equalities: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].sense == Sense::Eq).collect();
        for &i in &equalities {
            let row = &rows[i];
            push_row(&mut row.indices.iter().copied().zip(row.values.iter().copied()), row.rhs);
            origin.push((i, 1.0));
        }
        for (i, row) in rows.iter().enumerate() {
            let sign = match row.sense {
                Sense::Le => 1.0,
                Sense::Ge => -1.0,
                Sense::Eq => continue,
            };
            push_row(
                &mut row.indices.iter().copied().zip(row.values.iter().map(|a| sign * a)),
                sign * row.rhs,
            );
            origin.push((i, sign));
        }
        for j in 0..n {
            if problem.upper()[j].is_finite() {
                push_row(&mut std::iter::once((j, 1.0)), problem.upper()[j]);
            }
            if problem.lower()[j].is_finite() {
                push_row(&mut std::iter::once((j, -1.0)), -problem.lower()[j]);
            }
        }
        let m = b.len();
        let a = CscMatrix::new_from_triplets(m, n, ti, tj, tv);
        let p = CscMatrix::<f64>::zeros((n, n));
        let q: Vec<f64> = problem.objective().iter().map(|c| -c).collect();
        let mut cones = Vec::new();
        if !equalities.is_empty() {
            cones.push(SupportedConeT::ZeroConeT(equalities.len()));
        }
        if m > equalities.len() {
            cones.push(SupportedConeT::NonnegativeConeT(m - equalities.len()));
        }
        let settings = DefaultSettingsBuilder::default()
            .verbose(std::env::var("IPM_VERBOSE").is_ok())
            .max_iter(self.max_iterations)
            .tol_gap_abs(self.tolerance)
            .tol_gap_rel(self.tolerance)
            .tol_feas(self.tolerance)
            .build()
            .expect("valid clarabel settings");
        let Ok(mut solver) = DefaultSolver::new(&p, &q, &a, &b, &cones, settings) else {
            return LpSolution::failed(LpStatus::NumericalFailure, problem);
        };
        solver.solve();
        let sol = &solver.solution;
        let status = match sol.status {
            SolverStatus::Solved => LpStatus::Optimal,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
                LpStatus::Infeasible
            }
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => {
                LpStatus::Unbounded
            }
            SolverStatus::MaxIterations | SolverStatus::MaxTime => LpStatus::IterationLimit,
            _ => LpStatus::NumericalFailure,
        };
        if status != LpStatus::Optimal {
            return LpSolution::failed(status, problem);
        }
        let x: Vec<f64> = sol
            .x
            .iter()
            .enumerate()
            .map(|(j, v)| v.clamp(problem.lower()[j], problem.upper()[j]))
            .collect();
        let mut duals = vec![0.0; rows.len()];
        for (k, &(i, sign)) in origin.iter().enumerate() {
            duals[i] = sign * sol.z[k];
        }
        LpSolution {
            status,
            objective_value: problem.objective_value(&x),
            x,
            duals,
        }
    }
}
