//! Bounded-variable primal simplex with an explicit dense basis inverse.
//!
//! Every row `i` gets a slack `s_i` with `a_i x + s_i = b_i`; the slack bounds
//! encode the sense (`<=`: `s >= 0`, `>=`: `s <= 0`, `=`: `s = 0`). Phase one
//! minimizes the sum of bound violations of the basic variables, so any
//! starting basis works, including a warm start after rows were appended.
//! Sized for problems with up to a few thousand rows.

use super::{BasisStatus, LpBackend, LpProblem, LpSolution, LpStatus, Sense, WarmStart};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    pub feasibility_tol: f64,
    pub optimality_tol: f64,
    pub pivot_tol: f64,
    /// Defaults to `50 (m + n) + 10_000` when `None`.
    pub max_iterations: Option<usize>,
    /// Pivots between basis reinversions; defaults to `max(100, m)`.
    pub refactor_interval: Option<usize>,
    /// Accept warm-start hints in [`LpBackend::solve_warm`].
    pub warm_start: bool,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            feasibility_tol: 1e-9,
            optimality_tol: 1e-9,
            pivot_tol: 1e-9,
            max_iterations: None,
            refactor_interval: None,
            warm_start: true,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct DenseSimplex {
    pub options: SimplexOptions,
}

impl DenseSimplex {
    pub fn new(options: SimplexOptions) -> Self {
        Self { options }
    }
}

impl LpBackend for DenseSimplex {
    fn name(&self) -> &'static str {
        "dense-simplex"
    }

    fn solve(&self, problem: &LpProblem) -> LpSolution {
        self.solve_warm(problem, None).0
    }

    fn solve_warm(
        &self,
        problem: &LpProblem,
        start: Option<&WarmStart>,
    ) -> (LpSolution, Option<WarmStart>) {
        let start = start.filter(|_| self.options.warm_start);
        let mut solver = Solver::new(problem, self.options);
        let warm = start.is_some_and(|s| solver.load_basis(s));
        if !warm {
            solver.cold_basis();
        }
        let status = solver.run();
        let solution = solver.extract(problem, status);
        let basis = (status == LpStatus::Optimal).then(|| solver.basis());
        (solution, basis)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Step {
    Flip,
    Pivot { row: usize, to_upper: bool },
}

struct Solver {
    m: usize,
    n: usize,
    opts: SimplexOptions,
    // Structural columns, compressed by column.
    col_start: Vec<usize>,
    col_row: Vec<usize>,
    col_val: Vec<f64>,
    /// `1 + |A_j|^2`, static pricing weights.
    weight: Vec<f64>,
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    b: Vec<f64>,
    x: Vec<f64>,
    /// Basic variable of each basis position.
    head: Vec<usize>,
    /// Basis position of each variable, if basic.
    pos: Vec<Option<usize>>,
    /// Column-major `m x m` inverse of the basis matrix.
    binv: Vec<f64>,
}

impl Solver {
    fn new(problem: &LpProblem, opts: SimplexOptions) -> Self {
        let m = problem.num_rows();
        let n = problem.num_vars();
        let mut counts = vec![0usize; n + 1];
        for row in problem.rows() {
            for &j in &row.indices {
                counts[j + 1] += 1;
            }
        }
        for j in 0..n {
            counts[j + 1] += counts[j];
        }
        let col_start = counts.clone();
        let nnz = col_start[n];
        let mut col_row = vec![0; nnz];
        let mut col_val = vec![0.0; nnz];
        let mut fill = counts;
        for (i, row) in problem.rows().iter().enumerate() {
            for (&j, &a) in row.indices.iter().zip(&row.values) {
                col_row[fill[j]] = i;
                col_val[fill[j]] = a;
                fill[j] += 1;
            }
        }
        let mut weight: Vec<f64> = (0..n)
            .map(|j| 1.0 + col_val[col_start[j]..col_start[j + 1]].iter().map(|a| a * a).sum::<f64>())
            .collect();
        weight.extend(std::iter::repeat_n(2.0, m));

        let mut cost: Vec<f64> = problem.objective().iter().map(|c| -c).collect();
        cost.resize(n + m, 0.0);
        let mut lower = problem.lower().to_vec();
        let mut upper = problem.upper().to_vec();
        for row in problem.rows() {
            let (lo, hi) = match row.sense {
                Sense::Le => (0.0, f64::INFINITY),
                Sense::Ge => (f64::NEG_INFINITY, 0.0),
                Sense::Eq => (0.0, 0.0),
            };
            lower.push(lo);
            upper.push(hi);
        }
        Self {
            m,
            n,
            opts,
            col_start,
            col_row,
            col_val,
            weight,
            cost,
            lower,
            upper,
            b: problem.rows().iter().map(|r| r.rhs).collect(),
            x: vec![0.0; n + m],
            head: Vec::new(),
            pos: vec![None; n + m],
            binv: Vec::new(),
        }
    }

    fn resting_value(&self, j: usize) -> f64 {
        if self.lower[j].is_finite() {
            self.lower[j]
        } else if self.upper[j].is_finite() {
            self.upper[j]
        } else {
            0.0
        }
    }

    /// All-slack basis with structurals resting at a finite bound.
    fn cold_basis(&mut self) {
        for j in 0..self.n {
            self.x[j] = self.resting_value(j);
            self.pos[j] = None;
        }
        self.head = (self.n..self.n + self.m).collect();
        for (i, &s) in self.head.iter().enumerate() {
            self.pos[s] = Some(i);
        }
        self.binv = vec![0.0; self.m * self.m];
        for i in 0..self.m {
            self.binv[i * self.m + i] = 1.0;
        }
        self.recompute_basics();
    }

    /// Installs a previous basis; rows beyond the hint get basic slacks.
    fn load_basis(&mut self, start: &WarmStart) -> bool {
        if start.structural.len() != self.n || start.slack.len() > self.m {
            return false;
        }
        let statuses = start
            .structural
            .iter()
            .chain(&start.slack)
            .copied()
            .chain(std::iter::repeat_n(BasisStatus::Basic, self.m - start.slack.len()));
        self.head.clear();
        for (j, status) in statuses.enumerate() {
            self.pos[j] = None;
            match status {
                BasisStatus::Basic => {
                    self.pos[j] = Some(self.head.len());
                    self.head.push(j);
                }
                BasisStatus::AtLower if self.lower[j].is_finite() => self.x[j] = self.lower[j],
                BasisStatus::AtUpper if self.upper[j].is_finite() => self.x[j] = self.upper[j],
                _ => self.x[j] = self.resting_value(j),
            }
        }
        if self.head.len() != self.m || !self.reinvert() {
            self.pos.iter_mut().for_each(|p| *p = None);
            return false;
        }
        self.recompute_basics();
        true
    }

    fn basis(&self) -> WarmStart {
        let status = |j: usize| {
            if self.pos[j].is_some() {
                BasisStatus::Basic
            } else if self.x[j] == self.lower[j] {
                BasisStatus::AtLower
            } else if self.x[j] == self.upper[j] {
                BasisStatus::AtUpper
            } else {
                BasisStatus::Zero
            }
        };
        WarmStart {
            structural: (0..self.n).map(status).collect(),
            slack: (self.n..self.n + self.m).map(status).collect(),
        }
    }

    /// `alpha = B^{-1} A_j`.
    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut alpha = vec![0.0; m];
        let mut add = |k: usize, a: f64| {
            let col = &self.binv[k * m..(k + 1) * m];
            for (o, v) in alpha.iter_mut().zip(col) {
                *o += a * v;
            }
        };
        if j < self.n {
            for p in self.col_start[j]..self.col_start[j + 1] {
                add(self.col_row[p], self.col_val[p]);
            }
        } else {
            add(j - self.n, 1.0);
        }
        alpha
    }

    /// `y' = c_B' B^{-1}`.
    fn btran(&self, cb: &[f64]) -> Vec<f64> {
        let m = self.m;
        (0..m)
            .map(|k| cb.iter().zip(&self.binv[k * m..(k + 1) * m]).map(|(c, b)| c * b).sum())
            .collect()
    }

    fn dot_column(&self, y: &[f64], j: usize) -> f64 {
        if j < self.n {
            (self.col_start[j]..self.col_start[j + 1])
                .map(|p| y[self.col_row[p]] * self.col_val[p])
                .sum()
        } else {
            y[j - self.n]
        }
    }

    /// Recomputes `x_B = B^{-1} (b - N x_N)`.
    fn recompute_basics(&mut self) {
        let m = self.m;
        let mut rhs = self.b.clone();
        for j in 0..self.n {
            if self.pos[j].is_none() && self.x[j] != 0.0 {
                for p in self.col_start[j]..self.col_start[j + 1] {
                    rhs[self.col_row[p]] -= self.col_val[p] * self.x[j];
                }
            }
        }
        for (i, r) in rhs.iter_mut().enumerate() {
            let s = self.n + i;
            if self.pos[s].is_none() {
                *r -= self.x[s];
            }
        }
        let mut xb = vec![0.0; m];
        for (k, r) in rhs.iter().enumerate() {
            if *r != 0.0 {
                for (o, v) in xb.iter_mut().zip(&self.binv[k * m..(k + 1) * m]) {
                    *o += r * v;
                }
            }
        }
        for (i, v) in xb.into_iter().enumerate() {
            self.x[self.head[i]] = v;
        }
    }

    /// Rebuilds `B^{-1}` by Gauss-Jordan elimination with partial pivoting.
    fn reinvert(&mut self) -> bool {
        let m = self.m;
        // Row-major augmented system [B | I].
        let width = 2 * m;
        let mut a = vec![0.0; m * width];
        for (c, &j) in self.head.iter().enumerate() {
            if j < self.n {
                for p in self.col_start[j]..self.col_start[j + 1] {
                    a[self.col_row[p] * width + c] = self.col_val[p];
                }
            } else {
                a[(j - self.n) * width + c] = 1.0;
            }
        }
        for i in 0..m {
            a[i * width + m + i] = 1.0;
        }
        for col in 0..m {
            let (piv, best) = (col..m)
                .map(|r| (r, a[r * width + col].abs()))
                .fold((col, -1.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
            if best < 1e-11 {
                return false;
            }
            if piv != col {
                for k in 0..width {
                    a.swap(piv * width + k, col * width + k);
                }
            }
            let inv = 1.0 / a[col * width + col];
            for k in 0..width {
                a[col * width + k] *= inv;
            }
            for r in 0..m {
                if r != col {
                    let f = a[r * width + col];
                    if f != 0.0 {
                        for k in 0..width {
                            a[r * width + k] -= f * a[col * width + k];
                        }
                    }
                }
            }
        }
        self.binv = vec![0.0; m * m];
        for r in 0..m {
            for k in 0..m {
                self.binv[k * m + r] = a[r * width + m + k];
            }
        }
        true
    }

    /// Product-form update of `B^{-1}` after column `alpha` enters at `row`.
    fn update_inverse(&mut self, alpha: &[f64], row: usize) {
        let m = self.m;
        let pivot = alpha[row];
        for k in 0..m {
            let col = &mut self.binv[k * m..(k + 1) * m];
            let scaled = col[row] / pivot;
            if scaled != 0.0 {
                for (i, v) in col.iter_mut().enumerate() {
                    *v -= alpha[i] * scaled;
                }
            }
            col[row] = scaled;
        }
    }

    fn feas_tol(&self, bound: f64) -> f64 {
        let scale = if bound.is_finite() { bound.abs() } else { 0.0 };
        self.opts.feasibility_tol * (1.0 + scale)
    }

    fn below(&self, j: usize) -> bool {
        self.x[j] < self.lower[j] - self.feas_tol(self.lower[j])
    }

    fn above(&self, j: usize) -> bool {
        self.x[j] > self.upper[j] + self.feas_tol(self.upper[j])
    }

    fn run(&mut self) -> LpStatus {
        let max_iter = self
            .opts
            .max_iterations
            .unwrap_or(50 * (self.m + self.n) + 10_000);
        let refactor = self.opts.refactor_interval.unwrap_or(self.m.max(100));
        let mut since_refactor = 0usize;
        let mut degenerate_run = 0usize;
        let mut fresh = false;
        for _ in 0..max_iter {
            if since_refactor >= refactor {
                if !self.reinvert() {
                    return LpStatus::NumericalFailure;
                }
                self.recompute_basics();
                since_refactor = 0;
            }
            let phase_one = self.head.iter().any(|&j| self.below(j) || self.above(j));
            let cb: Vec<f64> = self
                .head
                .iter()
                .map(|&j| {
                    if !phase_one {
                        self.cost[j]
                    } else if self.below(j) {
                        -1.0
                    } else if self.above(j) {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect();
            let y = self.btran(&cb);
            let bland = degenerate_run > 50;
            let Some((q, dir, dq)) = self.price(&y, phase_one, bland) else {
                if !fresh {
                    // Confirm the verdict against a freshly factored basis.
                    if !self.reinvert() {
                        return LpStatus::NumericalFailure;
                    }
                    self.recompute_basics();
                    since_refactor = 0;
                    fresh = true;
                    continue;
                }
                return if phase_one {
                    LpStatus::Infeasible
                } else {
                    LpStatus::Optimal
                };
            };
            let alpha = self.ftran(q);
            let step = if phase_one {
                self.ratio_phase_one(q, dir, &alpha, bland)
            } else {
                self.ratio_harris(q, dir, &alpha, bland)
            };
            let Some((theta, step)) = step else {
                return if phase_one {
                    LpStatus::NumericalFailure
                } else {
                    LpStatus::Unbounded
                };
            };
            if theta * dq.abs() <= 1e-12 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            for (i, &a) in alpha.iter().enumerate() {
                if a != 0.0 {
                    let j = self.head[i];
                    self.x[j] -= dir * theta * a;
                }
            }
            match step {
                Step::Flip => {
                    self.x[q] = if dir > 0.0 { self.upper[q] } else { self.lower[q] };
                }
                Step::Pivot { row, to_upper } => {
                    self.x[q] += dir * theta;
                    let leaving = self.head[row];
                    self.x[leaving] = if to_upper {
                        self.upper[leaving]
                    } else {
                        self.lower[leaving]
                    };
                    self.pos[leaving] = None;
                    self.head[row] = q;
                    self.pos[q] = Some(row);
                    self.update_inverse(&alpha, row);
                    since_refactor += 1;
                }
            }
            fresh = false;
        }
        LpStatus::IterationLimit
    }

    /// Chooses the entering variable: returns `(index, direction, reduced cost)`.
    fn price(&self, y: &[f64], phase_one: bool, bland: bool) -> Option<(usize, f64, f64)> {
        let tol = self.opts.optimality_tol;
        let mut best: Option<(usize, f64, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..self.n + self.m {
            if self.pos[j].is_some() {
                continue;
            }
            let can_up = self.upper[j] - self.x[j] > self.feas_tol(self.upper[j]);
            let can_down = self.x[j] - self.lower[j] > self.feas_tol(self.lower[j]);
            if !can_up && !can_down {
                continue;
            }
            let base = if phase_one { 0.0 } else { self.cost[j] };
            let d = base - self.dot_column(y, j);
            let dir = if can_up && d < -tol {
                1.0
            } else if can_down && d > tol {
                -1.0
            } else {
                continue;
            };
            if bland {
                return Some((j, dir, d));
            }
            let score = d * d / self.weight[j];
            if score > best_score {
                best_score = score;
                best = Some((j, dir, d));
            }
        }
        best
    }

    fn span(&self, q: usize) -> f64 {
        self.upper[q] - self.lower[q]
    }

    /// Two-pass Harris ratio test for a primal feasible basis.
    fn ratio_harris(&self, q: usize, dir: f64, alpha: &[f64], bland: bool) -> Option<(f64, Step)> {
        let piv = self.opts.pivot_tol;
        let mut relaxed = f64::INFINITY;
        for (i, &a) in alpha.iter().enumerate() {
            let j = self.head[i];
            let rate = dir * a;
            if rate > piv && self.lower[j].is_finite() {
                relaxed = relaxed.min((self.x[j] - self.lower[j] + self.feas_tol(self.lower[j])) / rate);
            } else if rate < -piv && self.upper[j].is_finite() {
                relaxed = relaxed.min((self.upper[j] + self.feas_tol(self.upper[j]) - self.x[j]) / -rate);
            }
        }
        let span = self.span(q);
        if !relaxed.is_finite() && !span.is_finite() {
            return None;
        }
        if span <= relaxed {
            return Some((span, Step::Flip));
        }
        let mut chosen: Option<(usize, f64, bool)> = None;
        let mut chosen_size = 0.0;
        for (i, &a) in alpha.iter().enumerate() {
            let j = self.head[i];
            let rate = dir * a;
            let (ratio, to_upper) = if rate > piv && self.lower[j].is_finite() {
                ((self.x[j] - self.lower[j]) / rate, false)
            } else if rate < -piv && self.upper[j].is_finite() {
                ((self.upper[j] - self.x[j]) / -rate, true)
            } else {
                continue;
            };
            if ratio <= relaxed {
                let better = if bland {
                    chosen.is_none_or(|(r, _, _)| j < self.head[r])
                } else {
                    a.abs() > chosen_size
                };
                if better {
                    chosen = Some((i, ratio.max(0.0), to_upper));
                    chosen_size = a.abs();
                }
            }
        }
        chosen.map(|(row, theta, to_upper)| (theta, Step::Pivot { row, to_upper }))
    }

    /// Ratio test while minimizing the sum of infeasibilities: stops at the
    /// first breakpoint, either a feasible basic reaching a bound or an
    /// infeasible one becoming feasible.
    fn ratio_phase_one(
        &self,
        q: usize,
        dir: f64,
        alpha: &[f64],
        bland: bool,
    ) -> Option<(f64, Step)> {
        let piv = self.opts.pivot_tol;
        let mut best: Option<(usize, f64, bool)> = None;
        let mut best_size = 0.0;
        for (i, &a) in alpha.iter().enumerate() {
            if a.abs() <= piv {
                continue;
            }
            let j = self.head[i];
            let change = -dir * a;
            let (lo, hi, v) = (self.lower[j], self.upper[j], self.x[j]);
            let candidate = if self.below(j) {
                (change > 0.0).then(|| ((lo - v) / change, false))
            } else if self.above(j) {
                (change < 0.0).then(|| ((v - hi) / -change, true))
            } else if change < 0.0 && lo.is_finite() {
                Some((((v - lo) / -change).max(0.0), false))
            } else if change > 0.0 && hi.is_finite() {
                Some((((hi - v) / change).max(0.0), true))
            } else {
                None
            };
            let Some((ratio, to_upper)) = candidate else {
                continue;
            };
            let replace = match best {
                None => true,
                Some((r, t, _)) => {
                    let tie = (ratio - t).abs() <= 1e-12 * (1.0 + t.abs());
                    if tie {
                        if bland {
                            j < self.head[r]
                        } else {
                            a.abs() > best_size
                        }
                    } else {
                        ratio < t
                    }
                }
            };
            if replace {
                best = Some((i, ratio, to_upper));
                best_size = a.abs();
            }
        }
        let span = self.span(q);
        match best {
            Some((_, t, _)) if span <= t => Some((span, Step::Flip)),
            Some((row, t, to_upper)) => Some((t, Step::Pivot { row, to_upper })),
            None if span.is_finite() => Some((span, Step::Flip)),
            None => None,
        }
    }

    fn extract(&self, problem: &LpProblem, status: LpStatus) -> LpSolution {
        if status != LpStatus::Optimal {
            return LpSolution::failed(status, problem);
        }
        let cb: Vec<f64> = self.head.iter().map(|&j| self.cost[j]).collect();
        // Internal costs are negated; flip back to the maximization convention.
        let duals: Vec<f64> = self.btran(&cb).into_iter().map(|v| -v).collect();
        let x = self.x[..self.n].to_vec();
        LpSolution {
            status,
            objective_value: problem.objective_value(&x),
            x,
            duals,
        }
    }
}
