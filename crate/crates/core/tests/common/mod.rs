#![allow(dead_code)]

use cvarcut::lp::{DenseSimplex, LpProblem, LpStatus, Sense};
use cvarcut::{PositionBounds, ProfitVector, RiskVector, ScenarioMatrix};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Instance {
    pub y: ScenarioMatrix,
    pub p: ProfitVector,
    pub bounds: PositionBounds,
}

/// Random instance whose profitable directions are also risky, so the
/// risk cap binds for targets near the unit portfolio's risk.
pub fn random_instance(seed: u64, j: usize, n: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y = Array2::from_shape_fn((j, n), |_| {
        let u: f64 = rng.gen();
        if u < 0.1 {
            -rng.gen_range(1.0..6.0)
        } else {
            rng.gen_range(-0.5..2.0)
        }
    });
    let y = ScenarioMatrix::from_values(y).unwrap();
    let p = y.column_means();
    let lower: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..0.8)).collect();
    let upper: Vec<f64> = lower.iter().map(|l| l + rng.gen_range(0.5..1.5)).collect();
    let bounds = PositionBounds::new(lower, upper).unwrap();
    Instance { y, p, bounds }
}

/// Every permutation of `0..k`, by recursive swapping.
pub fn permutations(k: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, rest: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if rest.is_empty() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..rest.len() {
            let v = rest.remove(i);
            prefix.push(v);
            rec(prefix, rest, out);
            prefix.pop();
            rest.insert(i, v);
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut (0..k).collect(), &mut out);
    out
}

/// `max_pi r' P_pi y`, straight from the definition.
pub fn brute_force_risk(r: &[f64], y: &[f64], perms: &[Vec<usize>]) -> f64 {
    perms
        .iter()
        .map(|pi| r.iter().zip(pi).map(|(w, &j)| w * y[j]).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `mu_r(Yx)` by explicit sort, independent of the library's evaluator.
pub fn sorted_risk(r: &RiskVector, y: &ScenarioMatrix, x: &[f64]) -> f64 {
    let mut out: Vec<f64> = (0..y.scenarios())
        .map(|j| y.row(j).iter().zip(x).map(|(a, b)| a * b).sum())
        .collect();
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    r.weights().iter().zip(&out).map(|(w, v)| w * v).sum()
}

/// Solves `max p'x` over the box with one row per scenario permutation; only
/// feasible for tiny `J`.
pub fn permutation_lp_optimum(
    inst: &Instance,
    r: &RiskVector,
    target: f64,
) -> Option<(f64, Vec<f64>)> {
    let j = inst.y.scenarios();
    let n = inst.y.instruments();
    let mut lp = LpProblem::with_bounds(
        inst.p.as_slice().to_vec(),
        inst.bounds.lower().to_vec(),
        inst.bounds.upper().to_vec(),
    )
    .unwrap();
    for pi in permutations(j) {
        let mut c = vec![0.0; n];
        for (w, &s) in r.weights().iter().zip(&pi) {
            for (i, ci) in c.iter_mut().enumerate() {
                *ci += w * inst.y.values()[[s, i]];
            }
        }
        lp.add_row(&c, Sense::Le, target).unwrap();
    }
    use cvarcut::LpBackend;
    let sol = DenseSimplex::default().solve(&lp);
    match sol.status {
        LpStatus::Optimal => Some((sol.objective_value, sol.x)),
        LpStatus::Infeasible => None,
        s => panic!("permutation LP failed: {s:?}"),
    }
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + a.abs().max(b.abs()))
}
