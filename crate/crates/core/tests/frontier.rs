mod common;

use common::{random_instance, rel_diff, sorted_risk, Instance};
use cvarcut::frontier::{
    min_achievable_risk, sweep, sweep_targets, write_frontier_csv, PointStatus, SweepOptions,
};
use cvarcut::lp::DenseSimplex;
use cvarcut::reformulation::BoundMode;
use cvarcut::{make_cvar_vector, Method, Portfolio, RiskVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn f_of(pf: &Portfolio<'_>, target: f64) -> f64 {
    cvarcut::reformulation::solve(pf, target, BoundMode::VariableBounds, &DenseSimplex::default())
        .unwrap()
        .profit
}

fn setup(seed: u64, j: usize, n: usize, period: usize) -> (Instance, RiskVector) {
    (random_instance(seed, j, n), make_cvar_vector(j, period).unwrap())
}

#[test]
fn minimum_risk_lower_bounds_samples() {
    let (inst, r) = setup(1, 50, 4, 10);
    let d = min_achievable_risk(&inst.y, &inst.bounds, &r, &DenseSimplex::default()).unwrap();
    assert!(inst.bounds.contains(&d.x, 1e-12));
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..1000 {
        let x: Vec<f64> = inst
            .bounds
            .lower()
            .iter()
            .zip(inst.bounds.upper())
            .map(|(l, u)| rng.gen_range(*l..=*u))
            .collect();
        assert!(d.risk <= sorted_risk(&r, &inst.y, &x) + 1e-9);
    }
}

#[test]
fn saturated_sweep_ends_at_box_optimum() {
    let (inst, r) = setup(3, 100, 5, 10);
    let pf = Portfolio::new(&inst.y, &inst.p, &inst.bounds, &r).unwrap();
    let x_box = inst.bounds.box_optimum(&inst.p);
    let top = pf.risk_of(&x_box).unwrap();
    let d = min_achievable_risk(&inst.y, &inst.bounds, &r, &DenseSimplex::default()).unwrap().risk;
    let pts = sweep(&pf, d, top + 1.0, 6, &SweepOptions::default(), &DenseSimplex::default())
        .unwrap();
    let box_obj = inst.p.dot(&x_box);
    let last = pts.last().unwrap().profit.unwrap();
    assert!((last - box_obj).abs() <= 1e-9 * (1.0 + box_obj.abs()));
}

#[test]
fn sweep_shape_and_cross_method_agreement() {
    let (inst, r) = setup(4, 200, 5, 20);
    let pf = Portfolio::new(&inst.y, &inst.p, &inst.bounds, &r).unwrap();
    let d = min_achievable_risk(&inst.y, &inst.bounds, &r, &DenseSimplex::default()).unwrap().risk;
    let hi = pf.risk_of(&inst.bounds.box_optimum(&inst.p)).unwrap();
    let backend = DenseSimplex::default();
    let b = sweep(&pf, d, hi, 9, &SweepOptions::default(), &backend).unwrap();
    let a = sweep(
        &pf,
        d,
        hi,
        9,
        &SweepOptions {
            method: Method::Reformulation,
            ..SweepOptions::default()
        },
        &backend,
    )
    .unwrap();
    assert_eq!(b.len(), 9);
    for w in b.windows(2) {
        assert!(w[0].target_risk < w[1].target_risk);
    }
    let s: Vec<f64> = b.iter().map(|p| p.profit.unwrap()).collect();
    for w in s.windows(2) {
        assert!(w[1] >= w[0] - 1e-6 * (1.0 + w[1].abs()));
    }
    for w in s.windows(3) {
        assert!(w[1] >= 0.5 * (w[0] + w[2]) - 1e-6 * (1.0 + w[1].abs()));
    }
    for (pa, pb) in a.iter().zip(&b) {
        let (sa, sb) = (pa.profit.unwrap(), pb.profit.unwrap());
        assert!(rel_diff(sa, sb) < 1e-6);
        // Sandwich: f(R) <= s <= f(R*).
        assert!(sb >= f_of(&pf, pb.target_risk) - 1e-6);
        assert!(sb <= f_of(&pf, pb.achieved_risk.max(d)) + 1e-6);
        assert!(pb.achieved_risk - pb.target_risk <= 1e-6 * pb.target_risk.abs().max(1e-12));
    }
}

#[test]
fn targets_below_minimum_are_flagged() {
    let (inst, r) = setup(5, 100, 4, 10);
    let pf = Portfolio::new(&inst.y, &inst.p, &inst.bounds, &r).unwrap();
    let d = min_achievable_risk(&inst.y, &inst.bounds, &r, &DenseSimplex::default()).unwrap().risk;
    let pts = sweep(&pf, d - 2.0, d + 2.0, 5, &SweepOptions::default(), &DenseSimplex::default())
        .unwrap();
    assert_eq!(pts[0].status, PointStatus::Infeasible);
    assert!(pts[0].profit.is_none());
    assert_eq!(pts[4].status, PointStatus::Optimal);
    let mut buf = Vec::new();
    write_frontier_csv(&pts, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "target_risk,profit,achieved_risk,iterations,method,status"
    );
    assert!(lines.next().unwrap().ends_with(",cutting-plane,infeasible"));
    assert_eq!(text.lines().count(), 6);
}

#[test]
fn parallel_sweep_matches_sequential() {
    let (inst, r) = setup(6, 100, 5, 10);
    let pf = Portfolio::new(&inst.y, &inst.p, &inst.bounds, &r).unwrap();
    let d = min_achievable_risk(&inst.y, &inst.bounds, &r, &DenseSimplex::default()).unwrap().risk;
    let targets: Vec<f64> = (0..12).map(|k| d - 0.5 + 0.4 * k as f64).collect();
    let seq = sweep_targets(&pf, &targets, &SweepOptions::default(), &DenseSimplex::default());
    let par = sweep_targets(
        &pf,
        &targets,
        &SweepOptions {
            parallel: true,
            ..SweepOptions::default()
        },
        &DenseSimplex::default(),
    );
    for (a, b) in seq.iter().zip(&par) {
        assert_eq!(a.target_risk, b.target_risk);
        assert_eq!(a.status, b.status);
        assert_eq!(a.profit, b.profit);
    }
}

#[test]
fn no_jump_at_minimum_risk() {
    let (inst, r) = setup(7, 200, 5, 20);
    let pf = Portfolio::new(&inst.y, &inst.p, &inst.bounds, &r).unwrap();
    let d = min_achievable_risk(&inst.y, &inst.bounds, &r, &DenseSimplex::default()).unwrap().risk;
    let hi = pf.risk_of(&inst.bounds.box_optimum(&inst.p)).unwrap();
    let span = hi - d;
    let f0 = f_of(&pf, d);
    let g4 = f_of(&pf, d + 1e-4 * span) - f0;
    let g3 = f_of(&pf, d + 1e-3 * span) - f0;
    assert!(g4 >= -1e-9 && g3 >= g4 - 1e-9);
    assert!(g4 <= g3 * 0.5 + 1e-9, "{g4} {g3}");
}
