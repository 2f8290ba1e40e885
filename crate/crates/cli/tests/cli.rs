use std::path::Path;
use std::process::{Command, Output};

fn cvarcut(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cvarcut"))
        .args(args)
        .output()
        .expect("run cvarcut")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn field(out: &str, key: &str) -> f64 {
    out.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}: ")))
        .unwrap_or_else(|| panic!("no `{key}` in {out}"))
        .split_whitespace()
        .next()
        .unwrap()
        .parse()
        .unwrap()
}

fn generate(dir: &Path, j: usize, n: usize, seed: u64) -> String {
    let path = dir.join(format!("y_{j}_{n}_{seed}.csv"));
    let p = path.to_str().unwrap().to_string();
    let o = cvarcut(&[
        "generate",
        "--scenarios",
        &j.to_string(),
        "--instruments",
        &n.to_string(),
        "--seed",
        &seed.to_string(),
        "-o",
        &p,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    p
}

fn read_frontier(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|rec| rec.unwrap().iter().map(str::to_string).collect())
        .collect()
}

#[test]
fn generate_writes_header_and_rows_reproducibly() {
    let dir = tempfile::tempdir().unwrap();
    let a = generate(dir.path(), 1000, 100, 7);
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().count(), 1001);
    let b = dir.path().join("again.csv");
    let o = cvarcut(&[
        "generate", "--scenarios", "1000", "--instruments", "100", "--seed", "7", "-o",
        b.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let mean = field(&stdout(&o), "mean entry");
    let expect = 100.0 * (2.0 - 0.5f64.exp()) * 0.5;
    assert!((mean - expect).abs() <= 0.05 * expect, "{mean}");
}

#[test]
fn generate_rejects_zero_dimensions() {
    let dir = tempfile::tempdir().unwrap();
    let o = cvarcut(&[
        "generate", "--scenarios", "0", "--instruments", "3", "-o",
        dir.path().join("y.csv").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn optimize_both_methods_agree() {
    let dir = tempfile::tempdir().unwrap();
    let y = generate(dir.path(), 1000, 20, 3);
    let x_out = dir.path().join("x.csv");
    let run = |method: &str, extra: &[&str]| {
        let mut args = vec![
            "optimize", "-i", &y, "--method", method, "--risk", "100:1", "--target-risk",
            "current", "--delta", "1e-6", "--lower", "0.5", "--upper", "1.5",
        ];
        args.extend_from_slice(extra);
        let o = cvarcut(&args);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        stdout(&o)
    };
    let b = run("cutting-plane", &["-o", x_out.to_str().unwrap()]);
    let a = run("reformulation", &[]);
    assert!(b.contains("verification: passed"), "{b}");
    let (sa, sb) = (field(&a, "profit"), field(&b, "profit"));
    assert!((sa - sb).abs() <= 1e-6 * sa.abs(), "{sa} vs {sb}");
    let target = field(&b, "risk constraint");
    assert!(field(&b, "achieved risk") <= target * (1.0 + 1e-6));
    let x = std::fs::read_to_string(&x_out).unwrap();
    assert_eq!(x.lines().next(), Some("instrument,position"));
    assert_eq!(x.lines().count(), 21);
}

#[test]
fn optimize_with_bound_and_profit_files() {
    let dir = tempfile::tempdir().unwrap();
    let y = generate(dir.path(), 200, 3, 4);
    let bounds = dir.path().join("b.csv");
    std::fs::write(&bounds, "lower,upper\n0.5,1.5\n0.5,1.5\n0.5,1.5\n").unwrap();
    let profit = dir.path().join("p.csv");
    std::fs::write(&profit, "profit\n1\n2\n3\n").unwrap();
    let o = cvarcut(&[
        "optimize", "-i", &y, "--bounds", bounds.to_str().unwrap(), "--profit",
        profit.to_str().unwrap(), "--target-risk", "1e9",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    // Inactive cap: every position at its upper bound.
    assert!((field(&stdout(&o), "profit") - 9.0).abs() < 1e-9);
}

#[test]
fn optimize_infeasible_target_has_own_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let y = generate(dir.path(), 100, 4, 5);
    let o = cvarcut(&[
        "optimize", "-i", &y, "--target-risk", "-1e6", "--lower", "0.5", "--upper", "1.5",
    ]);
    assert_eq!(o.status.code(), Some(4));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("infeasible target risk") && err.contains("minimum achievable risk"), "{err}");
}

#[test]
fn io_and_usage_errors() {
    let o = cvarcut(&["optimize", "-i", "/nonexistent.csv", "--target-risk", "1", "--lower", "0", "--upper", "1"]);
    assert_eq!(o.status.code(), Some(3));
    let o = cvarcut(&["optimize", "-i", "y.csv"]);
    assert_eq!(o.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let y = generate(dir.path(), 100, 2, 1);
    let o = cvarcut(&["optimize", "-i", &y, "--target-risk", "1", "--lower", "0", "--upper", "1", "--risk", "7:1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn iteration_limit_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let y = generate(dir.path(), 1000, 50, 2);
    let o = cvarcut(&[
        "optimize", "-i", &y, "--target-risk", "current", "--lower", "0.5", "--upper", "1.5",
        "--max-iterations", "1",
    ]);
    assert_eq!(o.status.code(), Some(6));
}

#[test]
fn frontier_sweep_rows_and_shape() {
    let dir = tempfile::tempdir().unwrap();
    let y = generate(dir.path(), 100, 5, 6);
    let out = dir.path().join("f.csv");
    let o = cvarcut(&[
        "frontier", "-i", &y, "--risk", "10:1", "--lower", "0.5", "--upper", "1.5", "--steps", "5",
        "-o", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_frontier(&out);
    assert_eq!(rows.len(), 5);
    let s: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    for w in s.windows(2) {
        assert!(w[1] >= w[0] - 1e-9 * w[0].abs());
    }
}

#[test]
fn frontier_tail_is_flat_above_saturation() {
    let dir = tempfile::tempdir().unwrap();
    let y = generate(dir.path(), 100, 5, 8);
    let out = dir.path().join("f.csv");
    let o = cvarcut(&[
        "frontier", "-i", &y, "--risk", "10:1", "--lower", "0.5", "--upper", "1.5", "--steps", "4",
        "--risk-hi", "1e5", "--risk-lo", "9e4", "-o", out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let rows = read_frontier(&out);
    let a: f64 = rows[2][1].parse().unwrap();
    let b: f64 = rows[3][1].parse().unwrap();
    assert!((a - b).abs() <= 1e-9 * a.abs());
}

#[test]
fn frontier_flags_targets_below_minimum() {
    let dir = tempfile::tempdir().unwrap();
    let y = generate(dir.path(), 100, 5, 9);
    let out = dir.path().join("f.csv");
    let o = cvarcut(&[
        "frontier", "-i", &y, "--risk", "10:1", "--lower", "0.5", "--upper", "1.5", "--steps", "3",
        "--risk-lo", "-1e6", "--risk-hi", "1e5", "-o", out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let rows = read_frontier(&out);
    assert_eq!(rows[0][5], "infeasible");
    assert_eq!(rows[0][1], "");
    assert_eq!(rows[2][5], "optimal");
}

#[test]
fn bench_small_grid_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bench.csv");
    let o = cvarcut(&[
        "bench", "--grid", "1000x100,200x10", "--backend", "simplex", "-o", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("speedup"));
    let mut r = csv::Reader::from_path(&out).unwrap();
    let rows: Vec<csv::StringRecord> = r.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 4);
    let a = &rows[0];
    assert_eq!((&a[0], &a[1], &a[2], &a[3], &a[4], &a[5]), ("1000", "100", "reformulation", "1101", "2201", "1"));
    let b = &rows[1];
    let cuts: usize = b[5].parse().unwrap();
    assert_eq!(&b[3], "100");
    assert_eq!(b[4].parse::<usize>().unwrap(), 200 + cuts);
}

#[test]
fn bench_memory_budget_skips() {
    let o = Command::new(env!("CARGO_BIN_EXE_cvarcut"))
        .args(["bench", "--grid", "1000x100"])
        .env("CVARCUT_MEMORY_BUDGET", "1K")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(stdout(&o).contains("skipped J=1000 n=100"));
}

/// The full default grid takes a few minutes; run with `--ignored`.
#[test]
#[ignore]
fn bench_default_grid_smoke() {
    let o = cvarcut(&["bench"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = stdout(&o);
    let rows = table
        .lines()
        .filter(|l| matches!(l.split_whitespace().nth(2), Some("reformulation" | "cutting-plane")))
        .count();
    assert_eq!(rows, 12, "{table}");
}
