use cvarcut::scenario::{factor_matrix, generate_synthetic, loading_matrix};
use cvarcut::{GeneratorSpec, ScenarioMatrix};
use ndarray::Array2;
use proptest::prelude::*;

/// E[2 - e^N] = 2 - e^{1/2}.
fn factor_mean() -> f64 {
    2.0 - 0.5f64.exp()
}

#[test]
fn factor_entries_have_lognormal_mean() {
    let f = factor_matrix(&GeneratorSpec::new(1_000, 100, 11)).unwrap();
    assert_eq!(f.len(), 100_000);
    let mean = f.mean().unwrap();
    assert!((mean - factor_mean()).abs() <= 0.02, "{mean}");
}

#[test]
fn loadings_are_unit_uniform() {
    let l = loading_matrix(&GeneratorSpec::new(10, 200, 5)).unwrap();
    assert!(l.iter().all(|v| (0.0..1.0).contains(v)));
    assert!((l.mean().unwrap() - 0.5).abs() < 0.01);
}

#[test]
fn scenario_mean_over_ten_seeds() {
    // Independent factors and loadings: E[Y_ji] = f E[F] E[L].
    let expect = 100.0 * factor_mean() * 0.5;
    let mean: f64 = (0..10)
        .map(|s| generate_synthetic(&GeneratorSpec::new(1_000, 100, s)).unwrap().mean_entry())
        .sum::<f64>()
        / 10.0;
    assert!((mean - expect).abs() <= 0.05 * expect, "{mean} vs {expect}");
}

#[test]
fn column_means_close_to_expectation() {
    // Given the loadings, E[p_i] = E[F] sum_k L_ki; the loadings themselves
    // spread the unconditional column means by about 6%.
    let spec = GeneratorSpec::new(10_000, 100, 3);
    let y = generate_synthetic(&spec).unwrap();
    let l = loading_matrix(&spec).unwrap();
    let p = y.column_means();
    for (i, pi) in p.as_slice().iter().enumerate() {
        let expect = factor_mean() * l.column(i).sum();
        assert!((pi - expect).abs() <= 0.1 * expect, "column {i}: {pi} vs {expect}");
    }
    let overall = p.as_slice().iter().sum::<f64>() / 100.0;
    let expect = 100.0 * factor_mean() * 0.5;
    assert!((overall - expect).abs() <= 0.05 * expect, "{overall}");
}

#[test]
fn seeds_give_distinct_and_repeatable_matrices() {
    let a = generate_synthetic(&GeneratorSpec::new(2, 3, 1).with_factors(1)).unwrap();
    let b = generate_synthetic(&GeneratorSpec::new(2, 3, 1).with_factors(1)).unwrap();
    let c = generate_synthetic(&GeneratorSpec::new(2, 3, 2).with_factors(1)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.values(), c.values());
}

#[test]
fn generated_matrix_round_trips_through_csv() {
    let y = generate_synthetic(&GeneratorSpec::new(100, 10, 9)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("y.csv");
    y.save_csv(&path).unwrap();
    let back = ScenarioMatrix::load_csv(&path).unwrap();
    assert_eq!(back, y);
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 101);
}

#[test]
fn outcome_special_positions() {
    let y = generate_synthetic(&GeneratorSpec::new(20, 4, 1)).unwrap();
    let sums = y.outcome_vector(&[1.0; 4]).unwrap();
    for (j, s) in sums.iter().enumerate() {
        assert!((s - y.row(j).sum()).abs() < 1e-12);
    }
    for i in 0..4 {
        let mut e = vec![0.0; 4];
        e[i] = 1.0;
        let col = y.outcome_vector(&e).unwrap();
        for (j, v) in col.iter().enumerate() {
            assert_eq!(*v, y.values()[[j, i]]);
        }
    }
    assert!(y.outcome_vector(&[0.0; 4]).unwrap().iter().all(|v| *v == 0.0));
    assert!(y.outcome_vector(&[1.0; 3]).is_err());
}

proptest! {
    #[test]
    fn outcome_is_linear(
        vals in proptest::collection::vec(-50.0f64..50.0, 24),
        x in proptest::collection::vec(-3.0f64..3.0, 4),
        z in proptest::collection::vec(-3.0f64..3.0, 4),
        a in -2.0f64..2.0,
        b in -2.0f64..2.0,
    ) {
        let y = ScenarioMatrix::from_values(Array2::from_shape_vec((6, 4), vals).unwrap()).unwrap();
        let mix: Vec<f64> = x.iter().zip(&z).map(|(u, v)| a * u + b * v).collect();
        let lhs = y.outcome_vector(&mix).unwrap();
        let ox = y.outcome_vector(&x).unwrap();
        let oz = y.outcome_vector(&z).unwrap();
        for j in 0..6 {
            let rhs = a * ox[j] + b * oz[j];
            prop_assert!((lhs[j] - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()));
        }
    }

    #[test]
    fn csv_round_trip_is_exact(vals in proptest::collection::vec(-1e6f64..1e6, 1..40)) {
        let n = 1 + vals.len() % 4;
        let j = vals.len() / n;
        prop_assume!(j >= 1);
        let y = ScenarioMatrix::from_values(
            Array2::from_shape_vec((j, n), vals[..j * n].to_vec()).unwrap(),
        ).unwrap();
        let mut buf = Vec::new();
        y.write_csv(&mut buf).unwrap();
        let back = ScenarioMatrix::read_csv(buf.as_slice(), std::path::Path::new("mem")).unwrap();
        prop_assert_eq!(back, y);
    }
}
