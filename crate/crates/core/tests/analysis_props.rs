use l4dict_core::analysis::{
    concentration_probe, expected_gradient, expected_objective, permutation_gap_check, recovery_constant,
    sample_objective, verify_so2_equivalence,
};
use l4dict_core::linalg::{Matrix, OrthogonalMatrix};
use l4dict_core::model::{gen_haar_orthogonal, seeded_rng};
use proptest::prelude::*;
use rand::Rng;

fn haar(n: usize, seed: u64) -> OrthogonalMatrix {
    gen_haar_orthogonal(n, &mut seeded_rng(seed)).unwrap()
}

fn skew_direction(a: &Matrix, seed: u64) -> Matrix {
    let n = a.rows();
    let mut rng = seeded_rng(seed);
    let mut s = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let v: f64 = rng.random_range(-1.0..1.0);
            s[(i, j)] = v;
            s[(j, i)] = -v;
        }
    }
    a.matmul(&s).unwrap()
}

fn inner(a: &Matrix, b: &Matrix) -> f64 {
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x * y).sum()
}

#[test]
fn objective_expectation_matches_sampling() {
    let (n, theta, p) = (10, 0.3, 100_000);
    let a = haar(n, 1);
    let d = haar(n, 2);
    let mut rng = seeded_rng(3);
    let report = sample_objective(&a, &d, theta, p, &mut rng).unwrap();
    assert!(report.rel_error() <= 0.02, "{report:?}");
}

#[test]
fn concentration_improves_with_p() {
    let mut rng = seeded_rng(8);
    let rows = concentration_probe(10, 0.3, &[1_000, 10_000, 100_000], 40, &mut rng).unwrap();
    assert!(rows.windows(2).all(|w| w[1].mean_deviation < w[0].mean_deviation));
    let improved = rows[0]
        .deviations
        .iter()
        .zip(&rows[2].deviations)
        .filter(|(small_p, large_p)| large_p < small_p)
        .count();
    // Deviations shrink like p^(-1/2); a pair flips with probability about 6%.
    assert!(improved >= 32, "only {improved} of 40 trials improved");
    assert!(rows.windows(2).all(|w| w[1].scaling < w[0].scaling));
}

#[test]
fn recovery_constant_values() {
    assert!((recovery_constant(0.5) - 16.0 / 3.0).abs() < 1e-15);
    assert!((recovery_constant(0.3) - 4.0 / 0.63).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn expectation_gradient_is_tangent_consistent(n in 2usize..8, seed in any::<u64>(), theta in 0.05f64..0.95) {
        let p = 1000;
        let a = haar(n, seed);
        let d = haar(n, seed ^ 0x55);
        let dir = skew_direction(&a, seed ^ 0x99);
        let h = 1e-5;
        let plus = a.add_scaled(h, &dir).unwrap();
        let minus = a.add_scaled(-h, &dir).unwrap();
        let fd = (expected_objective(&plus, &d, theta, p) - expected_objective(&minus, &d, theta, p)) / (2.0 * h);
        let g = expected_gradient(&a, &d, theta, p);
        let directional = inner(&g, &dir);
        let scale = g.frobenius_norm() * dir.frobenius_norm();
        prop_assert!((fd - directional).abs() <= 1e-4 * scale, "fd {} vs {}", fd, directional);
    }

    #[test]
    fn expectation_range(n in 2usize..10, seed in any::<u64>(), theta in 0.05f64..0.95) {
        let p = 100;
        let w = haar(n, seed);
        let id = Matrix::identity(n);
        let v = expected_objective(&w, &id, theta, p);
        let base = 3.0 * p as f64 * theta;
        let lo = base * ((1.0 - theta) + theta * n as f64);
        let hi = base * n as f64;
        prop_assert!(v >= lo * (1.0 - 1e-12) && v <= hi * (1.0 + 1e-12));
        prop_assert!((expected_objective(&id, &id, theta, p) - hi).abs() <= 1e-9 * hi);
    }

    #[test]
    fn so2_msp_is_the_tangent_cube_map(t in -1.5f64..1.5) {
        prop_assume!(t.abs() > 1e-3);
        prop_assert!(verify_so2_equivalence(t).unwrap() <= 1e-10);
    }

    #[test]
    fn gap_bound_on_haar(n in 2usize..12, seed in any::<u64>()) {
        let w = haar(n, seed);
        let (eps, dist) = permutation_gap_check(&w);
        prop_assert!(eps >= -1e-12);
        // Row maxima above 1/√2 sit in distinct columns, so the matching is forced.
        let dominant = (0..n).all(|i| w.row(i).iter().any(|x| x.abs() > std::f64::consts::FRAC_1_SQRT_2));
        if dominant {
            prop_assert!(dist <= 2.0 * eps + 1e-9);
        }
    }
}
