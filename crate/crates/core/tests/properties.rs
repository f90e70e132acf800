//! Invariants of the public API under random inputs.

use hqlab::degiorgi::degiorgi_threshold;
use hqlab::fake_boundary::solve_b_prime;
use hqlab::hermitian::HMat;
use hqlab::pointwise::{cone_margin, eigenvalues_rel, HermitianPoint};
use hqlab::solver::{richardson_limit, stability_compare, uniqueness_gap};
use hqlab::symmetric::elementary_sym;
use hqlab::torus::{ScalarField, TorusGrid};
use proptest::prelude::*;

fn grid() -> TorusGrid {
    TorusGrid::new(2, 4).unwrap()
}

fn field() -> impl Strategy<Value = ScalarField> {
    prop::collection::vec(-3.0f64..3.0, grid().len()).prop_map(|v| ScalarField::new(grid(), v).unwrap())
}

proptest! {
    #[test]
    fn sym_is_homogeneous(lambda in prop::collection::vec(0.01f64..10.0, 1..6), s in 0.1f64..10.0, k in 0isize..6) {
        let scaled: Vec<f64> = lambda.iter().map(|l| s * l).collect();
        let lhs = elementary_sym(k, &scaled);
        let rhs = s.powi(k as i32) * elementary_sym(k, &lambda);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
    }

    #[test]
    fn relative_eigenvalues_scale_inversely_with_metric(d in prop::collection::vec(0.1f64..5.0, 2..5), s in 0.2f64..5.0) {
        let x = HMat::from_diag(&d);
        let n = d.len();
        let base = eigenvalues_rel(&HermitianPoint::new(x, HMat::identity(n)).unwrap());
        let scaled = eigenvalues_rel(&HermitianPoint::new(x, HMat::scaled_identity(n, s)).unwrap());
        for (a, b) in base.values().iter().zip(scaled.values()) {
            prop_assert!((a / s - b).abs() <= 1e-12 * a.max(1.0));
        }
    }

    #[test]
    fn cone_margin_scales_with_the_form(mu in prop::collection::vec(0.05f64..5.0, 2..5), c in 0.1f64..3.0, s in 0.2f64..5.0) {
        let n = mu.len();
        for m in 1..n {
            let scaled: Vec<f64> = mu.iter().map(|x| s * x).collect();
            // χ → sχ scales c by s^{n−m} and the margin by s^{n−1}
            let a = cone_margin(&mu, c, m);
            let b = cone_margin(&scaled, c * s.powi((n - m) as i32), m);
            let expected = s.powi(n as i32 - 1) * a;
            prop_assert!((expected - b).abs() <= 1e-10 * expected.abs().max(1.0), "m = {m}: {expected} vs {b}");
        }
    }

    #[test]
    fn uniqueness_gap_ignores_constants(phi in field(), k in -10.0f64..10.0) {
        let mask = vec![true; grid().len()];
        let shifted = phi.map(|v| v + k);
        prop_assert!(uniqueness_gap(&phi, &shifted, &mask).unwrap() <= 1e-12);
    }

    #[test]
    fn positive_part_norm_is_dominated(phi1 in field(), phi2 in field(), q in 1.1f64..6.0) {
        let rho = vec![1.0; grid().len()];
        let r = stability_compare(&phi1, &phi2, &rho, q).unwrap();
        prop_assert!(r.norm_positive <= r.norm_full * (1.0 + 1e-14));
        prop_assert!(r.c_implied >= 0.0 || r.sup_diff < 0.0);
    }

    #[test]
    fn richardson_removes_linear_term(a in field(), b in field(), t in 0.001f64..0.5) {
        let at = |t: f64| a.add_scaled(t, &b).unwrap();
        let lim = richardson_limit(&at(t), &at(2.0 * t)).unwrap();
        let err = lim.zip_map(&a, |x, y| x - y).unwrap().sup_abs();
        prop_assert!(err <= 1e-12);
    }

    #[test]
    fn b_prime_solves_its_equation(theta0 in 0.01f64..20.0, n in 2usize..5) {
        for m in 0..n {
            let b = solve_b_prime(theta0, n, m).unwrap();
            let p = n as f64 / (n - m) as f64;
            prop_assert!(b < 0.0);
            prop_assert!((b.exp() + theta0 * (p * b).exp() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn threshold_grows_with_constant(alpha in 0.1f64..4.0, beta in 1.05f64..4.0, c in 0.01f64..10.0, phi0 in 0.01f64..10.0) {
        let lo = degiorgi_threshold(alpha, beta, c, phi0, 0.0).unwrap();
        let hi = degiorgi_threshold(alpha, beta, 2.0 * c, phi0, 0.0).unwrap();
        prop_assert!(hi > lo && lo > 0.0);
    }
}
