use proptest::prelude::*;
use support_limits::numerics::*;

fn simpson(tol: f64) -> QuadratureSpec {
    QuadratureSpec::adaptive_simpson(tol)
}

// Exact binomial coefficient for small arguments, via the multiplicative
// recurrence in u128.
fn exact_binomial(n: u64, r: u64) -> u128 {
    let r = r.min(n - r);
    let mut c: u128 = 1;
    for i in 0..r {
        c = c * (n - i) as u128 / (i + 1) as u128;
    }
    c
}

#[test]
fn g_endpoints() {
    assert_eq!(g_alpha(0.0).unwrap(), 0.0);
    assert!((g_alpha(1.0).unwrap() - 1.0).abs() < 1e-12);
    assert!(g_alpha(1.2).is_err());
    assert!(g_alpha(-0.1).is_err());
}

#[test]
fn g_frozen_values() {
    // Both from SciPy quad of the defining integral (int_0^inf [alpha - F(u)]^+ du).
    assert!((g_alpha(0.5).unwrap() - 0.071_325_917_7).abs() < 1e-9);
    assert!((g_alpha(0.1).unwrap() - 5.252_517_548_7e-4).abs() < 1e-12);
}

#[test]
fn g_small_alpha_series_joins_closed_form() {
    // z = 1e-2 is the switch point; alpha = 2 Phi(z) - 1 there.
    let a = 2.0 * normal_cdf(1e-2) - 1.0;
    let below = g_alpha(a * (1.0 - 1e-9)).unwrap();
    let above = g_alpha(a * (1.0 + 1e-9)).unwrap();
    assert!((below - above).abs() < 1e-12 * a);
}

proptest! {
    #[test]
    fn g_closed_form_matches_quadrature(alpha in 0.001f64..0.999) {
        let closed = g_alpha(alpha).unwrap();
        let quad = g_alpha_quadrature(alpha, &simpson(1e-13)).unwrap();
        prop_assert!((closed - quad).abs() < 1e-9, "{closed} vs {quad}");
    }

    #[test]
    fn g_is_increasing_and_convex(a in 0.01f64..0.98, h in 0.001f64..0.01) {
        let (g0, g1, g2) = (g_alpha(a).unwrap(), g_alpha(a + h).unwrap(), g_alpha(a + 2.0 * h).unwrap());
        prop_assert!(g1 >= g0);
        prop_assert!(g2 - 2.0 * g1 + g0 >= -1e-13);
        prop_assert!(g1 <= a + h);
    }

    #[test]
    fn log_binomial_matches_exact_integers(n in 0u64..120, r in 0u64..120) {
        prop_assume!(r <= n);
        let exact = (exact_binomial(n, r) as f64).ln();
        prop_assert!((log_binomial(n, r).unwrap() - exact).abs() < 1e-9 * exact.max(1.0));
    }

    #[test]
    fn log_binomial_pascal_identity(n in 2_000u64..5_000_000, frac in 0.0005f64..0.5) {
        // C(n, r) = C(n-1, r-1) + C(n-1, r), straddling the r = 1000 regime switch.
        let r = ((n as f64 * frac) as u64).clamp(1, n - 1);
        let lhs = log_binomial(n, r).unwrap();
        let rhs = log_sum_exp(&[log_binomial(n - 1, r - 1).unwrap(), log_binomial(n - 1, r).unwrap()]);
        prop_assert!((lhs - rhs).abs() < 1e-9 * lhs.max(1.0), "{lhs} vs {rhs}");
    }

    #[test]
    fn quantile_inverts_cdf(p in 1e-12f64..(1.0 - 1e-12)) {
        let x = normal_quantile(p);
        prop_assert!((normal_cdf(x) - p).abs() < 1e-12 + 1e-9 * p);
    }

    #[test]
    fn entropy_is_symmetric_and_bounded(r in 0.0f64..=1.0) {
        let h = binary_entropy(r).unwrap();
        prop_assert!((h - binary_entropy(1.0 - r).unwrap()).abs() < 1e-14);
        prop_assert!((0.0..=std::f64::consts::LN_2 + 1e-15).contains(&h));
    }

    #[test]
    fn log_q_agrees_with_direct_log(x in -37.0f64..37.0) {
        let direct = q_function(x).ln();
        prop_assert!((log_q_function(x) - direct).abs() < 1e-9 * direct.abs().max(1.0));
    }

    #[test]
    fn chi2_quantile_inverts_cdf(alpha in 0.001f64..0.999) {
        let u = chi2_quantile_1dof(alpha).unwrap();
        prop_assert!((chi2_cdf_1dof(u).unwrap() - alpha).abs() < 1e-12);
    }

    #[test]
    fn wilson_interval_brackets_the_estimate(s in 0u64..500, extra in 0u64..500) {
        let n = s + extra + 1;
        let (lo, hi) = wilson_interval(s, n, 1.96);
        let ph = s as f64 / n as f64;
        prop_assert!(lo <= ph + 1e-15 && ph <= hi + 1e-15);
        prop_assert!((0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&hi));
    }
}

#[test]
fn entropy_rejects_non_probabilities() {
    assert!(binary_entropy(-1e-3).is_err());
    assert!(binary_entropy(1.0 + 1e-9).is_err());
    assert!((binary_entropy(0.5).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
}

#[test]
fn log_q_far_tail_is_finite() {
    // log Q(40) ~ -x^2/2 - log(x sqrt(2 pi)).
    let x = 40.0f64;
    let approx = -0.5 * x * x - (x * (2.0 * std::f64::consts::PI).sqrt()).ln() - 1.0 / (x * x);
    assert!((log_q_function(x) - approx).abs() < 1e-5);
    assert!(log_q_function(-40.0).abs() < 1e-300);
}

#[test]
fn expected_entropy_routes_agree() {
    let gh = QuadratureSpec::default();
    for c in [0.0, 0.5, 2.0, 30.0, 1000.0] {
        let a = expected_h2_of_q(c, &gh).unwrap();
        let b = expected_h2_of_q(c, &simpson(1e-12)).unwrap();
        assert!((a - b).abs() < 1e-8, "c = {c}: {a} vs {b}");
    }
    assert!((expected_h2_of_q(0.0, &gh).unwrap() - std::f64::consts::LN_2).abs() < 1e-14);
}

#[test]
fn gaussian_expectations_of_moments() {
    for quad in [QuadratureSpec::gauss_hermite(40), simpson(1e-12)] {
        assert!((gaussian_expectation(|w| w * w, &quad).unwrap() - 1.0).abs() < 1e-10);
        assert!((gaussian_expectation(|w| w.powi(4), &quad).unwrap() - 3.0).abs() < 1e-9);
        let cross = gaussian_expectation_2d(|a, b| (a * b).powi(2), &quad).unwrap();
        assert!((cross - 1.0).abs() < 1e-9);
    }
}

#[test]
fn quadrature_spec_validation() {
    assert!(QuadratureSpec::gauss_hermite(0).validate().is_err());
    assert!(simpson(0.0).validate().is_err());
    assert!(QuadratureSpec::default().validate().is_ok());
}

#[test]
fn golden_grid_prefers_the_first_minimiser() {
    // |x - 0.25| and |x - 0.75| share the minimum value; the left one is found.
    let f = |x: f64| (x - 0.25).abs().min((x - 0.75).abs());
    let (x, fx) = grid_golden_min(f, 0.0, 1.0, 101, 1e-12);
    assert!(fx < 1e-10);
    assert!((x - 0.25).abs() < 1e-9);
}

#[test]
fn log_sum_exp_edge_cases() {
    assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
    assert_eq!(log_sum_exp(&[f64::NEG_INFINITY, f64::NEG_INFINITY]), f64::NEG_INFINITY);
    assert!((log_sum_exp(&[1000.0, 1000.0]) - (1000.0 + std::f64::consts::LN_2)).abs() < 1e-12);
}
