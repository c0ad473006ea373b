use std::f64::consts::{E, LN_2, PI};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use support_limits::bounds::*;
use support_limits::info::{mutual_information, prior_divergence_stats, swap_constant};
use support_limits::model::*;
use support_limits::numerics::{binary_entropy, expected_h2_of_q, g_alpha_quadrature, log_binomial, q_function, QuadratureSpec};
use support_limits::Execution;

fn quad() -> QuadratureSpec {
    QuadratureSpec::default()
}

fn opts(delta1: f64, delta2: f64) -> BoundOptions {
    BoundOptions { delta1, delta2: Delta2Schedule::Constant { delta2 }, ..BoundOptions::default() }
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

#[test]
fn single_item_linear_collapses_to_closed_form() {
    let (p, b, sigma) = (500usize, 0.8f64, 0.5f64);
    let dims = ProblemDims::new(p, 1, 0, 0).unwrap();
    let prior = SignalPrior::FixedVector { b: vec![b] };
    let o = opts(1e-3, 0.1);
    let got = achievability_threshold_generic(&ModelSpec::linear(sigma), &prior, &[b], &dims, &o).unwrap();
    let i = 0.5 * (b * b / (sigma * sigma)).ln_1p();
    let expect = (((p - 1) as f64).ln() + 2.0 * (1e3f64).ln()) / (i * 0.9);
    assert!(rel(got.n, expect) < 1e-12);
    assert_eq!(got.binding, Some(1.0));
}

#[test]
fn group_testing_generic_table() {
    // Independent Python evaluation of the same per-ell table (lgamma binomials).
    let (p, k) = (1_000_000usize, 100usize);
    let model = ModelSpec::group_testing(0.0, LN_2);
    let b = vec![1.0; k];
    let dims = ProblemDims::new(p, k, 0, 0).unwrap();
    let a0 = achievability_threshold_generic(&model, &SignalPrior::AllOnes, &b, &dims, &opts(1e-3, 0.0)).unwrap();
    assert!(rel(a0.n, 2216.320602560863) < 1e-9, "{}", a0.n);
    assert_eq!(a0.binding, Some(1.0));
    let a1 = achievability_threshold_generic(&model, &SignalPrior::AllOnes, &b, &dims, &opts(1e-3, 0.1)).unwrap();
    assert!(rel(a1.n, 2462.578447289848) < 1e-9);
    let last = a0.rows.last().unwrap().ratio.unwrap();
    assert!(rel(last, 1501.595868489778) < 1e-9);
    let c = converse_threshold_generic(&model, &b, &dims, &opts(1e-3, 0.1)).unwrap();
    assert!(rel(c.n, 1343.960638915932) < 1e-9);
    assert_eq!(c.binding, Some(100.0));
}

#[test]
fn largest_d_max_leaves_one_row() {
    let dims = ProblemDims::new(50, 4, 0, 3).unwrap();
    let b = [1.0, 2.0, 0.5, 1.5];
    let prior = SignalPrior::FixedVector { b: b.to_vec() };
    let r = generic_thresholds(&ModelSpec::linear(1.0), &prior, &b, &dims, &BoundOptions::default()).unwrap();
    assert_eq!(r.breakdown_ach.len(), 1);
    assert_eq!(r.breakdown_ach[0].x, 4.0);
    assert_eq!(r.breakdown_conv.len(), 1);
}

#[test]
fn converse_numerator_terms() {
    let (p, k) = (200usize, 3usize);
    let b = [1.0, 0.7, 1.2];
    let model = ModelSpec::linear(1.0);
    let dims = ProblemDims::new(p, k, 0, 0).unwrap();
    let r = converse_threshold_generic(&model, &b, &dims, &opts(1.0, 0.0)).unwrap();
    for row in &r.rows {
        let ell = row.x as u64;
        assert!((row.numerator - log_binomial((p - k) as u64 + ell, ell).unwrap()).abs() < 1e-12);
    }
    // The subtracted sum at d_max = 0 is C(p-k, 0) C(ell, 0) = 1.
    assert_eq!(ln_partial_subtraction(p, k, 2, 0), 0.0);
    let d1 = ProblemDims::new(p, k, 0, 1).unwrap();
    let expect = (1.0 + (p - k) as f64 * 2.0).ln();
    assert!((ln_partial_subtraction(p, k, 2, d1.d_max) - expect).abs() < 1e-12);
}

#[test]
fn group_testing_converse_against_stirling_form() {
    // L = {k}: log C(p, k) over I_k; Stirling gives k log(p/k) + k - log(2 pi k)/2 - k^2/(2p).
    let (p, k) = (1_000_000usize, 1000usize);
    let b = vec![1.0; k];
    let dims = ProblemDims::new(p, k, 0, 0).unwrap();
    let o = BoundOptions { converse_ells: Some(vec![k]), ..opts(1.0, 0.0) };
    let nu = LN_2;
    let c = converse_threshold_generic(&ModelSpec::group_testing(0.0, nu), &b, &dims, &o).unwrap();
    let (kf, pf) = (k as f64, p as f64);
    let stirling = kf * (pf / kf).ln() + kf - 0.5 * (2.0 * PI * kf).ln() - kf * kf / (2.0 * pf);
    let i_k = binary_entropy((1.0 - nu / kf).powi(k as i32)).unwrap();
    assert!(rel(c.n, stirling / i_k) < 1e-3, "{} vs {}", c.n, stirling / i_k);
    assert!(rel(c.n, 11_401.450173681673) < 1e-9);
}

#[test]
fn gamma_rules() {
    let dims = ProblemDims::new(100, 10, 100, 0).unwrap();
    let gt = ModelSpec::group_testing(0.0, 1.0);
    let lin = ModelSpec::linear(1.0);
    assert_eq!(gamma_select(GammaRule::Zero, &gt, &SignalPrior::AllOnes, &dims).unwrap(), 0.0);
    let ones = SignalPrior::permuted(vec![2.0; 10]);
    assert_eq!(gamma_select(GammaRule::Discrete, &lin, &ones, &dims).unwrap(), 0.0);
    assert_eq!(gamma_select(GammaRule::Zero, &lin, &ones, &dims).unwrap(), 0.0);
    let gauss = SignalPrior::IidGaussian { sigma_beta_sq: 0.5 };
    assert!(gamma_select(GammaRule::Zero, &lin, &gauss, &dims).is_err());
    assert!(gamma_select(GammaRule::Discrete, &lin, &gauss, &dims).is_err());
    let s = prior_divergence_stats(&lin, &gauss, &dims).unwrap();
    let cheb = gamma_select(GammaRule::Chebyshev { delta0: 0.01 }, &lin, &gauss, &dims).unwrap();
    assert!((cheb - (s.i0_bound + (s.v0_bound / 0.01).sqrt())).abs() < 1e-12);
    let markov = gamma_select(GammaRule::Markov { delta0: 0.01 }, &lin, &gauss, &dims).unwrap();
    assert!((markov - s.i0plus_bound / 0.01).abs() < 1e-12);
    // Two values, four copies each out of k = 8: log of 8! / (4! 4!) = log 70.
    let two = SignalPrior::permuted(vec![1.0, 2.0, 1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
    let d8 = ProblemDims::new(100, 8, 0, 0).unwrap();
    assert!((gamma_select(GammaRule::Discrete, &lin, &two, &d8).unwrap() - 70f64.ln()).abs() < 1e-12);
}

#[test]
fn fano_bound_regions() {
    let (p, k) = (1000usize, 4usize);
    let b = [1.0, 0.5, 2.0, 1.0];
    let model = ModelSpec::linear(1.0);
    let tail = 1.0 / ((p - k + 1) as f64).ln();
    let far = fano_lower_bound(&model, &b, &ProblemDims::new(p, k, 1_000_000, 0).unwrap(), 0.5, &quad()).unwrap();
    assert_eq!(far.pe_lower, 0.0);
    let near = fano_lower_bound(&model, &b, &ProblemDims::new(p, k, 0, 0).unwrap(), 0.5, &quad()).unwrap();
    assert!((near.pe_lower - (0.5 - tail)).abs() < 1e-15);
    assert!(near.pe_lower < 1.0);
    assert!(near.boundary_n > 0.0 && near.boundary_n.is_finite());
}

#[test]
fn linear_exact_single_item_and_convergence() {
    let r = cor_linear_exact(&[1.0], 1.0, 1000, 1, 0.0).unwrap();
    let i = 0.5 * 2f64.ln();
    assert!(rel(r.n_ach, 999f64.ln() / i) < 1e-12);
    assert!(rel(r.n_conv, 1000f64.ln() / i) < 1e-12);
    let r = cor_linear_exact(&[1.0], 1.0, 1000, 1, 0.2).unwrap();
    assert!(rel(r.n_ach, 1.2 * 999f64.ln() / i) < 1e-12);
    let b = [0.6, 1.0, 1.4];
    let ratios: Vec<f64> = [1e3, 1e6, 1e9]
        .iter()
        .map(|&p| {
            let r = cor_linear_exact(&b, 1.0, p as usize, 3, 0.0).unwrap();
            r.n_ach / r.n_conv
        })
        .collect();
    assert!(ratios.windows(2).all(|w| (w[1] - 1.0).abs() < (w[0] - 1.0).abs()), "{ratios:?}");
    assert!((ratios[2] - 1.0).abs() < 1e-2);
    assert!(r_notes_mention_fixed_k(&b));
}

fn r_notes_mention_fixed_k(b: &[f64]) -> bool {
    let r = cor_linear_exact(b, 1.0, 1000, b.len(), 0.0).unwrap();
    r.notes.iter().any(|n| n.contains("fixed k"))
}

#[test]
fn linear_validity_outside_every_regime() {
    // k = 40 distinct values with p = 100: none of the four regimes applies.
    let b: Vec<f64> = (1..=40).map(|i| i as f64).collect();
    let r = cor_linear_exact(&b, 1.0, 100, 40, 0.0).unwrap();
    assert_eq!(r.notes, vec!["outside stated validity".to_string()]);
    assert!(!LinearValidity::assess(&b, 100).any());
}

#[test]
fn lasso_constant_is_attained_at_one() {
    for c in [0.1, 1.0, 10.0, 1e4] {
        let (sup, arg) = linear_lasso_constant(c).unwrap();
        assert_eq!(arg, 1.0);
        assert!(rel(sup, 2.0 / c.ln_1p()) < 1e-12);
    }
}

// Dense-grid maximization over alpha with g by quadrature of its defining
// integral, then ternary refinement: an oracle sharing no code with the
// closed-form g or the golden-section search.
fn oracle_linear_partial(c_beta: f64, alpha_star: f64) -> (f64, f64) {
    let simpson = QuadratureSpec::adaptive_simpson(1e-13);
    let den = |a: f64| 0.5 * (c_beta * g_alpha_quadrature(a, &simpson).unwrap()).ln_1p();
    let maximize = |f: &dyn Fn(f64) -> f64| {
        let m = 2000;
        let xs: Vec<f64> = (0..=m).map(|i| alpha_star + (1.0 - alpha_star) * i as f64 / m as f64).collect();
        let i = (0..=m).max_by(|&a, &b| f(xs[a]).total_cmp(&f(xs[b]))).unwrap();
        let (mut lo, mut hi) = (xs[i.saturating_sub(1)], xs[(i + 1).min(m)]);
        for _ in 0..100 {
            let (m1, m2) = (lo + (hi - lo) / 3.0, hi - (hi - lo) / 3.0);
            if f(m1) < f(m2) {
                lo = m1;
            } else {
                hi = m2;
            }
        }
        f(0.5 * (lo + hi)).max(f(xs[i]))
    };
    (maximize(&|a| a / den(a)), maximize(&|a| (a - alpha_star) / den(a)))
}

#[test]
fn linear_partial_matches_independent_maximization() {
    for snr in [10.0, -10.0, 25.0] {
        let c = c_beta_from_snr(snr, 1.0);
        let got = cor_linear_partial(c, 1.0, 0.1, 0.0).unwrap();
        let (a, v) = oracle_linear_partial(c, 0.1);
        assert!(rel(got.coef_ach, a) < 1e-7, "snr {snr}: {} vs {a}", got.coef_ach);
        assert!(rel(got.coef_conv, v) < 1e-7, "snr {snr}: {} vs {v}", got.coef_conv);
    }
    // SciPy quad + bounded scalar search at +10 dB.
    let got = cor_linear_partial(10.0, 1.0, 0.1, 0.0).unwrap();
    assert!(rel(got.coef_ach, 38.176891610913) < 1e-7);
    assert!(rel(got.coef_conv, 5.668608702223) < 1e-7);
}

#[test]
fn linear_partial_edge_behaviour() {
    let near_one = cor_linear_partial(100.0, 1.0, 0.999, 0.0).unwrap();
    assert!(near_one.coef_conv < 1e-2 * near_one.coef_ach);
    assert_eq!(near_one.curve.len(), 101);
    assert!(cor_linear_partial(100.0, 1.0, 0.0, 0.0).is_err());
    assert!(cor_linear_partial(-1.0, 1.0, 0.1, 0.0).is_err());
}

#[test]
fn one_bit_lowsnr_tie_rule_and_scaling() {
    let b = [1e-2; 4];
    let r = cor_1bit_exact_lowsnr(&b, 1.0, 1000, 4, 0.0).unwrap();
    assert_eq!(r.binding_ach, Some(1.0));
    let b2 = [2f64.sqrt() * 1e-2; 4];
    let r2 = cor_1bit_exact_lowsnr(&b2, 1.0, 1000, 4, 0.0).unwrap();
    assert!(rel(r.n_ach / r2.n_ach, 2.0) < 1e-12);
    let expected = 1000f64.ln() / (1e-4 / PI);
    assert!(rel(r.n_ach, expected) < 1e-12);
}

#[test]
fn one_bit_highsnr_converse_scaling() {
    let at = |p: usize, k: usize, b0: f64, eta: f64| cor_1bit_highsnr_converse(b0, 1.0, p, k, eta, &quad()).unwrap();
    assert_eq!(at(1000, 10, 1.0, 1.0), 0.0);
    // Quadrupling b0^2 doubles the denominator.
    assert!(rel(at(1000, 10, 1.0, 0.0) / at(1000, 10, 2.0, 0.0), 2.0) < 1e-12);
    // k = p / 10 and b0^2 = log p / p make the value exactly proportional to
    // p sqrt(log p).
    let c = swap_constant(&quad()).unwrap();
    for p in [10_000usize, 100_000, 1_000_000] {
        let pf = p as f64;
        let v = at(p, p / 10, (pf.ln() / pf).sqrt(), 0.0);
        let expect = 2.0 * (2.0 * PI / 10.0).sqrt() / c * pf * pf.ln().sqrt();
        assert!(rel(v, expect) < 1e-10, "p {p}: {v} vs {expect}");
    }
}

#[test]
fn psi_function_endpoints() {
    let c = 7.0;
    let endpoint = psi_function_1bit(1.0, c, 1.0, &quad()).unwrap();
    let expect = LN_2 - expected_h2_of_q(c.sqrt(), &quad()).unwrap();
    assert!((endpoint - expect).abs() < 1e-12);
    assert!(psi_function_1bit(0.4, 1e-10, 1.0, &quad()).unwrap() < 1e-9);
    for a in [0.05, 0.3, 0.9] {
        let v = psi_function_1bit(a, 1e3, 1.0, &quad()).unwrap();
        assert!((0.0..=LN_2).contains(&v));
    }
}

fn h2_direct(r: f64) -> f64 {
    let mut h = 0.0;
    if r > 0.0 {
        h -= r * r.ln();
    }
    if r < 1.0 {
        h -= (1.0 - r) * (1.0 - r).ln();
    }
    h
}

#[test]
fn psi_function_matches_monte_carlo() {
    let (alpha, c) = (0.5, 10.0f64);
    let g: f64 = 0.0713259177;
    let t = (c * (1.0 - g) / (1.0 + c * g)).sqrt();
    let s = c.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let n = 10_000_000u64;
    let (mut sum, mut sq) = (0.0, 0.0);
    for _ in 0..n {
        let w: f64 = StandardNormal.sample(&mut rng);
        let d = h2_direct(q_function(t * w)) - h2_direct(q_function(s * w));
        sum += d;
        sq += d * d;
    }
    let mean = sum / n as f64;
    let se = ((sq / n as f64 - mean * mean) / n as f64).sqrt();
    let v = psi_function_1bit(alpha, c, 1.0, &quad()).unwrap();
    assert!((v - mean).abs() < 3.0 * se, "{v} vs {mean} (se {se})");
    // SciPy quad of the two entropies.
    assert!((v - 0.066208731014).abs() < 1e-9);
}

#[test]
fn one_bit_partial_coefficients() {
    for snr in [-10.0, 0.0, 10.0, 30.0] {
        let r = cor_1bit_partial(c_beta_from_snr(snr, 1.0), 1.0, 0.1, 0.0, &quad()).unwrap();
        assert!(r.coef_ach >= 0.1 / LN_2);
        assert!(r.coef_ach >= r.coef_conv);
    }
    // SciPy route (quad for g and both entropies, bounded scalar search).
    let lin = cor_linear_partial(0.1, 1.0, 0.1, 0.0).unwrap();
    let one = cor_1bit_partial(0.1, 1.0, 0.1, 0.0, &quad()).unwrap();
    assert!(rel(lin.coef_ach, 3807.797891497) < 1e-6);
    assert!(rel(one.coef_ach, 6196.260548777) < 1e-6);
    assert!(rel(one.coef_conv, 914.378734371) < 1e-6);
    let one10 = cor_1bit_partial(10.0, 1.0, 0.1, 0.0, &quad()).unwrap();
    assert!(rel(one10.coef_ach, 177.271566969) < 1e-6);
}

#[test]
fn group_testing_noiseless_coefficients() {
    for theta in [0.05, 0.1, 0.2, 1.0 / 3.0] {
        let g = cor_gt_noiseless(theta, 0.0).unwrap();
        assert!((g.coef_ach - 1.0 / LN_2).abs() < 1e-9, "theta {theta}");
        assert!((g.coef_conv - 1.0 / LN_2).abs() < 1e-15);
    }
    let g = cor_gt_noiseless(1.0 / 3.0, 0.0).unwrap();
    assert!((g.argmin - LN_2).abs() < 1e-3);
    // At theta = 1/2 the first branch 1 / (nu e^{-nu}) dominates, minimized at nu = 1.
    let half = cor_gt_noiseless(0.5, 0.0).unwrap();
    assert!((half.coef_ach - E).abs() < 1e-9);
    // 10^4-point grid over (0, 5].
    let obj = |nu: f64| {
        let e = (-nu).exp();
        (1.0 / (e * nu)).max(1.0 / h2_direct(e))
    };
    let grid_min = (1..=10_000).map(|i| obj(5.0 * i as f64 / 1e4)).fold(f64::INFINITY, f64::min);
    assert!(half.coef_ach <= grid_min + 1e-12 && grid_min - half.coef_ach < 1e-6);
    assert!(cor_gt_noiseless(0.4, 0.0).unwrap().coef_ach > 1.0 / LN_2 + 1e-3);
}

#[test]
fn group_testing_noisy_coefficients() {
    for rho in [0.05, 0.11, 0.25] {
        let g = cor_gt_noisy(0.01, rho, 0.0).unwrap();
        assert!((g.coef_ach - g.coef_conv).abs() < 1e-9);
        assert!((g.coef_conv - 1.0 / (LN_2 - h2_direct(rho))).abs() < 1e-12);
        assert!(cor_gt_noisy(0.5, rho, 0.0).unwrap().coef_ach > g.coef_conv);
    }
    for i in 1..500 {
        let rho = i as f64 / 1000.0;
        assert!(gt_noise_inequality_margin(rho).unwrap() >= -1e-12, "rho {rho}");
    }
    let rho: f64 = 0.11;
    let lhs = (1.0 - 2.0 * rho) * ((1.0 - rho) / rho).ln();
    let rhs = 4.0 * (LN_2 - h2_direct(rho));
    assert!((lhs - 1.631).abs() < 1e-3 && (rhs - 1.386).abs() < 1e-3);
    assert!((gt_noise_inequality_margin(rho).unwrap() - (lhs - rhs)).abs() < 1e-12);
}

#[test]
fn group_testing_partial_coefficients() {
    let (a, c) = cor_gt_partial(0.11, 0.0, 0.0).unwrap();
    assert_eq!(a, c);
    let (a, c) = cor_gt_partial(0.0, 0.2, 0.0).unwrap();
    assert!((a - 1.0 / LN_2).abs() < 1e-15 && (c - 0.8 / LN_2).abs() < 1e-15);
    let (a, c) = cor_gt_partial(0.2, 0.3, 0.0).unwrap();
    assert!((c / a - 0.7).abs() < 1e-15);
}

#[test]
fn discrete_converse_fixed_point() {
    let (p, k) = (1_000_000usize, 100usize);
    let model = ModelSpec::group_testing(0.11, LN_2);
    let b = vec![1.0; k];
    let dims = ProblemDims::new(p, k, 0, 0).unwrap();
    let limit = cor_general_discrete_converse(&model, &b, &dims, 2, 0.01, f64::INFINITY, &quad()).unwrap();
    let generic = converse_threshold_generic(&model, &b, &dims, &opts(0.01, 0.0)).unwrap();
    assert!(rel(limit, generic.n) < 1e-12);
    let n = cor_general_discrete_converse(&model, &b, &dims, 2, 0.01, 0.01, &quad()).unwrap();
    assert!(n <= limit);
    // Python brentq root of the same equation.
    assert!(rel(n, 1414.911897612061) < 1e-9, "{n}");
    // The returned n solves the defining equation.
    let f = |n: f64| {
        (1..=k)
            .map(|ell| {
                let part = min_info_partition(&b, ell).unwrap();
                let mi = mutual_information(&model, &part, &b, &quad()).unwrap().mi;
                let num = log_binomial((p - k + ell) as u64, ell as u64).unwrap() - 0.01f64.ln();
                num / (mi + (2.0 / (n * 0.01)).sqrt())
            })
            .fold(0.0, f64::max)
    };
    assert!(rel(f(n), n) < 1e-9);
    // Halving eps multiplies the additive term by sqrt 2, so the fixed point drops.
    let n_half = cor_general_discrete_converse(&model, &b, &dims, 2, 0.01, 0.005, &quad()).unwrap();
    assert!(n_half < n);
}

#[test]
fn figure_tables() {
    let thetas: Vec<f64> = (1..=19).map(|i| i as f64 * 0.05).collect();
    let fo = FigureOptions::default();
    let rows = figure_curves(Figure::GtNoiselessTheta, &thetas, &fo).unwrap();
    assert_eq!(rows.len(), 38);
    for r in &rows {
        if r.curve == "conv-rate-bits" || r.x <= 1.0 / 3.0 {
            assert!((r.y - 1.0).abs() < 1e-9, "{r:?}");
        }
    }
    let ach: Vec<&CurveRow> = rows.iter().filter(|r| r.curve == "ach-rate-bits" && r.x > 1.0 / 3.0).collect();
    assert!(ach.windows(2).all(|w| w[1].y < w[0].y));

    let noisy = figure_curves(Figure::GtNoisyTheta, &[0.01, 0.2], &fo).unwrap();
    assert_eq!(noisy.len(), 12);
    let conv = noisy.iter().find(|r| r.curve == "conv-rate-bits-rho=0.11").unwrap();
    assert!((conv.y - (1.0 - 0.34651 / LN_2)).abs() < 1e-4);
    assert!((conv.y - 0.5001).abs() < 1e-4);

    let snr = figure_curves(Figure::PartialRecoverySnr, &[40.0], &fo).unwrap();
    let y = |name: &str| snr.iter().find(|r| r.curve == name).unwrap().y;
    assert!((y("linear-ach-coef") / y("linear-conv-coef") - 1.11).abs() < 0.01);

    let seq = FigureOptions { exec: Execution::Sequential, ..FigureOptions::default() };
    assert_eq!(figure_curves(Figure::GtNoisyTheta, &[0.2, 0.01], &seq).unwrap(), noisy);
}

#[test]
fn achievability_dominates_converse_on_grids() {
    // At finite p the exact linear pair differs by log C(p-k+ell, ell) - log C(p-k, ell),
    // about ell^2 / p, in the converse's favour; the eta margin absorbs it.
    for p in [1000usize, 10_000, 1_000_000] {
        for b in [vec![1.0, 0.5, 2.0], vec![0.1; 5], vec![3.0, 0.2]] {
            let r = cor_linear_exact(&b, 1.0, p, b.len(), 0.01).unwrap();
            assert!(r.n_ach >= r.n_conv, "p {p} b {b:?}");
            let bare = cor_linear_exact(&b, 1.0, p, b.len(), 0.0).unwrap();
            assert!(bare.n_conv / bare.n_ach - 1.0 < 0.01);
            let o = cor_1bit_exact_lowsnr(&b, 1.0, p, b.len(), 0.0).unwrap();
            assert!(o.n_ach >= o.n_conv);
        }
    }
    for i in 1..20 {
        let theta = i as f64 * 0.05;
        let g = cor_gt_noiseless(theta, 0.0).unwrap();
        assert!(g.coef_ach >= g.coef_conv - 1e-12);
        for rho in [0.05, 0.11, 0.25] {
            let g = cor_gt_noisy(theta, rho, 0.0).unwrap();
            assert!(g.coef_ach >= g.coef_conv - 1e-12);
        }
    }
    for snr in [-10.0, 0.0, 10.0, 20.0, 30.0, 40.0] {
        let c = c_beta_from_snr(snr, 1.0);
        let l = cor_linear_partial(c, 1.0, 0.1, 0.0).unwrap();
        assert!(l.coef_ach >= l.coef_conv);
        let o = cor_1bit_partial(c, 1.0, 0.1, 0.0, &quad()).unwrap();
        assert!(o.coef_ach >= o.coef_conv);
    }
    // Generic pair with delta2 = 0 on both sides.
    for (p, k) in [(1000usize, 5usize), (100_000, 20)] {
        let b = vec![1.0; k];
        let dims = ProblemDims::new(p, k, 0, 0).unwrap();
        let r = generic_thresholds(&ModelSpec::group_testing(0.0, LN_2), &SignalPrior::AllOnes, &b, &dims, &opts(1e-3, 0.0)).unwrap();
        assert!(r.n_ach >= r.n_conv);
    }
}

#[test]
fn remainder_condition_raises_achievability() {
    let (p, k) = (10_000usize, 10usize);
    let b = vec![1.0; k];
    let dims = ProblemDims::new(p, k, 0, 0).unwrap();
    let model = ModelSpec::group_testing(0.0, LN_2);
    let base = BoundOptions { delta2: Delta2Schedule::Split { small: 0.9, large: 0.1 }, ..BoundOptions::default() };
    let plain = generic_thresholds(&model, &SignalPrior::AllOnes, &b, &dims, &base).unwrap();
    let with = BoundOptions { remainder_target: Some(0.05), ..base.clone() };
    let r = generic_thresholds(&model, &SignalPrior::AllOnes, &b, &dims, &with).unwrap();
    let rem = r.remainder_n.unwrap().as_f64();
    assert_eq!(r.n_ach, plain.n_ach.max(rem));
    let zero = BoundOptions { delta2: Delta2Schedule::Constant { delta2: 0.0 }, remainder_target: Some(0.05), ..base };
    assert!(generic_thresholds(&model, &SignalPrior::AllOnes, &b, &dims, &zero).is_err());
}

#[test]
fn option_validation() {
    let bad = [
        BoundOptions { delta1: 0.0, ..BoundOptions::default() },
        BoundOptions { delta2: Delta2Schedule::Constant { delta2: 1.0 }, ..BoundOptions::default() },
        BoundOptions { eta: 1.5, ..BoundOptions::default() },
        BoundOptions { gamma_rule: GammaRule::Markov { delta0: 0.0 }, ..BoundOptions::default() },
    ];
    for o in bad {
        assert!(o.validate().is_err(), "{o:?}");
    }
    let dims = ProblemDims::new(100, 3, 0, 1).unwrap();
    let o = BoundOptions { converse_ells: Some(vec![1]), ..BoundOptions::default() };
    assert!(converse_threshold_generic(&ModelSpec::linear(1.0), &[1.0; 3], &dims, &o).is_err());
}

#[test]
fn asymptotic_mode_uses_ell_log_p_over_k() {
    let (p, k) = (10_000usize, 4usize);
    let b = [1.0, 1.0, 1.0, 1.0];
    let dims = ProblemDims::new(p, k, 0, 0).unwrap();
    let o = BoundOptions { asymptotic: true, ..opts(1.0, 0.0) };
    let c = converse_threshold_generic(&ModelSpec::linear(1.0), &b, &dims, &o).unwrap();
    for row in &c.rows {
        assert!((row.numerator - row.x * (p as f64 / k as f64).ln()).abs() < 1e-12);
    }
}
