//! Self-check suite: library results against independent oracles and invariants.
//!
//! Each check reports a measured deviation next to its tolerance. Oracles here
//! are written from first principles (enumeration, direct formulas, Stein's
//! identity, exact multinomial tails) so a fault in the library shows up as a
//! mismatch rather than cancelling out.

use std::f64::consts::{LN_2, PI};
use std::time::Instant;

use serde::Serialize;
use support_limits::bounds::*;
use support_limits::conc::*;
use support_limits::info::*;
use support_limits::model::*;
use support_limits::numerics::*;
use support_limits::sim::*;
use support_limits::Execution;

pub struct Ctx {
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub measured: f64,
    pub tolerance: f64,
    pub detail: String,
    pub seconds: f64,
}

struct Outcome {
    measured: f64,
    tolerance: f64,
    passed: bool,
    detail: String,
}

/// Pass when `measured <= tolerance`.
fn at_most(measured: f64, tolerance: f64, detail: impl Into<String>) -> Outcome {
    Outcome { measured, tolerance, passed: measured <= tolerance, detail: detail.into() }
}

type CheckFn = fn(&Ctx) -> support_limits::Result<Outcome>;

const CHECKS: [(&str, CheckFn); 33] = [
    ("g-alpha-endpoints", g_alpha_endpoints),
    ("g-alpha-quadrature", g_alpha_vs_quadrature),
    ("g-alpha-empirical", g_alpha_empirical),
    ("normal-quantile-roundtrip", normal_quantile_roundtrip),
    ("chi2-quantile-roundtrip", chi2_quantile_roundtrip),
    ("log-binomial-exact", log_binomial_exact),
    ("binary-entropy-direct", binary_entropy_direct),
    ("swap-constant-stein", swap_constant_stein),
    ("gt-mi-enumeration", gt_mi_enumeration),
    ("gt-density-atoms", gt_density_atoms_check),
    ("linear-mi-monte-carlo", linear_mi_monte_carlo),
    ("one-bit-mi-monte-carlo", one_bit_mi_monte_carlo),
    ("one-bit-mi-quadrature-routes", one_bit_quadrature_routes),
    ("one-bit-low-snr-slope", one_bit_low_snr_slope),
    ("gt-noiseless-coincide", gt_noiseless_coincide),
    ("gt-noiseless-gap", gt_noiseless_gap),
    ("gt-noisy-capacity", gt_noisy_capacity),
    ("gt-noise-inequality", gt_noise_inequality),
    ("one-bit-linear-pi-over-2", one_bit_linear_ratio),
    ("linear-partial-gap", linear_partial_gap),
    ("psi-nonincreasing", psi_nonincreasing),
    ("psi-dominates-empirical-tail", psi_dominates_tail),
    ("remainder-minimal", remainder_minimal),
    ("ach-dominates-conv", ach_dominates_conv),
    ("sim-deterministic", sim_deterministic),
    ("sim-partial-le-exact", sim_partial_le_exact),
    ("threshold-union-bound", threshold_union_bound),
    ("comp-vs-ml", comp_vs_ml),
    ("ml-noiseless-linear", ml_noiseless_linear),
    ("discrete-converse-fixed-point", discrete_converse_fixed_point),
    ("gt-converse-stirling", gt_converse_stirling),
    ("gt-generic-oracle", gt_generic_oracle),
    ("linear-single-item", linear_single_item),
];

pub fn check_names() -> impl Iterator<Item = &'static str> {
    CHECKS.iter().map(|c| c.0)
}

/// Run the named checks (all when `only` is empty). Unknown names are an error.
pub fn run(only: &[String], ctx: &Ctx) -> Result<Vec<CheckResult>, String> {
    if let Some(bad) = only.iter().find(|n| !CHECKS.iter().any(|c| c.0 == n.as_str())) {
        return Err(format!("unknown check `{bad}`; known checks: {}", check_names().collect::<Vec<_>>().join(", ")));
    }
    let mut out = Vec::new();
    for (name, f) in CHECKS {
        if !only.is_empty() && !only.iter().any(|n| n == name) {
            continue;
        }
        let start = Instant::now();
        let r = match f(ctx) {
            Ok(o) => CheckResult { name, passed: o.passed, measured: o.measured, tolerance: o.tolerance, detail: o.detail, seconds: 0.0 },
            Err(e) => {
                CheckResult { name, passed: false, measured: f64::NAN, tolerance: f64::NAN, detail: format!("error: {e}"), seconds: 0.0 }
            }
        };
        out.push(CheckResult { seconds: start.elapsed().as_secs_f64(), ..r });
    }
    Ok(out)
}

fn quad() -> QuadratureSpec {
    QuadratureSpec::default()
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

fn h2_direct(x: f64) -> f64 {
    let t = |v: f64| if v > 0.0 { -v * v.ln() } else { 0.0 };
    t(x) + t(1.0 - x)
}

fn g_alpha_endpoints(_: &Ctx) -> support_limits::Result<Outcome> {
    let e = g_alpha(0.0)?.abs().max((g_alpha(1.0)? - 1.0).abs());
    Ok(at_most(e, 1e-9, "|g(0)| and |g(1) - 1|"))
}

fn g_alpha_vs_quadrature(_: &Ctx) -> support_limits::Result<Outcome> {
    let mut worst = 0.0f64;
    for a in [0.01, 0.05, 0.15, 0.25, 0.35, 0.5, 0.65, 0.75, 0.85, 0.95, 0.999] {
        worst = worst.max((g_alpha(a)? - g_alpha_quadrature(a, &quad())?).abs());
    }
    Ok(at_most(worst, 1e-9, "closed form vs Gauss-Hermite truncated second moment"))
}

fn g_alpha_empirical(ctx: &Ctx) -> support_limits::Result<Outcome> {
    let alphas: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
    let rows = empirical_g_check(20_000, 20, ctx.seed, &alphas, Execution::Parallel)?;
    let worst = rows.iter().map(|r| (r.empirical - r.g_alpha).abs()).fold(0.0, f64::max);
    Ok(at_most(worst, 0.01, "sorted squared normals, k = 2e4, 20 draws"))
}

fn normal_quantile_roundtrip(_: &Ctx) -> support_limits::Result<Outcome> {
    let mut worst = 0.0f64;
    for p in [1e-300, 1e-12, 1e-6, 0.01, 0.3, 0.5, 0.7, 0.99, 1.0 - 1e-6, 1.0 - 1e-12] {
        let x = normal_quantile(p);
        let e = if p < 0.5 { (normal_cdf(x) - p).abs() / p } else { (q_function(x) - (1.0 - p)).abs() / (1.0 - p) };
        worst = worst.max(e);
    }
    Ok(at_most(worst, 1e-12, "relative error of the smaller tail"))
}

fn chi2_quantile_roundtrip(_: &Ctx) -> support_limits::Result<Outcome> {
    let mut worst = 0.0f64;
    for u in [1e-6, 0.01, 0.1, 0.5, 0.9, 0.99] {
        worst = worst.max((chi2_cdf_1dof(chi2_quantile_1dof(u)?)? - u).abs());
    }
    Ok(at_most(worst, 1e-12, "one degree of freedom"))
}

fn log_binomial_exact(_: &Ctx) -> support_limits::Result<Outcome> {
    let mut worst = 0.0f64;
    for n in 0..=60u64 {
        let mut c: u128 = 1;
        for r in 0..=n {
            if r > 0 {
                c = c * u128::from(n - r + 1) / u128::from(r);
            }
            worst = worst.max((log_binomial(n, r)? - (c as f64).ln()).abs());
        }
    }
    Ok(at_most(worst, 1e-10, "exact integer binomials, n <= 60"))
}

fn binary_entropy_direct(_: &Ctx) -> support_limits::Result<Outcome> {
    let mut worst = 0.0f64;
    for i in 0..=1000 {
        let x = i as f64 / 1000.0;
        worst = worst.max((binary_entropy(x)? - h2_direct(x)).abs());
    }
    Ok(at_most(worst, 1e-14, "-x log x - (1-x) log(1-x) on a 0.001 grid"))
}

fn swap_constant_stein(_: &Ctx) -> support_limits::Result<Outcome> {
    // E[W f(W)] = E[f'(W)] for f = log((1 - Q) / Q); the integrand is even.
    let h = 1e-4;
    let steps = 300_000;
    let f = |w: f64| {
        let q = q_function(w);
        normal_pdf(w) * normal_pdf(w) / (q * (1.0 - q))
    };
    let inner: f64 = (1..steps).map(|i| f(i as f64 * h)).sum();
    let stein = 2.0 * h * (inner + 0.5 * (f(0.0) + f(steps as f64 * h)));
    let c = swap_constant(&quad())?;
    Ok(at_most((c - stein).abs(), 1e-4, format!("{c:.9} vs {stein:.9}")))
}

/// Mutual information by enumerating every test pattern on the support.
fn gt_mi_enumerated(k: usize, ell: usize, nu: f64, rho: f64) -> f64 {
    let q = nu / k as f64;
    let m = k - ell;
    let weight = |bits: u32, len: usize| q.powi(bits.count_ones() as i32) * (1.0 - q).powi((len - bits.count_ones() as usize) as i32);
    let p_pos = |any: bool| if any { 1.0 - rho } else { rho };
    let mut mi = 0.0;
    for e in 0u32..1 << m {
        let pe = weight(e, m);
        let ref_pos: f64 = (0u32..1 << ell).map(|d| weight(d, ell) * p_pos(d | e != 0)).sum();
        for d in 0u32..1 << ell {
            let w = pe * weight(d, ell);
            let pos = p_pos(d != 0 || e != 0);
            for (py, pr) in [(pos, ref_pos), (1.0 - pos, 1.0 - ref_pos)] {
                if py > 0.0 {
                    mi += w * py * (py / pr).ln();
                }
            }
        }
    }
    mi
}

fn gt_mi_enumeration(_: &Ctx) -> support_limits::Result<Outcome> {
    let mut worst = 0.0f64;
    let mut cases = 0;
    for k in 1..=12usize {
        for nu in [0.3, LN_2, 1.5] {
            if nu > k as f64 {
                continue;
            }
            for rho in [0.0, 0.11, 0.25] {
                let b = vec![1.0; k];
                for ell in 1..=k {
                    let got = mutual_information(&ModelSpec::group_testing(rho, nu), &min_info_partition(&b, ell)?, &b, &quad())?.mi;
                    worst = worst.max((got - gt_mi_enumerated(k, ell, nu, rho)).abs());
                    cases += 1;
                }
            }
        }
    }
    Ok(at_most(worst, 1e-12, format!("{cases} cases, k <= 12")))
}

fn gt_density_atoms_check(_: &Ctx) -> support_limits::Result<Outcome> {
    let mut worst = 0.0f64;
    for k in [1usize, 5, 20, 100] {
        for ell in [1, k.div_ceil(2), k] {
            for (nu, rho) in [(0.3, 0.0), (LN_2, 0.11), (1.0, 0.25)] {
                if nu > k as f64 {
                    continue;
                }
                let atoms = gt_density_atoms(k, ell, nu, rho);
                let mass: f64 = atoms.iter().map(|a| a.0).sum();
                let mean: f64 = atoms.iter().map(|a| a.0 * a.1).sum();
                let b = vec![1.0; k];
                let mi = mutual_information(&ModelSpec::group_testing(rho, nu), &min_info_partition(&b, ell)?, &b, &quad())?.mi;
                worst = worst.max((mass - 1.0).abs()).max((mean - mi).abs());
            }
        }
    }
    Ok(at_most(worst, 1e-12, "atom mass and mean against the information"))
}

fn mi_monte_carlo(model: ModelSpec, b: [f64; 3], seed: u64) -> support_limits::Result<Outcome> {
    let mut worst = 0.0f64;
    for mask in 1..8u64 {
        let part = Partition::from_mask(3, mask);
        let exact = mutual_information(&model, &part, &b, &quad())?.mi;
        let mc = variance_mc(&model, &part, &b, 200_000, seed.wrapping_add(mask), Execution::Parallel)?;
        let InfoMethod::MonteCarlo { std_err, .. } = mc.method else { unreachable!() };
        worst = worst.max((mc.mi - exact).abs() / std_err);
    }
    Ok(at_most(worst, 4.0, "max |MC - exact| in standard errors over 7 partitions, 2e5 draws"))
}

fn linear_mi_monte_carlo(ctx: &Ctx) -> support_limits::Result<Outcome> {
    mi_monte_carlo(ModelSpec::linear(0.7), [1.0, -0.4, 0.8], ctx.seed)
}

fn one_bit_mi_monte_carlo(ctx: &Ctx) -> support_limits::Result<Outcome> {
    mi_monte_carlo(ModelSpec::one_bit(1.0), [1.0, 0.5, -0.7], ctx.seed)
}

fn one_bit_quadrature_routes(_: &Ctx) -> support_limits::Result<Outcome> {
    let simpson = QuadratureSpec::adaptive_simpson(1e-12);
    let mut worst = 0.0f64;
    for (sigma, dif, eq) in [(1.0, 1.0, 1.0), (0.5, 0.25, 2.0), (0.05, 0.25, 5.0)] {
        worst = worst.max((one_bit_mi(sigma, dif, eq, &quad())? - one_bit_mi(sigma, dif, eq, &simpson)?).abs());
    }
    Ok(at_most(worst, 1e-8, "Gauss-Hermite vs adaptive Simpson"))
}

fn one_bit_low_snr_slope(_: &Ctx) -> support_limits::Result<Outcome> {
    let b = [1.0, 0.5, -0.7];
    let part = min_info_partition(&b, 2)?;
    let mi = mutual_information(&ModelSpec::one_bit(300.0), &part, &b, &quad())?.mi;
    let approx = mi_asymptotic_1bit_lowsnr(&b, 300.0, &part)?;
    Ok(at_most(rel(mi, approx), 1e-4, "information / (energy / (pi sigma^2)) at sigma = 300"))
}

fn gt_noiseless_coincide(_: &Ctx) -> support_limits::Result<Outcome> {
    let mut worst = 0.0f64;
    for theta in [0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 1.0 / 3.0] {
        let g = cor_gt_noiseless(theta, 0.0)?;
        worst = worst.max((g.coef_ach - 1.0 / LN_2).abs()).max((g.coef_conv - 1.0 / LN_2).abs());
    }
    Ok(at_most(worst, 1e-9, "both coefficients against 1 / log 2 for theta <= 1/3"))
}

fn gt_noiseless_gap(_: &Ctx) -> support_limits::Result<Outcome> {
    let g = cor_gt_noiseless(0.4, 0.0)?;
    let gap = g.coef_ach - g.coef_conv;
    Ok(Outcome {
        measured: gap,
        tolerance: 1e-3,
        passed: gap >= 1e-3,
        detail: "achievability exceeds the converse at theta = 0.4 (minimum)".into(),
    })
}

fn gt_noisy_capacity(_: &Ctx) -> support_limits::Result<Outcome> {
    let mut worst = 0.0f64;
    for rho in [0.05, 0.11, 0.25] {
        let oracle = 1.0 / (LN_2 - h2_direct(rho));
        worst = worst.max(rel(cor_gt_noisy(1e-4, rho, 0.0)?.coef_ach, oracle)).max(rel(gt_capacity_coefficient(rho)?, oracle));
    }
    Ok(at_most(worst, 1e-9, "achievability at theta = 1e-4 against 1 / (log 2 - H2(rho))"))
}

fn gt_noise_inequality(_: &Ctx) -> support_limits::Result<Outcome> {
    let mut dev = 0.0f64;
    let mut min = f64::INFINITY;
    for i in 1..500 {
        let rho = i as f64 * 1e-3;
        let m = gt_noise_inequality_margin(rho)?;
        let oracle = (1.0 - 2.0 * rho) * ((1.0 - rho) / rho).ln() - 4.0 * (LN_2 - h2_direct(rho));
        dev = dev.max((m - oracle).abs());
        min = min.min(m);
    }
    Ok(Outcome {
        measured: dev,
        tolerance: 1e-12,
        passed: dev <= 1e-12 && min >= -1e-12,
        detail: format!("margin against direct formula; minimum margin {min:.3e}"),
    })
}

fn one_bit_linear_ratio(_: &Ctx) -> support_limits::Result<Outcome> {
    let (p, k) = (10_000usize, 3usize);
    let b = vec![1e-3; k];
    let dims = ProblemDims::new(p, k, 0, 0)?;
    let prior = SignalPrior::FixedVector { b: b.clone() };
    let o = BoundOptions { delta2: Delta2Schedule::Constant { delta2: 0.0 }, gamma_rule: GammaRule::Zero, ..BoundOptions::default() };
    let lin = achievability_threshold_generic(&ModelSpec::linear(1.0), &prior, &b, &dims, &o)?;
    let one = achievability_threshold_generic(&ModelSpec::one_bit(1.0), &prior, &b, &dims, &o)?;
    let r = one.n / lin.n;
    Ok(at_most(rel(r, PI / 2.0), 0.01, format!("threshold ratio {r:.6} at b^2 = 1e-6")))
}

fn linear_partial_gap(_: &Ctx) -> support_limits::Result<Outcome> {
    let l = cor_linear_partial(1e6, 1.0, 0.1, 0.0)?;
    let r = l.coef_ach / l.coef_conv;
    Ok(at_most(rel(r, 1.0 / 0.9), 0.02, format!("ach / conv = {r:.4} at c_beta = 1e6, alpha* = 0.1")))
}

fn families() -> Vec<(ModelSpec, Vec<f64>, TailBoundSpec)> {
    vec![
        (ModelSpec::linear(1.0), vec![1.0, 0.5, 2.0], TailBoundSpec::single(TailKind::Chebyshev, 0.5)),
        (ModelSpec::linear(0.5), vec![1.0, 0.5, 2.0], TailBoundSpec::single(TailKind::BernsteinLinear, 0.3)),
        (ModelSpec::one_bit(1.0), vec![1.0, 1.0, 1.0], TailBoundSpec::single(TailKind::BernsteinDiscrete, 0.5)),
        (ModelSpec::group_testing(0.0, 0.7), vec![1.0; 20], TailBoundSpec::group_testing(0.0)),
        (ModelSpec::group_testing(0.11, 0.7), vec![1.0; 20], TailBoundSpec::group_testing(0.11)),
    ]
}

fn psi_nonincreasing(_: &Ctx) -> support_limits::Result<Outcome> {
    let mut worst = 0.0f64;
    let mut outside = 0;
    for (model, b, spec) in families() {
        for ell in 1..=b.len() {
            let prep = spec.prepare(&model, &b, ell, &quad())?;
            let vals: Vec<f64> = (0..60).map(|i| prep.psi(10f64.powf(i as f64 / 10.0) - 1.0)).collect();
            outside += vals.iter().filter(|v| !(0.0..=1.0).contains(*v)).count();
            worst = vals.windows(2).map(|w| w[1] - w[0]).fold(worst, f64::max);
        }
    }
    Ok(Outcome {
        measured: worst,
        tolerance: 0.0,
        passed: worst <= 0.0 && outside == 0,
        detail: format!("largest increase over an n grid to 1e6; {outside} values outside [0, 1]"),
    })
}

fn psi_dominates_tail(ctx: &Ctx) -> support_limits::Result<Outcome> {
    let trials = 2000u64;
    let settings = [
        (ModelSpec::linear(1.0), vec![1.0, 0.5, 2.0], 1, TailKind::Chebyshev, 0.5),
        (ModelSpec::group_testing(0.0, LN_2), vec![1.0; 10], 10, TailKind::BernsteinDiscrete, 0.5),
        (ModelSpec::group_testing(0.0, LN_2), vec![1.0; 50], 1, TailKind::ChernoffGtNoiseless, 0.9),
    ];
    let mut worst = f64::NEG_INFINITY;
    for (idx, (model, b, ell, kind, delta2)) in settings.into_iter().enumerate() {
        let prep = TailBoundSpec::single(kind, delta2).prepare(&model, &b, ell, &quad())?;
        let n = (3..=16).map(|j| 1usize << j).find(|&n| prep.psi(n as f64) <= 0.5).unwrap_or(1 << 16);
        let bound = prep.psi(n as f64);
        let kernel = DensityKernel::new(&model, &min_info_partition(&b, ell)?, &b)?;
        let lower_only = matches!(kind, TailKind::ChernoffGtNoiseless | TailKind::BennettGtNoisy);
        let mut rng = trial_rng(ctx.seed, idx as u64);
        let mut row = vec![0.0; b.len()];
        let mut hits = 0u64;
        for _ in 0..trials {
            let sum: f64 = (0..n).map(|_| draw_density(&kernel, &model, &b, &mut row, &mut rng)).sum();
            let dev = sum - n as f64 * prep.mi;
            let lim = n as f64 * delta2 * prep.mi;
            hits += u64::from(dev <= -lim || (!lower_only && dev >= lim));
        }
        let freq = hits as f64 / trials as f64;
        let se = (freq * (1.0 - freq) / trials as f64).sqrt();
        worst = worst.max(freq - bound - 3.0 * se);
    }
    Ok(at_most(worst, 0.0, "max (empirical tail - bound - 3 SE) over three families"))
}

fn remainder_minimal(_: &Ctx) -> support_limits::Result<Outcome> {
    let mut bad = 0;
    for (model, b, spec) in families() {
        let prepared = (1..=b.len()).map(|l| spec.prepare(&model, &b, l, &quad())).collect::<support_limits::Result<Vec<_>>>()?;
        for target in [0.5, 0.05, 1e-4] {
            match remainder_n_required(&prepared, target)? {
                RemainderN::Finite(n) => {
                    bad += usize::from(ln_weighted_remainder(&prepared, n as f64) > target.ln());
                    bad += usize::from(n > 0 && ln_weighted_remainder(&prepared, (n - 1) as f64) <= target.ln());
                }
                RemainderN::Unbounded => bad += usize::from(ln_weighted_remainder(&prepared, REMAINDER_N_CAP as f64) <= target.ln()),
            }
        }
    }
    Ok(at_most(bad as f64, 0.0, "remainder n meets the target and n - 1 does not"))
}

fn ach_dominates_conv(_: &Ctx) -> support_limits::Result<Outcome> {
    let mut bad = 0usize;
    for p in [1000usize, 10_000, 1_000_000] {
        for b in [vec![1.0, 0.5, 2.0], vec![0.1; 5], vec![3.0, 0.2]] {
            let r = cor_linear_exact(&b, 1.0, p, b.len(), 0.01)?;
            bad += usize::from(r.n_ach < r.n_conv);
            let o = cor_1bit_exact_lowsnr(&b, 1.0, p, b.len(), 0.0)?;
            bad += usize::from(o.n_ach < o.n_conv);
        }
    }
    for i in 1..20 {
        let theta = i as f64 * 0.05;
        let g = cor_gt_noiseless(theta, 0.0)?;
        bad += usize::from(g.coef_ach < g.coef_conv - 1e-12);
        for rho in [0.05, 0.11, 0.25] {
            let g = cor_gt_noisy(theta, rho, 0.0)?;
            bad += usize::from(g.coef_ach < g.coef_conv - 1e-12);
        }
    }
    for snr in [-10.0, 0.0, 10.0, 20.0, 30.0, 40.0] {
        let c = c_beta_from_snr(snr, 1.0);
        let l = cor_linear_partial(c, 1.0, 0.1, 0.0)?;
        let o = cor_1bit_partial(c, 1.0, 0.1, 0.0, &quad())?;
        bad += usize::from(l.coef_ach < l.coef_conv) + usize::from(o.coef_ach < o.coef_conv);
    }
    Ok(at_most(bad as f64, 0.0, "grid points with n_ach < n_conv (exact linear pair at eta = 0.01)"))
}

fn gt() -> ModelSpec {
    ModelSpec::group_testing(0.0, LN_2)
}

fn sim_deterministic(ctx: &Ctx) -> support_limits::Result<Outcome> {
    let run = |exec| phase_sweep(&gt(), &SignalPrior::AllOnes, 10, 2, 0, &[0, 10, 25], &DecoderSpec::ExhaustiveMl, 64, ctx.seed, exec);
    let same = run(Execution::Parallel)? == run(Execution::Sequential)?;
    Ok(at_most(f64::from(u8::from(!same)), 0.0, "parallel and sequential sweeps are identical"))
}

fn sim_partial_le_exact(ctx: &Ctx) -> support_limits::Result<Outcome> {
    let r = phase_sweep(&gt(), &SignalPrior::AllOnes, 12, 4, 1, &[5, 10, 20], &DecoderSpec::CompGt, 200, ctx.seed, Execution::Parallel)?;
    let bad = r.iter().filter(|x| x.errors_partial > x.errors_exact).count();
    Ok(at_most(bad as f64, 0.0, "grid points with more partial than exact errors"))
}

/// `P[sum of n draws <= level]` for a finite distribution, by enumerating counts.
fn exact_lower_tail(atoms: &[(f64, f64)], n: usize, level: f64) -> f64 {
    fn ln_fact(n: usize) -> f64 {
        (2..=n).map(|i| (i as f64).ln()).sum()
    }
    fn rec(atoms: &[(f64, f64)], left: usize, acc: f64, ln_w: f64, level: f64, out: &mut f64) {
        let (&(v, p), rest) = atoms.split_first().expect("at least one atom");
        if rest.is_empty() {
            if acc + left as f64 * v <= level {
                *out += (ln_w + left as f64 * p.ln() - ln_fact(left)).exp();
            }
            return;
        }
        for c in 0..=left {
            rec(rest, left - c, acc + c as f64 * v, ln_w + c as f64 * p.ln() - ln_fact(c), level, out);
        }
    }
    let mut out = 0.0;
    rec(atoms, n, 0.0, ln_fact(n), level, &mut out);
    out
}

fn binom(n: usize, r: usize) -> f64 {
    (0..r).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn threshold_union_bound(ctx: &Ctx) -> support_limits::Result<Outcome> {
    let (p, k, delta1, trials) = (12usize, 2usize, 0.5, 300u64);
    let dec = DecoderSpec::Threshold { delta1, gamma_rule: GammaRule::Zero };
    let mut worst = f64::NEG_INFINITY;
    for n in [20usize, 40] {
        let r = &phase_sweep(&gt(), &SignalPrior::AllOnes, p, k, 0, &[n], &dec, trials, ctx.seed, Execution::Parallel)?[0];
        let mut bound = 0.0;
        for ell in 1..=k {
            let q = LN_2 / k as f64;
            let eq_none = (1.0 - q).powi((k - ell) as i32);
            let a = 1.0 - (1.0 - q).powi(ell as i32);
            let atoms = [(0.0, 1.0 - eq_none), (-a.ln(), eq_none * a), (-(1.0 - a).ln(), eq_none * (1.0 - a))];
            let level = 2.0 * (k as f64 / delta1).ln() + binom(p - k, ell).ln() + 2.0 * binom(k, ell).ln();
            bound += binom(k, ell) * exact_lower_tail(&atoms, n, level) + binom(p - k, ell) * binom(k, ell) * (-level).exp();
        }
        let se = (r.pe_hat * (1.0 - r.pe_hat) / trials as f64).sqrt();
        worst = worst.max(r.pe_hat - bound - 3.0 * se);
    }
    Ok(at_most(worst, 0.0, "threshold decoder error minus exact union bound minus 3 SE, p = 12, k = 2"))
}

fn comp_vs_ml(ctx: &Ctx) -> support_limits::Result<Outcome> {
    let trials = 400u64;
    let run = |d: &DecoderSpec| phase_sweep(&gt(), &SignalPrior::AllOnes, 12, 2, 0, &[8, 16], d, trials, ctx.seed, Execution::Parallel);
    let (comp, ml) = (run(&DecoderSpec::CompGt)?, run(&DecoderSpec::ExhaustiveMl)?);
    let se = |p: f64| p * (1.0 - p) / trials as f64;
    let worst = comp
        .iter()
        .zip(&ml)
        .map(|(c, m)| m.pe_hat - c.pe_hat - 3.0 * (se(c.pe_hat) + se(m.pe_hat)).sqrt())
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(at_most(worst, 0.0, "ML error minus COMP error minus 3 SE on paired trials"))
}

fn ml_noiseless_linear(ctx: &Ctx) -> support_limits::Result<Outcome> {
    let prior = SignalPrior::FixedVector { b: vec![1.0, -0.7] };
    let r = phase_sweep(&ModelSpec::linear(1e-3), &prior, 8, 2, 0, &[8], &DecoderSpec::ExhaustiveMl, 50, ctx.seed, Execution::Parallel)?;
    Ok(at_most(r[0].errors_exact as f64, 0.0, "errors with sigma = 1e-3, n = p = 8"))
}

fn discrete_converse_fixed_point(_: &Ctx) -> support_limits::Result<Outcome> {
    let (p, k, delta1, eps) = (1_000_000usize, 100usize, 0.01, 0.01);
    let model = ModelSpec::group_testing(0.11, LN_2);
    let b = vec![1.0; k];
    let dims = ProblemDims::new(p, k, 0, 0)?;
    let n = cor_general_discrete_converse(&model, &b, &dims, 2, delta1, eps, &quad())?;
    let mut rhs = 0.0f64;
    for ell in 1..=k {
        let mi = mutual_information(&model, &min_info_partition(&b, ell)?, &b, &quad())?.mi;
        let num = log_binomial((p - k + ell) as u64, ell as u64)? - delta1.ln();
        rhs = rhs.max(num / (mi + (2.0 / (n * eps)).sqrt()));
    }
    Ok(at_most(rel(rhs, n), 1e-9, format!("n = {n:.6} solves its defining equation")))
}

fn gt_converse_stirling(_: &Ctx) -> support_limits::Result<Outcome> {
    let (p, k) = (1_000_000usize, 1000usize);
    let b = vec![1.0; k];
    let dims = ProblemDims::new(p, k, 0, 0)?;
    let o = BoundOptions {
        delta1: 1.0,
        delta2: Delta2Schedule::Constant { delta2: 0.0 },
        converse_ells: Some(vec![k]),
        ..BoundOptions::default()
    };
    let c = converse_threshold_generic(&gt(), &b, &dims, &o)?;
    let (kf, pf) = (k as f64, p as f64);
    let stirling = kf * (pf / kf).ln() + kf - 0.5 * (2.0 * PI * kf).ln() - kf * kf / (2.0 * pf);
    let i_k = h2_direct((1.0 - LN_2 / kf).powi(k as i32));
    Ok(at_most(rel(c.n, stirling / i_k), 1e-3, "single-partition converse against Stirling over H2"))
}

fn gt_generic_oracle(_: &Ctx) -> support_limits::Result<Outcome> {
    let (p, k) = (1_000_000usize, 100usize);
    let dims = ProblemDims::new(p, k, 0, 0)?;
    let o = BoundOptions { delta1: 1e-3, delta2: Delta2Schedule::Constant { delta2: 0.0 }, ..BoundOptions::default() };
    let a = achievability_threshold_generic(&gt(), &SignalPrior::AllOnes, &vec![1.0; k], &dims, &o)?;
    // Independent lgamma evaluation of the same table.
    Ok(at_most(rel(a.n, 2216.320602560863), 1e-9, format!("n_ach = {:.6}", a.n)))
}

fn linear_single_item(_: &Ctx) -> support_limits::Result<Outcome> {
    let (p, b, sigma) = (500usize, 0.8f64, 0.5f64);
    let dims = ProblemDims::new(p, 1, 0, 0)?;
    let o = BoundOptions { delta1: 1e-3, delta2: Delta2Schedule::Constant { delta2: 0.1 }, ..BoundOptions::default() };
    let got = achievability_threshold_generic(&ModelSpec::linear(sigma), &SignalPrior::FixedVector { b: vec![b] }, &[b], &dims, &o)?;
    let i = 0.5 * (b * b / (sigma * sigma)).ln_1p();
    let expect = (((p - 1) as f64).ln() + 2.0 * 1e3f64.ln()) / (i * 0.9);
    Ok(at_most(rel(got.n, expect), 1e-12, "k = 1 closed form"))
}
