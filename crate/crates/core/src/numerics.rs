//! Special functions, Gaussian quadrature and small optimisation helpers.
//!
//! Everything is in nats. The Gaussian expectations that dominate the 1-bit
//! computations have the form `E[H2(Q(c W))]` with `W ~ N(0, 1)`; for large `c`
//! the integrand is a spike of width `1/c`, so [`expected_h2_of_q`] rewrites it
//! against a narrower Gaussian before integrating.
//!
//! ```
//! use support_limits::numerics::{g_alpha, q_function};
//! assert!((q_function(0.0) - 0.5).abs() < 1e-15);
//! assert!((g_alpha(1.0).unwrap() - 1.0).abs() < 1e-12);
//! ```

use std::collections::HashMap;
use std::f64::consts::{PI, SQRT_2};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};
use statrs::function::erf;

use crate::error::{domain, Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadratureScheme {
    GaussHermite,
    AdaptiveSimpson,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub node_count: usize,
    pub scheme: QuadratureScheme,
    pub abs_tol: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { node_count: 96, scheme: QuadratureScheme::GaussHermite, abs_tol: 1e-10 }
    }
}

impl QuadratureSpec {
    pub fn gauss_hermite(node_count: usize) -> Self {
        Self { node_count, scheme: QuadratureScheme::GaussHermite, abs_tol: 1e-10 }
    }

    pub fn adaptive_simpson(abs_tol: f64) -> Self {
        Self { node_count: 0, scheme: QuadratureScheme::AdaptiveSimpson, abs_tol }
    }

    pub fn validate(&self) -> Result<()> {
        match self.scheme {
            QuadratureScheme::GaussHermite if self.node_count < 16 => {
                Err(domain(format!("Gauss-Hermite needs at least 16 nodes, got {}", self.node_count)))
            }
            QuadratureScheme::AdaptiveSimpson if !(self.abs_tol > 0.0) => Err(domain("adaptive Simpson needs abs_tol > 0")),
            _ => Ok(()),
        }
    }
}

// Relative perturbation applied to every binary-entropy evaluation. Zero in
// normal operation; the CLI's verify command sets it to prove its checks bite.
static ENTROPY_PERTURBATION: AtomicU64 = AtomicU64::new(0);

#[doc(hidden)]
pub fn set_entropy_perturbation(eps: f64) {
    ENTROPY_PERTURBATION.store(eps.to_bits(), Ordering::Relaxed);
}

/// Binary entropy in nats, `0 log 0 = 0`.
pub fn binary_entropy(rho: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(domain(format!("binary_entropy: {rho} is not a probability")));
    }
    Ok(h2(rho))
}

/// Unchecked binary entropy; arguments are clamped to `[0, 1]`.
pub(crate) fn h2(rho: f64) -> f64 {
    let r = rho.clamp(0.0, 1.0);
    let mut h = 0.0;
    if r > 0.0 {
        h -= r * r.ln();
    }
    if r < 1.0 {
        h -= (1.0 - r) * (-r).ln_1p();
    }
    let eps = f64::from_bits(ENTROPY_PERTURBATION.load(Ordering::Relaxed));
    if eps != 0.0 {
        h *= 1.0 + eps;
    }
    h
}

pub fn normal_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// `Q(x) = P[W >= x]`.
pub fn q_function(x: f64) -> f64 {
    0.5 * erf::erfc(x / SQRT_2)
}

pub fn normal_cdf(x: f64) -> f64 {
    q_function(-x)
}

/// `Phi^{-1}(p)` for `p` in `(0, 1)`; returns `-inf` / `+inf` at the endpoints.
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        f64::NEG_INFINITY
    } else if p >= 1.0 {
        f64::INFINITY
    } else {
        let x = -SQRT_2 * erf::erfc_inv(2.0 * p);
        // One Halley step; erfc_inv alone is good to about 1e-10 relative.
        let e = if p < 0.5 { normal_cdf(x) - p } else { (1.0 - p) - q_function(x) };
        let pdf = normal_pdf(x);
        if pdf > 0.0 {
            let u = e / pdf;
            x - u / (1.0 + 0.5 * x * u)
        } else {
            x
        }
    }
}

/// Mills ratio `Q(x) / phi(x)` by backward evaluation of Laplace's continued fraction.
/// Accurate to machine precision for `x >= 5`.
fn mills_ratio(x: f64) -> f64 {
    let mut t = x;
    for j in (1..=60).rev() {
        t = x + j as f64 / t;
    }
    1.0 / t
}

/// `log Q(x)`, finite for all `|x| <= 40` and beyond.
pub fn log_q_function(x: f64) -> f64 {
    if x > 8.0 {
        -0.5 * x * x - LN_SQRT_2PI + mills_ratio(x).ln()
    } else if x < -8.0 {
        (-q_function(-x)).ln_1p()
    } else {
        q_function(x).ln()
    }
}

/// `P[W^2 <= u]` for `W ~ N(0, 1)`.
pub fn chi2_cdf_1dof(u: f64) -> Result<f64> {
    if !(u >= 0.0) {
        return Err(domain(format!("chi2_cdf_1dof: u = {u} < 0")));
    }
    Ok(erf::erf((0.5 * u).sqrt()))
}

/// Quantile `u_alpha` of the chi-square(1) law: `(Phi^{-1}((1 + alpha) / 2))^2`.
pub fn chi2_quantile_1dof(alpha: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(domain(format!("chi2_quantile_1dof: alpha = {alpha} outside [0, 1]")));
    }
    let z = normal_quantile(0.5 * (1.0 + alpha));
    Ok(z * z)
}

/// `g(alpha) = int_0^inf [alpha - F(u)]^+ du` with `F` the chi-square(1) CDF.
///
/// Integrating by parts gives the partial mean `E[U 1{U <= u_alpha}]`, which for
/// `U = W^2` is `alpha - 2 z phi(z)` with `z = sqrt(u_alpha)`.
pub fn g_alpha(alpha: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(domain(format!("g_alpha: alpha = {alpha} outside [0, 1]")));
    }
    if alpha == 0.0 {
        return Ok(0.0);
    }
    if alpha == 1.0 {
        return Ok(1.0);
    }
    let z = normal_quantile(0.5 * (1.0 + alpha));
    if z < 1e-2 {
        // 2 int_0^z w^2 phi(w) dw, expanded to avoid cancellation.
        let z2 = z * z;
        return Ok(2.0 * INV_SQRT_2PI * z * z2 * (1.0 / 3.0 - z2 / 10.0 + z2 * z2 / 56.0));
    }
    Ok((alpha - 2.0 * z * normal_pdf(z)).max(0.0))
}

/// `g(alpha)` by direct adaptive quadrature of its defining integral. Slower
/// than [`g_alpha`]; kept as an independent route for cross-checks.
pub fn g_alpha_quadrature(alpha: f64, quad: &QuadratureSpec) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(domain(format!("g_alpha: alpha = {alpha} outside [0, 1]")));
    }
    if alpha == 0.0 {
        return Ok(0.0);
    }
    let z = normal_quantile(0.5 * (1.0 + alpha)).min(12.0);
    // u = w^2 removes the square-root cusp of F at the origin.
    let tol = if quad.abs_tol > 0.0 { quad.abs_tol } else { 1e-12 };
    adaptive_simpson(|w| (alpha - (1.0 - 2.0 * q_function(w))) * 2.0 * w, 0.0, z, tol, 16)
}

/// Adaptive Simpson integration of `f` over `[a, b]`, starting from `panels`
/// equal panels. Fails if any panel exhausts the depth limit.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64, panels: usize) -> Result<f64> {
    const MAX_DEPTH: u32 = 48;

    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        (a, fa): (f64, f64),
        (m, fm): (f64, f64),
        (b, fb): (f64, f64),
        whole: f64,
        tol: f64,
        depth: u32,
        worst: &mut f64,
    ) -> f64 {
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        if depth == 0 {
            *worst = worst.max(delta.abs() / 15.0);
            return left + right + delta / 15.0;
        }
        recurse(f, (a, fa), (lm, flm), (m, fm), left, 0.5 * tol, depth - 1, worst)
            + recurse(f, (m, fm), (rm, frm), (b, fb), right, 0.5 * tol, depth - 1, worst)
    }

    let panels = panels.max(1);
    let h = (b - a) / panels as f64;
    let panel_tol = tol / panels as f64;
    let mut worst = 0.0_f64;
    let mut total = 0.0;
    for i in 0..panels {
        let lo = a + i as f64 * h;
        let hi = if i + 1 == panels { b } else { lo + h };
        let mid = 0.5 * (lo + hi);
        let (flo, fmid, fhi) = (f(lo), f(mid), f(hi));
        let whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
        total += recurse(&f, (lo, flo), (mid, fmid), (hi, fhi), whole, panel_tol, MAX_DEPTH, &mut worst);
    }
    if worst > tol || !total.is_finite() {
        return Err(Error::NonConvergence { what: "adaptive Simpson".into(), achieved: worst });
    }
    Ok(total)
}

/// Probabilists' Gauss-Hermite rule: `E[f(W)] ~ sum_i weights[i] f(nodes[i])`.
#[derive(Debug)]
pub struct GaussHermiteRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermiteRule {
    /// Newton iteration on orthonormal Hermite polynomials with the usual
    /// asymptotic starting guesses for the largest roots.
    fn compute(n: usize) -> Self {
        let pim4 = PI.powf(-0.25);
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        let nf = n as f64;
        let mut z = 0.0_f64;
        for i in 0..n.div_ceil(2) {
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.855_75 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * x[0],
                3 => 1.91 * z - 0.91 * x[1],
                _ => 2.0 * z - x[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..100 {
                let (mut p1, mut p2) = (pim4, 0.0);
                for j in 1..=n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
                }
                pp = (2.0 * nf).sqrt() * p2;
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            x[i] = z;
            x[n - 1 - i] = -z;
            w[i] = 2.0 / (pp * pp);
            w[n - 1 - i] = w[i];
        }
        let scale = PI.sqrt().recip();
        Self { nodes: x.iter().map(|v| v * SQRT_2).collect(), weights: w.iter().map(|v| v * scale).collect() }
    }

    pub fn get(n: usize) -> Arc<Self> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussHermiteRule>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
        guard.entry(n).or_insert_with(|| Arc::new(Self::compute(n))).clone()
    }

    pub fn expect<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// `E[f(W)]` for `W ~ N(0, 1)`.
pub fn gaussian_expectation<F: Fn(f64) -> f64>(f: F, quad: &QuadratureSpec) -> Result<f64> {
    quad.validate()?;
    match quad.scheme {
        QuadratureScheme::GaussHermite => Ok(GaussHermiteRule::get(quad.node_count).expect(f)),
        QuadratureScheme::AdaptiveSimpson => adaptive_simpson(|w| f(w) * normal_pdf(w), -10.0, 10.0, quad.abs_tol, 40),
    }
}

/// `E[f(W1, W2)]` for independent standard normals, as an iterated expectation.
pub fn gaussian_expectation_2d<F: Fn(f64, f64) -> f64>(f: F, quad: &QuadratureSpec) -> Result<f64> {
    quad.validate()?;
    match quad.scheme {
        QuadratureScheme::GaussHermite => {
            let rule = GaussHermiteRule::get(quad.node_count);
            Ok(rule.expect(|a| rule.expect(|b| f(a, b))))
        }
        QuadratureScheme::AdaptiveSimpson => {
            let failure = std::cell::Cell::new(None);
            let outer = gaussian_expectation(
                |a| match gaussian_expectation(|b| f(a, b), quad) {
                    Ok(v) => v,
                    Err(e) => {
                        failure.set(Some(e));
                        0.0
                    }
                },
                quad,
            )?;
            match failure.into_inner() {
                Some(e) => Err(e),
                None => Ok(outer),
            }
        }
    }
}

/// `H2(Q(t))`.
pub fn h2_of_q(t: f64) -> f64 {
    h2(q_function(t.abs()))
}

/// `E[H2(Q(c W))]` for `W ~ N(0, 1)`.
///
/// For `c > 1`, substituting `t = c w` and factoring out `phi(t)` turns the
/// integral into `s / (c sqrt(2 pi)) E[r(s V)]` with `s = c / sqrt(1 + c^2)` and
/// `r = H2(Q(.)) / phi`, which is smooth and grows only linearly.
pub fn expected_h2_of_q(c: f64, quad: &QuadratureSpec) -> Result<f64> {
    let c = c.abs();
    if !c.is_finite() {
        return Ok(0.0);
    }
    if c <= 1.0 {
        return gaussian_expectation(|w| h2_of_q(c * w), quad);
    }
    let s = c / (1.0 + c * c).sqrt();
    let inner = gaussian_expectation(|v| h2_of_q(s * v) / normal_pdf(s * v), quad)?;
    Ok(s / c * INV_SQRT_2PI * inner)
}

/// Natural log of the binomial coefficient `C(n, r)`.
pub fn log_binomial(n: u64, r: u64) -> Result<f64> {
    if r > n {
        return Err(domain(format!("log_binomial: r = {r} > n = {n}")));
    }
    Ok(ln_choose(n, r))
}

/// `log C(n, r)`, or `-inf` when `r > n`.
pub(crate) fn ln_choose(n: u64, r: u64) -> f64 {
    if r > n {
        return f64::NEG_INFINITY;
    }
    let r = r.min(n - r);
    if r == 0 {
        return 0.0;
    }
    if r < 1000 {
        let base = (n - r) as f64;
        return (1..=r).map(|i| ((base + i as f64) / i as f64).ln()).sum();
    }
    // Both r and n - r are at least 1000: Stirling with three correction terms.
    let (nf, rf) = (n as f64, r as f64);
    let sf = nf - rf;
    let zeta = |m: f64| {
        let m2 = m * m;
        1.0 / (12.0 * m) - 1.0 / (360.0 * m * m2) + 1.0 / (1260.0 * m * m2 * m2)
    };
    rf * (nf / rf).ln() - sf * (-rf / nf).ln_1p() + 0.5 * (nf / (2.0 * PI * rf * sf)).ln() + zeta(nf) - zeta(rf) - zeta(sf)
}

/// `log(sum_i exp(x_i))`; `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Golden-section search for a minimum of a unimodal `f` on `[a, b]`.
pub fn golden_section_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    let mut iter = 0;
    while (b - a).abs() > tol && iter < 200 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
        iter += 1;
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Minimise `f` on `[lo, hi]`: scan `grid` equally spaced points, then refine
/// the best bracket by golden section. The earliest grid minimiser wins ties.
pub fn grid_golden_min<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, grid: usize, tol: f64) -> (f64, f64) {
    let grid = grid.max(3);
    let step = (hi - lo) / (grid - 1) as f64;
    let mut best = (0usize, f64::INFINITY);
    for i in 0..grid {
        let v = f(lo + step * i as f64);
        if v < best.1 {
            best = (i, v);
        }
    }
    let i = best.0;
    let a = lo + step * i.saturating_sub(1) as f64;
    let b = (lo + step * (i + 1) as f64).min(hi);
    let (x, fx) = golden_section_min(&f, a, b, tol);
    if fx <= best.1 {
        (x, fx)
    } else {
        (lo + step * i as f64, best.1)
    }
}

/// Wilson score interval for a binomial proportion at the given normal quantile.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let ph = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (ph + z2 / (2.0 * n)) / denom;
    let half = z * (ph * (1.0 - ph) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}
