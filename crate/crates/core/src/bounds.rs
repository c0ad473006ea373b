//! Measurement-count thresholds.
//!
//! Three layers:
//! * the generic partition-wise conditions for a fixed `b`, maximized over the
//!   `k` minimum-information partitions (one per `|s_dif|`);
//! * closed-form asymptotic coefficients for the linear, 1-bit and group
//!   testing models, most of them multiples of `k log(p / k)`;
//! * curve tables assembled from those coefficients.
//!
//! All logarithms are natural. Rates for group testing curves are converted to
//! base 2 at the very end, and the curve names say so.

use serde::{Deserialize, Serialize};

use crate::conc::{remainder_n_required, RemainderN, TailBoundSpec, DEFAULT_EPS};
use crate::error::{config, domain, Error, Result};
use crate::info::{mutual_information, prior_divergence_stats, swap_constant};
use crate::model::{c_beta_from_snr, max_info_partition, min_info_partition, ModelSpec, ProblemDims, SignalPrior};
use crate::numerics::{
    binary_entropy, expected_h2_of_q, g_alpha, golden_section_min, grid_golden_min, ln_choose, log_sum_exp, QuadratureSpec,
};
use crate::par::{map_slice, Execution};

const LN_2: f64 = std::f64::consts::LN_2;

pub const DEFAULT_DELTA1: f64 = 1e-3;
pub const DEFAULT_DELTA2: f64 = 0.1;

/// Grid size for maximizations over `alpha`.
pub const ALPHA_GRID: usize = 10_000;
/// Coarse bracket grid for minimizations over `nu` and `delta2`.
pub const PARAM_GRID: usize = 256;
const ARG_TOL: f64 = 1e-10;

/// How the constant `gamma` absorbing the `beta`-averaging loss is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum GammaRule {
    /// `log(1 / min P(b))` for a discrete prior.
    Discrete,
    /// `I0 + sqrt(V0 / delta0)`.
    Chebyshev { delta0: f64 },
    /// `I0+ / delta0`.
    Markov { delta0: f64 },
    /// Deterministic `beta`.
    Zero,
}

/// `delta2` per partition size. `Split` switches at `floor(k / ln k)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Delta2Schedule {
    Constant { delta2: f64 },
    Split { small: f64, large: f64 },
}

impl Delta2Schedule {
    pub fn at(&self, k: usize, ell: usize) -> f64 {
        match *self {
            Delta2Schedule::Constant { delta2 } => delta2,
            Delta2Schedule::Split { small, large } => {
                if ell > TailBoundSpec::split_point(k) {
                    large
                } else {
                    small
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |d: f64| (0.0..1.0).contains(&d);
        let fine = match *self {
            Delta2Schedule::Constant { delta2 } => ok(delta2),
            Delta2Schedule::Split { small, large } => ok(small) && ok(large),
        };
        if fine {
            Ok(())
        } else {
            Err(domain("delta2 must lie in [0, 1)"))
        }
    }

    /// The tail bound family used for the remainder condition under this schedule.
    pub fn tail_spec(&self, model: &ModelSpec) -> TailBoundSpec {
        let base = TailBoundSpec::for_model(model, 0.5);
        let large_kind = base.large_ell.map_or(base.kind, |(kind, _)| kind);
        match *self {
            Delta2Schedule::Constant { delta2 } => TailBoundSpec { delta2, large_ell: None, ..base },
            Delta2Schedule::Split { small, large } => {
                TailBoundSpec { kind: base.kind, delta2: small, large_ell: Some((large_kind, large)), eps: DEFAULT_EPS }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundOptions {
    pub delta1: f64,
    pub delta2: Delta2Schedule,
    pub gamma_rule: GammaRule,
    /// Achievability is scaled by `1 + eta`, the converse by `1 - eta`.
    pub eta: f64,
    /// Replace every log-binomial in the numerators by `ell log(p / k)`.
    pub asymptotic: bool,
    /// Partition sizes for the converse; `None` means every `ell > d_max`.
    pub converse_ells: Option<Vec<usize>>,
    /// When set, `n_ach` is also raised to the remainder condition at this target.
    pub remainder_target: Option<f64>,
    pub quad: QuadratureSpec,
}

impl Default for BoundOptions {
    fn default() -> Self {
        Self {
            delta1: DEFAULT_DELTA1,
            delta2: Delta2Schedule::Constant { delta2: DEFAULT_DELTA2 },
            gamma_rule: GammaRule::Discrete,
            eta: 0.0,
            asymptotic: false,
            converse_ells: None,
            remainder_target: None,
            quad: QuadratureSpec::default(),
        }
    }
}

impl BoundOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta1 > 0.0 && self.delta1 <= 1.0) {
            return Err(domain("delta1 must lie in (0, 1]"));
        }
        self.delta2.validate()?;
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(domain("eta must lie in [0, 1]"));
        }
        if let GammaRule::Chebyshev { delta0 } | GammaRule::Markov { delta0 } = self.gamma_rule {
            if !(delta0 > 0.0 && delta0 < 1.0) {
                return Err(domain("delta0 must lie in (0, 1)"));
            }
        }
        if let Some(t) = self.remainder_target {
            if !(t > 0.0) {
                return Err(domain("remainder target must be positive"));
            }
        }
        self.quad.validate()
    }
}

/// One row of a per-`ell` (or per-`alpha`) table. `ratio` is `None` where the
/// converse is vacuous at that row and the row was skipped.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BreakdownRow {
    pub x: f64,
    pub numerator: f64,
    pub mi: f64,
    pub ratio: Option<f64>,
}

/// One side of a threshold: the maximized ratio and where it was attained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SideThreshold {
    pub n: f64,
    pub binding: Option<f64>,
    pub rows: Vec<BreakdownRow>,
}

impl SideThreshold {
    /// Whether the ratio is unbounded (some required `ell` carries no information).
    pub fn unrecoverable(&self) -> bool {
        self.n == f64::INFINITY
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub n_ach: f64,
    pub n_conv: f64,
    pub binding_ach: Option<f64>,
    pub binding_conv: Option<f64>,
    pub breakdown_ach: Vec<BreakdownRow>,
    pub breakdown_conv: Vec<BreakdownRow>,
    pub remainder_n: Option<RemainderN>,
    /// Free-form qualifiers, such as which validity regimes the inputs fall in.
    pub notes: Vec<String>,
}

/// Largest ratio, earliest row on ties; `None` rows are skipped.
fn max_ratio(rows: &[BreakdownRow]) -> (f64, Option<f64>) {
    let mut best = (f64::NEG_INFINITY, None);
    for r in rows {
        if let Some(v) = r.ratio {
            if v > best.0 {
                best = (v, Some(r.x));
            }
        }
    }
    if best.1.is_none() {
        (0.0, None)
    } else {
        best
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 || den.is_nan() {
        num / den
    } else {
        f64::INFINITY
    }
}

/// `gamma` under `rule` for the prior, so that the averaging loss vanishes (or
/// is at most `delta0`).
pub fn gamma_select(rule: GammaRule, model: &ModelSpec, prior: &SignalPrior, dims: &ProblemDims) -> Result<f64> {
    let deterministic = match prior {
        SignalPrior::FixedVector { .. } | SignalPrior::AllOnes => true,
        SignalPrior::PermutedVector { m_beta, .. } => *m_beta == 1,
        SignalPrior::IidGaussian { .. } => false,
    };
    match rule {
        GammaRule::Zero if deterministic => Ok(0.0),
        GammaRule::Zero => Err(config("gamma = 0 needs a deterministic beta")),
        GammaRule::Discrete => match prior {
            SignalPrior::FixedVector { .. } | SignalPrior::AllOnes => Ok(0.0),
            // min P(b) is one over the number of distinct orderings, which is
            // at least m_beta^{-k}.
            SignalPrior::PermutedVector { b, .. } => Ok(ln_distinct_orderings(b)),
            SignalPrior::IidGaussian { .. } => Err(config("the discrete gamma rule needs a discrete prior")),
        },
        GammaRule::Chebyshev { delta0 } => {
            let s = prior_divergence_stats(model, prior, dims)?;
            Ok(s.i0_bound + (s.v0_bound / delta0).sqrt())
        }
        GammaRule::Markov { delta0 } => {
            let s = prior_divergence_stats(model, prior, dims)?;
            Ok(s.i0plus_bound / delta0)
        }
    }
}

fn ln_distinct_orderings(b: &[f64]) -> f64 {
    let mut v: Vec<u64> = b.iter().map(|x| x.to_bits()).collect();
    v.sort_unstable();
    let ln_fact = |m: usize| (1..=m).map(|i| (i as f64).ln()).sum::<f64>();
    let mut total = ln_fact(v.len());
    for run in v.chunk_by(|a, b| a == b) {
        total -= ln_fact(run.len());
    }
    total
}

fn check_generic(model: &ModelSpec, b: &[f64], dims: &ProblemDims, opts: &BoundOptions) -> Result<()> {
    dims.validate()?;
    opts.validate()?;
    model.validate(dims.k)?;
    if b.len() != dims.k {
        return Err(domain(format!("b has length {}, expected k = {}", b.len(), dims.k)));
    }
    Ok(())
}

/// `(ell, I(b))` at the minimum-information partition of each size.
fn min_info_per_ell(model: &ModelSpec, b: &[f64], ells: &[usize], quad: &QuadratureSpec) -> Result<Vec<(usize, f64)>> {
    ells.iter()
        .map(|&ell| {
            let part = min_info_partition(b, ell)?;
            Ok((ell, mutual_information(model, &part, b, quad)?.mi))
        })
        .collect()
}

fn binomial_term(n: usize, r: usize, p: usize, k: usize, asymptotic: bool) -> f64 {
    if asymptotic {
        r as f64 * (p as f64 / k as f64).ln()
    } else {
        ln_choose(n as u64, r as u64)
    }
}

/// Sufficient `n`: max over `ell > d_max` of
/// `[log C(p-k, ell) + log(k^2 C(k, ell)^2 / delta1^2) + gamma] / [I_ell (1 - delta2)]`.
pub fn achievability_threshold_generic(
    model: &ModelSpec,
    prior: &SignalPrior,
    b: &[f64],
    dims: &ProblemDims,
    opts: &BoundOptions,
) -> Result<SideThreshold> {
    check_generic(model, b, dims, opts)?;
    let gamma = gamma_select(opts.gamma_rule, model, prior, dims)?;
    let (p, k) = (dims.p, dims.k);
    let ells: Vec<usize> = (dims.d_max + 1..=k).collect();
    let mis = min_info_per_ell(model, b, &ells, &opts.quad)?;
    let rows: Vec<BreakdownRow> = mis
        .iter()
        .map(|&(ell, mi)| {
            let numerator = binomial_term(p - k, ell, p, k, opts.asymptotic)
                + 2.0 * ((k as f64).ln() - opts.delta1.ln() + ln_choose(k as u64, ell as u64))
                + gamma;
            let den = mi * (1.0 - opts.delta2.at(k, ell));
            BreakdownRow { x: ell as f64, numerator, mi, ratio: Some(ratio(numerator, den)) }
        })
        .collect();
    let (n, binding) = max_ratio(&rows);
    Ok(SideThreshold { n: n * (1.0 + opts.eta), binding, rows })
}

/// `log sum_{d <= d_max} C(p-k, d) C(ell, d)`.
pub fn ln_partial_subtraction(p: usize, k: usize, ell: usize, d_max: usize) -> f64 {
    let terms: Vec<f64> = (0..=d_max.min(ell)).map(|d| ln_choose((p - k) as u64, d as u64) + ln_choose(ell as u64, d as u64)).collect();
    log_sum_exp(&terms)
}

/// Necessary `n` (strong converse): max over `ell` in the converse set of
/// `[log C(p-k+ell, ell) - log sum_{d <= d_max} C(p-k, d) C(ell, d) - log delta1] / [I_ell (1 + delta2)]`.
///
/// An `ell` whose subtracted mass reaches the main term is recorded with no
/// ratio and skipped.
pub fn converse_threshold_generic(model: &ModelSpec, b: &[f64], dims: &ProblemDims, opts: &BoundOptions) -> Result<SideThreshold> {
    check_generic(model, b, dims, opts)?;
    let (p, k) = (dims.p, dims.k);
    let ells: Vec<usize> = match &opts.converse_ells {
        Some(set) => {
            if set.iter().any(|&l| l <= dims.d_max || l > k) {
                return Err(domain(format!("converse partition sizes must lie in {}..={k}", dims.d_max + 1)));
            }
            let mut s = set.clone();
            s.sort_unstable();
            s.dedup();
            s
        }
        None => (dims.d_max + 1..=k).collect(),
    };
    let mis = min_info_per_ell(model, b, &ells, &opts.quad)?;
    let rows: Vec<BreakdownRow> = mis
        .iter()
        .map(|&(ell, mi)| {
            let main = binomial_term(p - k + ell, ell, p, k, opts.asymptotic);
            let net = if dims.d_max == 0 { main } else { main - ln_partial_subtraction(p, k, ell, dims.d_max) };
            let numerator = net - opts.delta1.ln();
            let r = (net > 0.0).then(|| ratio(numerator, mi * (1.0 + opts.delta2.at(k, ell))));
            BreakdownRow { x: ell as f64, numerator, mi, ratio: r }
        })
        .collect();
    let (n, binding) = max_ratio(&rows);
    Ok(SideThreshold { n: n * (1.0 - opts.eta), binding, rows })
}

/// Both generic sides, plus the remainder condition when requested.
pub fn generic_thresholds(
    model: &ModelSpec,
    prior: &SignalPrior,
    b: &[f64],
    dims: &ProblemDims,
    opts: &BoundOptions,
) -> Result<ThresholdResult> {
    let ach = achievability_threshold_generic(model, prior, b, dims, opts)?;
    let conv = converse_threshold_generic(model, b, dims, opts)?;
    let mut n_ach = ach.n;
    let remainder_n = match opts.remainder_target {
        Some(target) => {
            let spec = opts.delta2.tail_spec(model);
            if spec.delta2 == 0.0 || spec.large_ell.is_some_and(|(_, d)| d == 0.0) {
                return Err(domain("the remainder condition needs delta2 > 0"));
            }
            let prepared = (dims.d_max + 1..=dims.k).map(|l| spec.prepare(model, b, l, &opts.quad)).collect::<Result<Vec<_>>>()?;
            let r = remainder_n_required(&prepared, target)?;
            n_ach = n_ach.max(r.as_f64());
            Some(r)
        }
        None => None,
    };
    Ok(ThresholdResult {
        n_ach,
        n_conv: conv.n,
        binding_ach: ach.binding,
        binding_conv: conv.binding,
        breakdown_ach: ach.rows,
        breakdown_conv: conv.rows,
        remainder_n,
        notes: Vec::new(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FanoBound {
    pub pe_lower: f64,
    /// `min over ell of log C(p-k+ell, ell) / I_ell (1 - delta2)`, using the
    /// maximum-information partition of each size.
    pub boundary_n: f64,
    pub region: String,
}

/// Weak-converse baseline: `delta2 1{n <= boundary} - 1 / log(p - k + 1)`,
/// clipped at zero.
pub fn fano_lower_bound(model: &ModelSpec, b: &[f64], dims: &ProblemDims, delta2: f64, quad: &QuadratureSpec) -> Result<FanoBound> {
    dims.validate()?;
    model.validate(dims.k)?;
    if !(0.0..1.0).contains(&delta2) {
        return Err(domain("delta2 must lie in [0, 1)"));
    }
    let (p, k) = (dims.p, dims.k);
    let mut boundary = f64::INFINITY;
    for ell in 1..=k {
        let part = max_info_partition(b, ell)?;
        let mi = mutual_information(model, &part, b, quad)?.mi;
        boundary = boundary.min(ratio(ln_choose((p - k + ell) as u64, ell as u64), mi) * (1.0 - delta2));
    }
    let inside = (dims.n as f64) <= boundary;
    let tail = if p - k + 1 > 1 { 1.0 / ((p - k + 1) as f64).ln() } else { f64::INFINITY };
    let raw = if inside { delta2 } else { 0.0 } - tail;
    Ok(FanoBound { pe_lower: raw.max(0.0), boundary_n: boundary, region: format!("n <= {boundary:.6e}") })
}

/// Which of the four regimes of the linear exact-recovery result the inputs
/// resemble. The regimes are asymptotic, so each flag is a finite proxy:
/// (i) `k <= 10`; (ii) `k < ln p` with at most 3 distinct values;
/// (iii) a single value with `k <= (ln p)^2`; (iv) a single value with
/// `b_min^2` within a factor 10 of `ln k / k` and `k >= 10`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinearValidity {
    pub fixed_k: bool,
    pub sublog_k: bool,
    pub polylog_k: bool,
    pub power_k: bool,
}

impl LinearValidity {
    pub fn assess(b: &[f64], p: usize) -> Self {
        let k = b.len();
        let kf = k as f64;
        let lnp = (p as f64).ln();
        let m_beta = crate::model::distinct_count(b);
        let b_min_sq = b.iter().map(|v| v * v).fold(f64::INFINITY, f64::min);
        let target = if k > 1 { kf.ln() / kf } else { 0.0 };
        Self {
            fixed_k: k <= 10,
            sublog_k: kf < lnp && m_beta <= 3,
            polylog_k: m_beta == 1 && kf <= lnp * lnp,
            power_k: m_beta == 1 && k >= 10 && b_min_sq <= 10.0 * target && b_min_sq >= target / 10.0,
        }
    }

    pub fn any(&self) -> bool {
        self.fixed_k || self.sublog_k || self.polylog_k || self.power_k
    }

    fn labels(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (on, name) in [
            (self.fixed_k, "regime (i): fixed k"),
            (self.sublog_k, "regime (ii): k below log p, few distinct values"),
            (self.polylog_k, "regime (iii): polylogarithmic k, equal values"),
            (self.power_k, "regime (iv): power-law k, equal values of order log k / k"),
        ] {
            if on {
                out.push(name.to_string());
            }
        }
        if out.is_empty() {
            out.push("outside stated validity".to_string());
        }
        out
    }
}

fn sorted_squares(b: &[f64]) -> Vec<f64> {
    let mut sq: Vec<f64> = b.iter().map(|v| v * v).collect();
    sq.sort_by(f64::total_cmp);
    sq
}

fn check_exact_inputs(b: &[f64], sigma: f64, p: usize, k: usize, eta: f64) -> Result<()> {
    if b.len() != k || k == 0 || k > p {
        return Err(domain(format!("need b of length k with 1 <= k <= p (k = {k}, p = {p}, len = {})", b.len())));
    }
    if !(sigma > 0.0) {
        return Err(domain("sigma must be positive"));
    }
    if !(0.0..=1.0).contains(&eta) {
        return Err(domain("eta must lie in [0, 1]"));
    }
    Ok(())
}

/// Exact-recovery thresholds for the linear model with known `b` (up to order):
/// `max_ell log C(p-k, ell) / (1/2 log(1 + sum of the ell smallest b^2 / sigma^2))`,
/// and the same with `C(p-k+ell, ell)` for the converse.
pub fn cor_linear_exact(b: &[f64], sigma: f64, p: usize, k: usize, eta: f64) -> Result<ThresholdResult> {
    check_exact_inputs(b, sigma, p, k, eta)?;
    let sq = sorted_squares(b);
    let s2 = sigma * sigma;
    let mut acc = 0.0;
    let mut ach = Vec::with_capacity(k);
    let mut conv = Vec::with_capacity(k);
    for ell in 1..=k {
        acc += sq[ell - 1];
        let mi = 0.5 * (acc / s2).ln_1p();
        let na = ln_choose((p - k) as u64, ell as u64);
        let nc = ln_choose((p - k + ell) as u64, ell as u64);
        ach.push(BreakdownRow { x: ell as f64, numerator: na, mi, ratio: Some(ratio(na, mi)) });
        conv.push(BreakdownRow { x: ell as f64, numerator: nc, mi, ratio: Some(ratio(nc, mi)) });
    }
    let (na, ba) = max_ratio(&ach);
    let (nc, bc) = max_ratio(&conv);
    Ok(ThresholdResult {
        n_ach: na * (1.0 + eta),
        n_conv: nc * (1.0 - eta),
        binding_ach: ba,
        binding_conv: bc,
        breakdown_ach: ach,
        breakdown_conv: conv,
        remainder_n: None,
        notes: LinearValidity::assess(b, p).labels(),
    })
}

/// `sup over alpha in (0, 1] of alpha / (1/2 log(1 + c_beta alpha))` on a
/// [`ALPHA_GRID`]-point grid, with its maximizer. The supremum is `2 / log(1 + c_beta)`
/// at `alpha = 1`, the constant to compare against LASSO.
pub fn linear_lasso_constant(c_beta: f64) -> Result<(f64, f64)> {
    if !(c_beta > 0.0) {
        return Err(domain("c_beta must be positive"));
    }
    let mut best = (f64::NEG_INFINITY, 0.0);
    for i in 1..=ALPHA_GRID {
        let a = i as f64 / ALPHA_GRID as f64;
        let v = a / (0.5 * (c_beta * a).ln_1p());
        if v > best.0 {
            best = (v, a);
        }
    }
    Ok(best)
}

/// Coefficients of `k log(p / k)` for partial recovery with `d_max = floor(alpha* k)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartialCoefficients {
    pub coef_ach: f64,
    pub coef_conv: f64,
    pub alpha_ach: f64,
    pub alpha_conv: f64,
    /// `(alpha, achievability ratio, converse ratio)` at 101 points of `[alpha*, 1]`.
    pub curve: Vec<(f64, f64, f64)>,
}

/// Maximize `f` on `[lo, hi]`: [`ALPHA_GRID`] points, the earliest grid maximizer
/// on ties, then golden-section refinement inside its neighbouring cells.
fn alpha_argmax<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> (f64, f64) {
    let step = (hi - lo) / (ALPHA_GRID - 1) as f64;
    let at = |i: usize| if i + 1 == ALPHA_GRID { hi } else { lo + step * i as f64 };
    let mut best = (0usize, f64::NEG_INFINITY);
    for i in 0..ALPHA_GRID {
        let v = f(at(i));
        if v > best.1 {
            best = (i, v);
        }
    }
    let i = best.0;
    let a = at(i.saturating_sub(1));
    let b = at((i + 1).min(ALPHA_GRID - 1));
    let (x, neg) = golden_section_min(|t| -f(t.clamp(lo, hi)), a, b, ARG_TOL);
    if -neg > best.1 {
        (x.clamp(lo, hi), -neg)
    } else {
        (at(i), best.1)
    }
}

fn check_partial(c_beta: f64, sigma: f64, alpha_star: f64, eta: f64) -> Result<()> {
    if !(c_beta > 0.0 && sigma > 0.0) {
        return Err(domain("c_beta and sigma must be positive"));
    }
    if !(alpha_star > 0.0 && alpha_star < 1.0) {
        return Err(domain("alpha* must lie in (0, 1)"));
    }
    if !(0.0..=1.0).contains(&eta) {
        return Err(domain("eta must lie in [0, 1]"));
    }
    Ok(())
}

fn partial_from_denominator<D: Fn(f64) -> f64>(den: D, alpha_star: f64, eta: f64) -> PartialCoefficients {
    let ach = |a: f64| ratio(a, den(a));
    let conv = |a: f64| ratio(a - alpha_star, den(a));
    let (alpha_ach, coef_ach) = alpha_argmax(ach, alpha_star, 1.0);
    let (alpha_conv, coef_conv) = alpha_argmax(conv, alpha_star, 1.0);
    let curve = (0..=100)
        .map(|i| {
            let a = alpha_star + (1.0 - alpha_star) * i as f64 / 100.0;
            (a, ach(a), conv(a))
        })
        .collect();
    PartialCoefficients { coef_ach: coef_ach * (1.0 + eta), coef_conv: coef_conv * (1.0 - eta), alpha_ach, alpha_conv, curve }
}

/// Linear partial recovery: denominators `1/2 log(1 + c_beta g(alpha) / sigma^2)`.
pub fn cor_linear_partial(c_beta: f64, sigma: f64, alpha_star: f64, eta: f64) -> Result<PartialCoefficients> {
    check_partial(c_beta, sigma, alpha_star, eta)?;
    let s2 = sigma * sigma;
    let den = |a: f64| 0.5 * (c_beta * g_alpha(a).unwrap_or(f64::NAN) / s2).ln_1p();
    Ok(partial_from_denominator(den, alpha_star, eta))
}

/// Exact recovery in the 1-bit model at low SNR:
/// `max_ell ell log p / (sum of the ell smallest b^2 / (pi sigma^2))`, scaled by `1 + eta`
/// and `1 - eta`.
pub fn cor_1bit_exact_lowsnr(b: &[f64], sigma: f64, p: usize, k: usize, eta: f64) -> Result<ThresholdResult> {
    check_exact_inputs(b, sigma, p, k, eta)?;
    let sq = sorted_squares(b);
    let scale = 1.0 / (std::f64::consts::PI * sigma * sigma);
    let lnp = (p as f64).ln();
    let mut acc = 0.0;
    let rows: Vec<BreakdownRow> = (1..=k)
        .map(|ell| {
            acc += sq[ell - 1];
            let numerator = ell as f64 * lnp;
            let mi = scale * acc;
            BreakdownRow { x: ell as f64, numerator, mi, ratio: Some(ratio(numerator, mi)) }
        })
        .collect();
    let (n, binding) = max_ratio(&rows);
    Ok(ThresholdResult {
        n_ach: n * (1.0 + eta),
        n_conv: n * (1.0 - eta),
        binding_ach: binding,
        binding_conv: binding,
        breakdown_ach: rows.clone(),
        breakdown_conv: rows,
        remainder_n: None,
        notes: Vec::new(),
    })
}

/// Converse for the 1-bit model with `k` equal entries `b0` at high SNR:
/// `log p / (1/2 (b0^2/sigma^2) / sqrt(2 pi k b0^2/sigma^2) E[W log((1-Q(W))/Q(W))]) (1 - eta)`.
pub fn cor_1bit_highsnr_converse(b0: f64, sigma: f64, p: usize, k: usize, eta: f64, quad: &QuadratureSpec) -> Result<f64> {
    if !(b0 != 0.0 && b0.is_finite() && sigma > 0.0) || k == 0 || k > p {
        return Err(domain("need b0 != 0, sigma > 0 and 1 <= k <= p"));
    }
    if !(0.0..=1.0).contains(&eta) {
        return Err(domain("eta must lie in [0, 1]"));
    }
    let snr = b0 * b0 / (sigma * sigma);
    let den = 0.5 * snr / (2.0 * std::f64::consts::PI * k as f64 * snr).sqrt() * swap_constant(quad)?;
    Ok((p as f64).ln() / den * (1.0 - eta))
}

/// `E[H2(Q(W sqrt(c (1 - g) / (sigma^2 + c g))))] - E[H2(Q(W sqrt(c) / sigma))]`
/// with `g = g(alpha)`; lies in `[0, log 2]`.
pub fn psi_function_1bit(alpha: f64, c_beta: f64, sigma: f64, quad: &QuadratureSpec) -> Result<f64> {
    let second = expected_h2_of_q((c_beta / (sigma * sigma)).sqrt(), quad)?;
    psi_with_second(alpha, c_beta, sigma, second, quad)
}

fn psi_with_second(alpha: f64, c_beta: f64, sigma: f64, second: f64, quad: &QuadratureSpec) -> Result<f64> {
    if !(c_beta >= 0.0 && sigma > 0.0) {
        return Err(domain("need c_beta >= 0 and sigma > 0"));
    }
    let g = g_alpha(alpha)?;
    let t = (c_beta * (1.0 - g) / (sigma * sigma + c_beta * g)).max(0.0).sqrt();
    let first = expected_h2_of_q(t, quad)?;
    Ok((first - second).clamp(0.0, LN_2))
}

/// 1-bit partial recovery: denominators `Psi(alpha, c_beta, sigma)`.
pub fn cor_1bit_partial(c_beta: f64, sigma: f64, alpha_star: f64, eta: f64, quad: &QuadratureSpec) -> Result<PartialCoefficients> {
    check_partial(c_beta, sigma, alpha_star, eta)?;
    quad.validate()?;
    let second = expected_h2_of_q((c_beta / (sigma * sigma)).sqrt(), quad)?;
    let failed = std::cell::Cell::new(None);
    let den = |a: f64| match psi_with_second(a, c_beta, sigma, second, quad) {
        Ok(v) => v,
        Err(e) => {
            failed.set(Some(e));
            f64::NAN
        }
    };
    let out = partial_from_denominator(den, alpha_star, eta);
    match failed.take() {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GtCoefficients {
    pub coef_ach: f64,
    pub coef_conv: f64,
    /// The minimizing design parameter (`nu` noiseless, `delta2` noisy).
    pub argmin: f64,
}

fn check_theta(theta: f64, eta: f64) -> Result<()> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(domain("theta must lie in (0, 1)"));
    }
    if !(0.0..=1.0).contains(&eta) {
        return Err(domain("eta must lie in [0, 1]"));
    }
    Ok(())
}

/// Upper end of the search interval for `nu`.
pub const NU_MAX: f64 = 5.0;

/// Noiseless group testing with `k = Theta(p^theta)`:
/// `inf over nu of max{theta / (e^{-nu} nu (1 - theta)), 1 / H2(e^{-nu})}` against `1 / log 2`.
pub fn cor_gt_noiseless(theta: f64, eta: f64) -> Result<GtCoefficients> {
    check_theta(theta, eta)?;
    let r = theta / (1.0 - theta);
    let obj = |nu: f64| {
        let e = (-nu).exp();
        (r / (e * nu)).max(1.0 / crate::numerics::h2(e))
    };
    let (nu, v) = grid_golden_min(obj, NU_MAX / PARAM_GRID as f64, NU_MAX, PARAM_GRID, ARG_TOL);
    Ok(GtCoefficients { coef_ach: v * (1.0 + eta), coef_conv: (1.0 - eta) / LN_2, argmin: nu })
}

/// The concentration coefficient of the noisy group testing achievability bound.
pub fn gt_zeta(rho: f64, delta2: f64, theta: f64) -> f64 {
    let c = 1.0 - 2.0 * rho;
    let t = theta / (1.0 - theta);
    let first = 2.0 * (1.0 + delta2 * c / 3.0) * t / (delta2 * delta2 * c * c);
    let second = (1.0 + 4.0 * theta) / (1.0 - theta) / (c * ((1.0 - rho) / rho).ln() * (1.0 - delta2));
    2.0 / LN_2 * first.max(second)
}

fn check_rho_open(rho: f64) -> Result<()> {
    if !(rho > 0.0 && rho < 0.5) {
        return Err(domain("rho must lie in (0, 0.5)"));
    }
    Ok(())
}

/// `1 / (log 2 - H2(rho))`.
pub fn gt_capacity_coefficient(rho: f64) -> Result<f64> {
    if !(0.0..0.5).contains(&rho) {
        return Err(domain("rho must lie in [0, 0.5)"));
    }
    Ok(1.0 / (LN_2 - binary_entropy(rho)?))
}

/// Noisy group testing with `nu = log 2`:
/// `inf over delta2 of max{zeta(rho, delta2, theta), 1 / (log 2 - H2(rho))}`.
pub fn cor_gt_noisy(theta: f64, rho: f64, eta: f64) -> Result<GtCoefficients> {
    check_theta(theta, eta)?;
    check_rho_open(rho)?;
    let cap = gt_capacity_coefficient(rho)?;
    let obj = |d: f64| gt_zeta(rho, d, theta).max(cap);
    let lo = 1.0 / PARAM_GRID as f64;
    let (d, v) = grid_golden_min(obj, lo, 1.0 - lo, PARAM_GRID, ARG_TOL);
    Ok(GtCoefficients { coef_ach: v * (1.0 + eta), coef_conv: cap * (1.0 - eta), argmin: d })
}

/// Margin `(1 - 2 rho) log((1 - rho) / rho) - 4 (log 2 - H2(rho))`, nonnegative on `(0, 1/2)`.
pub fn gt_noise_inequality_margin(rho: f64) -> Result<f64> {
    check_rho_open(rho)?;
    Ok((1.0 - 2.0 * rho) * ((1.0 - rho) / rho).ln() - 4.0 * (LN_2 - binary_entropy(rho)?))
}

/// Group testing partial recovery with `nu = log 2`: `(1, 1 - alpha*) / (log 2 - H2(rho))`.
pub fn cor_gt_partial(rho: f64, alpha_star: f64, eta: f64) -> Result<(f64, f64)> {
    if !(0.0..1.0).contains(&alpha_star) {
        return Err(domain("alpha* must lie in [0, 1)"));
    }
    if !(0.0..=1.0).contains(&eta) {
        return Err(domain("eta must lie in [0, 1]"));
    }
    let cap = gt_capacity_coefficient(rho)?;
    Ok((cap * (1.0 + eta), (1.0 - alpha_star) * cap * (1.0 - eta)))
}

const FIXED_POINT_MAX_ITER: usize = 100_000;

/// Converse for any model with a finite output alphabet: the fixed point
/// `n = max_ell [log C(p-k+ell, ell) - log delta1] / [I_ell + sqrt(|Y| / (n eps))]`.
/// Below it the error probability tends to one.
pub fn cor_general_discrete_converse(
    model: &ModelSpec,
    b: &[f64],
    dims: &ProblemDims,
    alphabet_size: usize,
    delta1: f64,
    eps: f64,
    quad: &QuadratureSpec,
) -> Result<f64> {
    dims.validate()?;
    model.validate(dims.k)?;
    if b.len() != dims.k {
        return Err(domain("b must have length k"));
    }
    if alphabet_size < 2 || !(delta1 > 0.0 && delta1 <= 1.0) || !(eps > 0.0) {
        return Err(domain("need |Y| >= 2, delta1 in (0, 1] and eps > 0"));
    }
    let (p, k) = (dims.p, dims.k);
    let ells: Vec<usize> = (1..=k).collect();
    let terms: Vec<(f64, f64)> = min_info_per_ell(model, b, &ells, quad)?
        .into_iter()
        .map(|(ell, mi)| (ln_choose((p - k + ell) as u64, ell as u64) - delta1.ln(), mi))
        .collect();
    let f = |n: f64| {
        let extra = if eps.is_infinite() { 0.0 } else { (alphabet_size as f64 / (n * eps)).sqrt() };
        terms.iter().map(|&(num, mi)| ratio(num, mi + extra)).fold(0.0, f64::max)
    };
    // f is increasing and bounded by its eps -> infinity limit, so iterating
    // downwards from that limit converges monotonically to the largest fixed point.
    let mut n = f(f64::INFINITY);
    if !n.is_finite() {
        return Ok(n);
    }
    for _ in 0..FIXED_POINT_MAX_ITER {
        let next = f(n);
        if (n - next).abs() <= 1e-12 * n.max(1.0) {
            return Ok(next);
        }
        n = next;
    }
    Err(Error::NonConvergence { what: "discrete converse fixed point".into(), achieved: (f(n) - n).abs() })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Figure {
    /// Partial recovery coefficients against SNR in dB.
    PartialRecoverySnr,
    /// Noiseless group testing rates against theta.
    GtNoiselessTheta,
    /// Noisy group testing rates against theta.
    GtNoisyTheta,
}

impl Figure {
    pub fn name(self) -> &'static str {
        match self {
            Figure::PartialRecoverySnr => "partial-recovery-snr",
            Figure::GtNoiselessTheta => "gt-noiseless-theta",
            Figure::GtNoisyTheta => "gt-noisy-theta",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FigureOptions {
    pub alpha_star: f64,
    pub sigma: f64,
    pub rhos: Vec<f64>,
    pub quad: QuadratureSpec,
    pub exec: Execution,
}

impl Default for FigureOptions {
    fn default() -> Self {
        Self { alpha_star: 0.1, sigma: 1.0, rhos: vec![0.05, 0.11, 0.25], quad: QuadratureSpec::default(), exec: Execution::Parallel }
    }
}

/// One `(figure, x, curve, y)` record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub figure: String,
    pub x: f64,
    pub curve: String,
    pub y: f64,
    /// Binding `alpha` or optimizing parameter behind `y`, when there is one.
    pub binding: Option<f64>,
}

pub const CURVE_CSV_HEADER: [&str; 4] = ["figure", "x", "curve", "y"];

/// Curve table for `figure` over `grid` (SNR in dB or theta). Rows come out
/// sorted by `x`, then by curve name.
///
/// Partial recovery curves are coefficients of `k log(p / k)` (nats). Group
/// testing curves are base-2 rates `k log2(p / k) / n`.
pub fn figure_curves(figure: Figure, grid: &[f64], opts: &FigureOptions) -> Result<Vec<CurveRow>> {
    opts.quad.validate()?;
    let per_point = map_slice(opts.exec, grid, |&x| -> Result<Vec<CurveRow>> {
        let row = |curve: String, y: f64, binding: Option<f64>| CurveRow { figure: figure.name().into(), x, curve, y, binding };
        match figure {
            Figure::PartialRecoverySnr => {
                let c = c_beta_from_snr(x, opts.sigma);
                let lin = cor_linear_partial(c, opts.sigma, opts.alpha_star, 0.0)?;
                let one = cor_1bit_partial(c, opts.sigma, opts.alpha_star, 0.0, &opts.quad)?;
                Ok(vec![
                    row("1bit-ach-coef".into(), one.coef_ach, Some(one.alpha_ach)),
                    row("1bit-conv-coef".into(), one.coef_conv, Some(one.alpha_conv)),
                    row("linear-ach-coef".into(), lin.coef_ach, Some(lin.alpha_ach)),
                    row("linear-conv-coef".into(), lin.coef_conv, Some(lin.alpha_conv)),
                ])
            }
            Figure::GtNoiselessTheta => {
                let g = cor_gt_noiseless(x, 0.0)?;
                Ok(vec![
                    row("ach-rate-bits".into(), 1.0 / (g.coef_ach * LN_2), Some(g.argmin)),
                    row("conv-rate-bits".into(), 1.0 / (g.coef_conv * LN_2), None),
                ])
            }
            Figure::GtNoisyTheta => {
                let mut rows = Vec::new();
                for &rho in &opts.rhos {
                    let g = cor_gt_noisy(x, rho, 0.0)?;
                    rows.push(row(format!("ach-rate-bits-rho={rho}"), 1.0 / (g.coef_ach * LN_2), Some(g.argmin)));
                    rows.push(row(format!("conv-rate-bits-rho={rho}"), 1.0 / (g.coef_conv * LN_2), None));
                }
                Ok(rows)
            }
        }
    });
    let mut rows = Vec::new();
    for r in per_point {
        rows.extend(r?);
    }
    rows.sort_by(|a, b| a.x.total_cmp(&b.x).then_with(|| a.curve.cmp(&b.curve)));
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distinct_orderings_of_a_multiset() {
        // 4! / (2! 1! 1!) = 12
        assert!((ln_distinct_orderings(&[1.0, 1.0, 2.0, 3.0]) - 12f64.ln()).abs() < 1e-12);
        assert_eq!(ln_distinct_orderings(&[2.0; 5]), 0.0);
    }

    #[test]
    fn subtraction_at_zero_d_max_is_zero() {
        assert_eq!(ln_partial_subtraction(1000, 10, 4, 0), 0.0);
    }

    #[test]
    fn ties_go_to_the_first_row() {
        let rows: Vec<BreakdownRow> = (1..=3).map(|l| BreakdownRow { x: l as f64, numerator: 1.0, mi: 1.0, ratio: Some(2.0) }).collect();
        assert_eq!(max_ratio(&rows), (2.0, Some(1.0)));
    }

    #[test]
    fn zeta_uses_both_branches() {
        // Large theta: the concentration branch dominates at small delta2.
        assert!(gt_zeta(0.11, 0.05, 0.5) > gt_zeta(0.11, 0.5, 0.5));
    }
}
