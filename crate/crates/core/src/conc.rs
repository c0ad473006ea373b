//! Tail bounds `psi_ell(n, delta2)` on the information density sum and the
//! measurement count that drives their weighted sum below a target.
//!
//! Every bound caps `P[|i^n - n I| >= n delta2 I]` (two-sided families) or
//! `P[i^n <= n I (1 - delta2)]` (the group testing families) and is clipped to
//! `[0, 1]`. The group testing bounds hold only for large `k`; their slack
//! `eps` makes that caveat explicit.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::info::mutual_information;
use crate::model::{min_info_partition, Channel, Design, ModelSpec, Partition};
use crate::numerics::{ln_choose, log_sum_exp, QuadratureSpec};

const LN_2: f64 = std::f64::consts::LN_2;

/// `min(1, V / ((delta2 I)^2 n))`.
pub fn psi_chebyshev(i: f64, v: f64, n: f64, delta2: f64) -> f64 {
    if v <= 0.0 {
        return 0.0;
    }
    let d = delta2 * i;
    (v / (d * d * n)).min(1.0)
}

/// Variance cap `|Y| (4 / e)^2` for a finite output alphabet.
pub fn variance_cap_discrete(alphabet_size: usize) -> f64 {
    let r = 4.0 / std::f64::consts::E;
    alphabet_size as f64 * r * r
}

/// `2 exp(-d^2 n / (2 (8 |Y| + 2 d)))` with `d = delta2 I`, clipped to 1.
pub fn psi_bernstein_discrete(i: f64, alphabet_size: usize, n: f64, delta2: f64) -> f64 {
    ln_psi_bernstein_discrete(i, alphabet_size, n, delta2).exp()
}

fn ln_psi_bernstein_discrete(i: f64, alphabet_size: usize, n: f64, delta2: f64) -> f64 {
    let d = delta2 * i;
    (LN_2 - d * d * n / (2.0 * (8.0 * alphabet_size as f64 + 2.0 * d))).min(0.0)
}

/// `alpha = 2 s (sigma + s) / (sigma^2 + s^2)` with `s^2 = sum_dif b^2`.
pub fn alpha_linear(b: &[f64], sigma: f64, partition: &Partition) -> Result<f64> {
    partition.check_len(b.len())?;
    let s = partition.energies(b).0.sqrt();
    Ok(2.0 * s * (sigma + s) / (sigma * sigma + s * s))
}

/// Bernstein bound for the linear model with Gaussian measurements.
pub fn psi_bernstein_linear(b: &[f64], sigma: f64, partition: &Partition, n: f64, delta2: f64) -> Result<f64> {
    let alpha = alpha_linear(b, sigma, partition)?;
    let i = 0.5 * (partition.energies(b).0 / (sigma * sigma)).ln_1p();
    Ok(ln_psi_bernstein_linear(i, alpha, n, delta2).exp())
}

fn ln_psi_bernstein_linear(i: f64, alpha: f64, n: f64, delta2: f64) -> f64 {
    if alpha == 0.0 {
        return f64::NEG_INFINITY;
    }
    let d = delta2 * i;
    (LN_2 - d * d * n / (2.0 * (4.0 * alpha * alpha + d * alpha))).min(0.0)
}

/// Per-measurement exponent shared by the group testing bounds.
fn gt_rate(nu: f64, k: usize, ell: usize, eps: f64) -> f64 {
    ell as f64 / k as f64 * (-nu).exp() * nu * (1.0 - eps)
}

/// Lower-tail Chernoff bound for noiseless group testing.
pub fn psi_chernoff_gt(nu: f64, k: usize, ell: usize, n: f64, delta2: f64, eps: f64) -> f64 {
    ln_psi_chernoff_gt(nu, k, ell, n, delta2, eps).exp()
}

fn ln_psi_chernoff_gt(nu: f64, k: usize, ell: usize, n: f64, delta2: f64, eps: f64) -> f64 {
    let h = (1.0 - delta2) * (-delta2).ln_1p() + delta2;
    (-n * gt_rate(nu, k, ell, eps) * h).min(0.0)
}

/// Lower-tail Bennett bound for noisy group testing.
pub fn psi_bennett_gt_noisy(nu: f64, rho: f64, k: usize, ell: usize, n: f64, delta2: f64, eps: f64) -> f64 {
    ln_psi_bennett_gt_noisy(nu, rho, k, ell, n, delta2, eps).exp()
}

fn ln_psi_bennett_gt_noisy(nu: f64, rho: f64, k: usize, ell: usize, n: f64, delta2: f64, eps: f64) -> f64 {
    let c = 1.0 - 2.0 * rho;
    let h = delta2 * delta2 * c * c / (2.0 * (1.0 + delta2 * c / 3.0));
    (-n * gt_rate(nu, k, ell, eps) * h).min(0.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailKind {
    Chebyshev,
    BernsteinLinear,
    BernsteinDiscrete,
    ChernoffGtNoiseless,
    BennettGtNoisy,
}

/// Which tail bound applies at each `ell`, with its `delta2`.
///
/// With `large_ell` set, `kind` / `delta2` cover `ell <= floor(k / ln k)` and
/// `large_ell` covers the rest.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailBoundSpec {
    pub kind: TailKind,
    pub delta2: f64,
    pub large_ell: Option<(TailKind, f64)>,
    pub eps: f64,
}

/// Default slack for the large-`k` group testing bounds.
pub const DEFAULT_EPS: f64 = 0.05;

impl TailBoundSpec {
    pub fn single(kind: TailKind, delta2: f64) -> Self {
        Self { kind, delta2, large_ell: None, eps: DEFAULT_EPS }
    }

    /// Chernoff (noiseless) or Bennett (noisy) with `delta2 = 0.9` for small
    /// `ell`, discrete Bernstein with `delta2 = 0.1` above `floor(k / ln k)`.
    pub fn group_testing(rho: f64) -> Self {
        let kind = if rho == 0.0 { TailKind::ChernoffGtNoiseless } else { TailKind::BennettGtNoisy };
        Self { kind, delta2: 0.9, large_ell: Some((TailKind::BernsteinDiscrete, 0.1)), eps: DEFAULT_EPS }
    }

    /// A reasonable default family for each channel.
    pub fn for_model(model: &ModelSpec, delta2: f64) -> Self {
        match model.channel {
            Channel::Linear { .. } => Self::single(TailKind::BernsteinLinear, delta2),
            Channel::OneBit { .. } => Self::single(TailKind::BernsteinDiscrete, delta2),
            Channel::GroupTesting { rho } => Self::group_testing(rho),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |d: f64| d > 0.0 && d < 1.0;
        if !ok(self.delta2) || self.large_ell.is_some_and(|(_, d)| !ok(d)) {
            return Err(domain("delta2 must lie in (0, 1)"));
        }
        if !(0.0..=0.5).contains(&self.eps) {
            return Err(domain("eps slack must lie in [0, 0.5]"));
        }
        Ok(())
    }

    /// Split point `floor(k / ln k)` (all of `1..=k` when `k < 3`).
    pub fn split_point(k: usize) -> usize {
        if k < 3 {
            k
        } else {
            (k as f64 / (k as f64).ln()).floor() as usize
        }
    }

    pub fn family_for(&self, k: usize, ell: usize) -> (TailKind, f64) {
        match self.large_ell {
            Some(large) if ell > Self::split_point(k) => large,
            _ => (self.kind, self.delta2),
        }
    }

    /// Precompute the `ell`-dependent constants for `b` (its minimum-information
    /// partition of each size is used).
    pub fn prepare(&self, model: &ModelSpec, b: &[f64], ell: usize, quad: &QuadratureSpec) -> Result<PreparedPsi> {
        self.validate()?;
        let k = b.len();
        let partition = min_info_partition(b, ell)?;
        let (kind, delta2) = self.family_for(k, ell);
        let stats = mutual_information(model, &partition, b, quad)?;
        let (sigma, rho, nu) = match (model.channel, model.design) {
            (Channel::Linear { sigma } | Channel::OneBit { sigma }, _) => (sigma, 0.0, 0.0),
            (Channel::GroupTesting { rho }, Design::Bernoulli { nu }) => (0.0, rho, nu),
            _ => (0.0, 0.0, 0.0),
        };
        let alpha = match model.channel {
            Channel::Linear { .. } => alpha_linear(b, sigma, &partition)?,
            _ => 0.0,
        };
        if matches!(kind, TailKind::BernsteinLinear) && !matches!(model.channel, Channel::Linear { .. }) {
            return Err(domain("the linear Bernstein bound needs the linear channel"));
        }
        if matches!(kind, TailKind::ChernoffGtNoiseless | TailKind::BennettGtNoisy)
            && !matches!(model.channel, Channel::GroupTesting { .. })
        {
            return Err(domain("group testing tail bounds need the group testing channel"));
        }
        Ok(PreparedPsi {
            ell,
            k,
            kind,
            delta2,
            eps: self.eps,
            mi: stats.mi,
            var: stats.var,
            alpha,
            alphabet: model.alphabet_size().unwrap_or(2),
            nu,
            rho,
        })
    }
}

/// A tail bound with its model constants resolved; cheap to evaluate in `n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreparedPsi {
    pub ell: usize,
    pub k: usize,
    pub kind: TailKind,
    pub delta2: f64,
    pub eps: f64,
    pub mi: f64,
    pub var: f64,
    pub alpha: f64,
    pub alphabet: usize,
    pub nu: f64,
    pub rho: f64,
}

impl PreparedPsi {
    pub fn ln_psi(&self, n: f64) -> f64 {
        if n <= 0.0 {
            return 0.0;
        }
        if self.mi <= 0.0 {
            // No information: nothing concentrates around zero usefully.
            return 0.0;
        }
        match self.kind {
            TailKind::Chebyshev => psi_chebyshev(self.mi, self.var, n, self.delta2).ln(),
            TailKind::BernsteinLinear => ln_psi_bernstein_linear(self.mi, self.alpha, n, self.delta2),
            TailKind::BernsteinDiscrete => ln_psi_bernstein_discrete(self.mi, self.alphabet, n, self.delta2),
            TailKind::ChernoffGtNoiseless => ln_psi_chernoff_gt(self.nu, self.k, self.ell, n, self.delta2, self.eps),
            TailKind::BennettGtNoisy => ln_psi_bennett_gt_noisy(self.nu, self.rho, self.k, self.ell, n, self.delta2, self.eps),
        }
    }

    pub fn psi(&self, n: f64) -> f64 {
        self.ln_psi(n).exp()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RemainderN {
    Finite(u64),
    /// No `n <= 2^30` meets the target.
    Unbounded,
}

impl RemainderN {
    pub fn as_f64(self) -> f64 {
        match self {
            RemainderN::Finite(n) => n as f64,
            RemainderN::Unbounded => f64::INFINITY,
        }
    }
}

pub const REMAINDER_N_CAP: u64 = 1 << 30;

/// `log sum_ell C(k, ell) psi_ell(n)`.
pub fn ln_weighted_remainder(prepared: &[PreparedPsi], n: f64) -> f64 {
    let terms: Vec<f64> = prepared.iter().map(|p| ln_choose(p.k as u64, p.ell as u64) + p.ln_psi(n)).collect();
    log_sum_exp(&terms)
}

/// Smallest `n` with `sum_ell C(k, ell) psi_ell(n) <= target`.
pub fn remainder_n_required(prepared: &[PreparedPsi], target: f64) -> Result<RemainderN> {
    if !(target > 0.0) {
        return Err(domain("remainder target must be positive"));
    }
    if target >= 1.0 || prepared.is_empty() {
        return Ok(RemainderN::Finite(0));
    }
    let ln_t = target.ln();
    let ok = |n: u64| ln_weighted_remainder(prepared, n as f64) <= ln_t;
    if ok(0) {
        return Ok(RemainderN::Finite(0));
    }
    let mut hi = 1u64;
    while !ok(hi) {
        if hi >= REMAINDER_N_CAP {
            return Ok(RemainderN::Unbounded);
        }
        hi *= 2;
    }
    // ok(hi / 2) failed on the previous doubling step (or hi / 2 == 0).
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(RemainderN::Finite(hi))
}

/// Prepare `spec` for each `ell` in `ells` and solve for the remainder `n`.
pub fn remainder_n_for_model(
    spec: &TailBoundSpec,
    model: &ModelSpec,
    b: &[f64],
    ells: &[usize],
    target: f64,
    quad: &QuadratureSpec,
) -> Result<RemainderN> {
    let prepared = ells.iter().map(|&l| spec.prepare(model, b, l, quad)).collect::<Result<Vec<_>>>()?;
    remainder_n_required(&prepared, target)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cap_for_binary_output() {
        assert!((variance_cap_discrete(2) - 4.330_729_063_571_606).abs() < 1e-12);
    }

    #[test]
    fn alpha_is_two_at_equal_energy() {
        let p = Partition::new(vec![0], vec![1], 2).unwrap();
        let a = alpha_linear(&[1.5, 9.0], 1.5, &p).unwrap();
        assert!((a - 2.0).abs() < 1e-14);
    }

    #[test]
    fn remainder_is_zero_for_vacuous_target() {
        let spec = TailBoundSpec::group_testing(0.0);
        let n = remainder_n_for_model(&spec, &ModelSpec::group_testing(0.0, 0.69), &[1.0; 10], &[1, 2], 1.0, &QuadratureSpec::default());
        assert_eq!(n.unwrap(), RemainderN::Finite(0));
    }
}
