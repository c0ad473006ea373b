//! Problem dimensions, observation channels, signal priors, support partitions
//! and a seeded sampler for `(S, beta, X, Y)`.
//!
//! Partition indices are positions `0..k` within the sorted support; only the
//! simulator maps them back to ambient coordinates.

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{config, domain, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemDims {
    pub p: usize,
    pub k: usize,
    pub n: usize,
    pub d_max: usize,
}

impl ProblemDims {
    pub fn new(p: usize, k: usize, n: usize, d_max: usize) -> Result<Self> {
        let dims = Self { p, k, n, d_max };
        dims.validate()?;
        Ok(dims)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k > self.p {
            return Err(config(format!("need 1 <= k <= p, got k = {}, p = {}", self.k, self.p)));
        }
        if self.d_max >= self.k {
            return Err(config(format!("need d_max <= k - 1, got d_max = {}, k = {}", self.d_max, self.k)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Channel {
    Linear { sigma: f64 },
    OneBit { sigma: f64 },
    GroupTesting { rho: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Design {
    GaussianUnit,
    /// Each entry is one with probability `nu / k`.
    Bernoulli {
        nu: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub channel: Channel,
    pub design: Design,
}

impl ModelSpec {
    pub fn linear(sigma: f64) -> Self {
        Self { channel: Channel::Linear { sigma }, design: Design::GaussianUnit }
    }

    pub fn one_bit(sigma: f64) -> Self {
        Self { channel: Channel::OneBit { sigma }, design: Design::GaussianUnit }
    }

    pub fn group_testing(rho: f64, nu: f64) -> Self {
        Self { channel: Channel::GroupTesting { rho }, design: Design::Bernoulli { nu } }
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        match (self.channel, self.design) {
            (Channel::Linear { sigma } | Channel::OneBit { sigma }, Design::GaussianUnit) => {
                if !(sigma > 0.0 && sigma.is_finite()) {
                    return Err(config(format!("noise level sigma must be positive, got {sigma}")));
                }
            }
            (Channel::GroupTesting { rho }, Design::Bernoulli { nu }) => {
                if !(0.0..0.5).contains(&rho) {
                    return Err(config(format!("crossover probability must lie in [0, 0.5), got {rho}")));
                }
                if !(nu > 0.0) || nu > k as f64 {
                    return Err(config(format!("need 0 < nu <= k, got nu = {nu}, k = {k}")));
                }
            }
            _ => return Err(config("linear and 1-bit channels need a Gaussian design; group testing needs Bernoulli")),
        }
        Ok(())
    }

    /// Output alphabet size, or `None` for the real-valued linear channel.
    pub fn alphabet_size(&self) -> Option<usize> {
        match self.channel {
            Channel::Linear { .. } => None,
            _ => Some(2),
        }
    }

    /// Per-entry test probability `nu / k` of the Bernoulli design.
    pub fn test_probability(&self, k: usize) -> Option<f64> {
        match self.design {
            Design::Bernoulli { nu } => Some(nu / k as f64),
            Design::GaussianUnit => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum SignalPrior {
    FixedVector { b: Vec<f64> },
    PermutedVector { b: Vec<f64>, m_beta: usize },
    IidGaussian { sigma_beta_sq: f64 },
    AllOnes,
}

impl SignalPrior {
    /// Uniform random permutation of `b`, with `m_beta` counted from the data.
    pub fn permuted(b: Vec<f64>) -> Self {
        let m_beta = distinct_count(&b);
        SignalPrior::PermutedVector { b, m_beta }
    }

    pub fn validate(&self, k: usize, model: &ModelSpec) -> Result<()> {
        let gt = matches!(model.channel, Channel::GroupTesting { .. });
        match self {
            SignalPrior::AllOnes if !gt => Err(config("the all-ones prior is only meaningful for group testing")),
            SignalPrior::AllOnes => Ok(()),
            _ if gt => Err(config("group testing uses the all-ones prior")),
            SignalPrior::FixedVector { b } | SignalPrior::PermutedVector { b, .. } => {
                if b.len() != k {
                    return Err(config(format!("signal vector has length {}, expected k = {k}", b.len())));
                }
                if b.iter().any(|v| *v == 0.0 || !v.is_finite()) {
                    return Err(config("signal entries on the support must be finite and non-zero"));
                }
                if let SignalPrior::PermutedVector { m_beta, .. } = self {
                    if *m_beta != distinct_count(b) {
                        return Err(config(format!("m_beta = {m_beta} but b has {} distinct values", distinct_count(b))));
                    }
                }
                Ok(())
            }
            SignalPrior::IidGaussian { sigma_beta_sq } => {
                if *sigma_beta_sq > 0.0 && sigma_beta_sq.is_finite() {
                    Ok(())
                } else {
                    Err(config("sigma_beta_sq must be positive"))
                }
            }
        }
    }

    /// Smallest non-zero magnitude for vector priors.
    pub fn b_min(&self) -> Option<f64> {
        self.vector().map(|b| b.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min))
    }

    pub fn b_max(&self) -> Option<f64> {
        self.vector().map(|b| b.iter().map(|v| v.abs()).fold(0.0, f64::max))
    }

    /// The vector `b` behind a fixed or permuted prior.
    pub fn vector(&self) -> Option<&[f64]> {
        match self {
            SignalPrior::FixedVector { b } | SignalPrior::PermutedVector { b, .. } => Some(b),
            _ => None,
        }
    }
}

pub(crate) fn distinct_count(b: &[f64]) -> usize {
    let mut v: Vec<u64> = b.iter().map(|x| x.to_bits()).collect();
    v.sort_unstable();
    v.dedup();
    v.len()
}

/// A split of the support positions `0..k` into `s_dif` (non-empty) and `s_eq`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Partition {
    pub s_dif: Vec<usize>,
    pub s_eq: Vec<usize>,
}

impl Partition {
    pub fn new(mut s_dif: Vec<usize>, mut s_eq: Vec<usize>, k: usize) -> Result<Self> {
        s_dif.sort_unstable();
        s_eq.sort_unstable();
        if s_dif.is_empty() {
            return Err(domain("partition needs a non-empty s_dif"));
        }
        let mut seen = vec![false; k];
        for &i in s_dif.iter().chain(&s_eq) {
            if i >= k || seen[i] {
                return Err(domain(format!("partition indices must cover 0..{k} exactly once")));
            }
            seen[i] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(domain(format!("partition indices must cover 0..{k} exactly once")));
        }
        Ok(Self { s_dif, s_eq })
    }

    /// Partition whose `s_dif` is the set bits of `mask`.
    pub fn from_mask(k: usize, mask: u64) -> Self {
        let (s_dif, s_eq) = (0..k).partition(|&i| mask >> i & 1 == 1);
        Self { s_dif, s_eq }
    }

    /// The whole support in `s_dif`.
    pub fn full(k: usize) -> Self {
        Self { s_dif: (0..k).collect(), s_eq: Vec::new() }
    }

    pub fn ell(&self) -> usize {
        self.s_dif.len()
    }

    pub fn k(&self) -> usize {
        self.s_dif.len() + self.s_eq.len()
    }

    pub fn mask(&self) -> u64 {
        self.s_dif.iter().fold(0, |m, &i| m | 1 << i)
    }

    pub(crate) fn check_len(&self, b_len: usize) -> Result<()> {
        if self.k() != b_len {
            return Err(domain(format!("partition covers {} positions but b has length {b_len}", self.k())));
        }
        Ok(())
    }

    /// `(sum_dif b_i^2, sum_eq b_i^2)`.
    pub fn energies(&self, b: &[f64]) -> (f64, f64) {
        let e = |idx: &[usize]| idx.iter().map(|&i| b[i] * b[i]).sum::<f64>();
        (e(&self.s_dif), e(&self.s_eq))
    }
}

fn magnitude_order(b: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..b.len()).collect();
    order.sort_by(|&i, &j| b[i].abs().total_cmp(&b[j].abs()).then(i.cmp(&j)));
    order
}

/// Partition whose `s_dif` holds the `ell` smallest-magnitude entries of `b`
/// (lowest index first among ties).
pub fn min_info_partition(b: &[f64], ell: usize) -> Result<Partition> {
    if ell == 0 || ell > b.len() {
        return Err(domain(format!("ell = {ell} outside 1..={}", b.len())));
    }
    let order = magnitude_order(b);
    Partition::new(order[..ell].to_vec(), order[ell..].to_vec(), b.len())
}

/// Partition whose `s_dif` holds the `ell` largest-magnitude entries of `b`.
pub fn max_info_partition(b: &[f64], ell: usize) -> Result<Partition> {
    if ell == 0 || ell > b.len() {
        return Err(domain(format!("ell = {ell} outside 1..={}", b.len())));
    }
    let mut order = magnitude_order(b);
    order.reverse();
    Partition::new(order[..ell].to_vec(), order[ell..].to_vec(), b.len())
}

pub const MAX_ENUMERATION_K: usize = 24;

/// Every partition with `|s_dif|` in `ell_set`, in increasing bitmask order.
pub fn enumerate_partitions(k: usize, ell_set: &[usize]) -> Result<Vec<Partition>> {
    if k > MAX_ENUMERATION_K {
        return Err(Error::Guard(format!("enumerating partitions of k = {k} > {MAX_ENUMERATION_K}")));
    }
    let mut want = vec![false; k + 1];
    for &l in ell_set {
        if l >= 1 && l <= k {
            want[l] = true;
        }
    }
    Ok((1u64..1 << k).filter(|m| want[m.count_ones() as usize]).map(|m| Partition::from_mask(k, m)).collect())
}

/// Per-sample SNR `10 log10(k sigma_beta^2 / sigma^2)`.
pub fn snr_db(prior: &SignalPrior, model: &ModelSpec, k: usize) -> Result<f64> {
    let SignalPrior::IidGaussian { sigma_beta_sq } = prior else {
        return Err(config("SNR in dB is defined for the Gaussian prior"));
    };
    let sigma = match model.channel {
        Channel::Linear { sigma } | Channel::OneBit { sigma } => sigma,
        Channel::GroupTesting { .. } => return Err(config("SNR in dB needs a Gaussian-noise channel")),
    };
    Ok(snr_db_from_c_beta(k as f64 * sigma_beta_sq, sigma))
}

pub fn snr_db_from_c_beta(c_beta: f64, sigma: f64) -> f64 {
    10.0 * (c_beta / (sigma * sigma)).log10()
}

/// `c_beta = k sigma_beta^2` giving the requested SNR.
pub fn c_beta_from_snr(snr_db: f64, sigma: f64) -> f64 {
    sigma * sigma * 10f64.powf(snr_db / 10.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Realization {
    /// Sorted ambient indices of the support.
    pub support: Vec<usize>,
    /// Length `p`, zero off the support.
    pub beta: Vec<f64>,
    /// `n` rows of length `p`.
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

impl Realization {
    pub fn beta_support(&self) -> Vec<f64> {
        self.support.iter().map(|&j| self.beta[j]).collect()
    }

    /// Rows restricted to the columns in `cols`.
    pub fn columns(&self, cols: &[usize]) -> Vec<Vec<f64>> {
        self.x.iter().map(|row| cols.iter().map(|&j| row[j]).collect()).collect()
    }
}

/// One channel output given the noiseless signal `sum_i x_i b_i`.
///
/// Group testing reads the signal as "some defective item is in the test";
/// the 1-bit channel maps zero to `+1`.
pub fn sample_observation<R: Rng + ?Sized>(channel: &Channel, signal: f64, rng: &mut R) -> f64 {
    match *channel {
        Channel::Linear { sigma } => {
            let z: f64 = StandardNormal.sample(rng);
            signal + sigma * z
        }
        Channel::OneBit { sigma } => {
            let z: f64 = StandardNormal.sample(rng);
            if signal + sigma * z >= 0.0 {
                1.0
            } else {
                -1.0
            }
        }
        Channel::GroupTesting { rho } => {
            let clean = signal > 0.0;
            let flip = rho > 0.0 && rng.random_bool(rho);
            if clean != flip {
                1.0
            } else {
                0.0
            }
        }
    }
}

pub(crate) fn sample_design<R: Rng + ?Sized>(design: &Design, k: usize, rng: &mut R) -> f64 {
    match *design {
        Design::GaussianUnit => StandardNormal.sample(rng),
        Design::Bernoulli { nu } => {
            if rng.random_bool((nu / k as f64).min(1.0)) {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// Draw `beta_S` from the prior.
pub fn sample_beta<R: Rng + ?Sized>(prior: &SignalPrior, k: usize, rng: &mut R) -> Vec<f64> {
    match prior {
        SignalPrior::FixedVector { b } => b.clone(),
        SignalPrior::PermutedVector { b, .. } => {
            let mut v = b.clone();
            v.shuffle(rng);
            v
        }
        SignalPrior::IidGaussian { sigma_beta_sq } => {
            let s = sigma_beta_sq.sqrt();
            (0..k)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(rng);
                    s * z
                })
                .collect()
        }
        SignalPrior::AllOnes => vec![1.0; k],
    }
}

/// Sample a realization from an explicit generator.
pub fn sample_realization_with<R: Rng + ?Sized>(
    dims: &ProblemDims,
    model: &ModelSpec,
    prior: &SignalPrior,
    rng: &mut R,
) -> Result<Realization> {
    dims.validate()?;
    model.validate(dims.k)?;
    prior.validate(dims.k, model)?;
    let mut support = index::sample(rng, dims.p, dims.k).into_vec();
    support.sort_unstable();
    let beta_s = sample_beta(prior, dims.k, rng);
    let mut beta = vec![0.0; dims.p];
    for (&j, &v) in support.iter().zip(&beta_s) {
        beta[j] = v;
    }
    let mut x = Vec::with_capacity(dims.n);
    let mut y = Vec::with_capacity(dims.n);
    for _ in 0..dims.n {
        let row: Vec<f64> = (0..dims.p).map(|_| sample_design(&model.design, dims.k, rng)).collect();
        let signal: f64 = support.iter().map(|&j| row[j] * beta[j]).sum();
        y.push(sample_observation(&model.channel, signal, rng));
        x.push(row);
    }
    Ok(Realization { support, beta, x, y })
}

/// Deterministic realization for a 64-bit seed.
pub fn sample_realization(dims: &ProblemDims, model: &ModelSpec, prior: &SignalPrior, seed: u64) -> Result<Realization> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_realization_with(dims, model, prior, &mut rng)
}

/// Generator for trial `stream` of a seeded experiment.
pub fn trial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
