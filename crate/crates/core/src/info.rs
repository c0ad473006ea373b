//! Information densities and conditional mutual informations.
//!
//! For a partition `(s_dif, s_eq)` of the support and a fixed `b`, the
//! single-letter density is `log P(y | x_dif, x_eq, b) - log P(y | x_eq, b)`,
//! where the second term averages `x_dif` over the design. All three channels
//! have closed forms for both terms. A zero-probability observation gives
//! `-inf`, which decoders read as "candidate eliminated".

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::model::{sample_design, sample_observation, trial_rng, Channel, Design, ModelSpec, Partition, ProblemDims, SignalPrior};
use crate::numerics::{expected_h2_of_q, gaussian_expectation, gaussian_expectation_2d, h2, log_q_function, log_sum_exp, QuadratureSpec};
use crate::par::{map_indices, Execution};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum InfoMethod {
    ClosedForm,
    Quadrature,
    MonteCarlo { trials: u64, std_err: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfoStats {
    pub mi: f64,
    pub var: f64,
    pub method: InfoMethod,
}

/// `log P(y | x_s, b)` given the noiseless signal `sum_i x_i b_i`.
pub fn log_likelihood(channel: &Channel, signal: f64, y: f64) -> f64 {
    match *channel {
        Channel::Linear { sigma } => {
            let z = (y - signal) / sigma;
            -0.5 * (LN_2PI + z * z) - sigma.ln()
        }
        Channel::OneBit { sigma } => log_q_function(-y * signal / sigma),
        Channel::GroupTesting { rho } => {
            let positive = signal > 0.0;
            if (y > 0.5) == positive {
                (-rho).ln_1p()
            } else {
                rho.ln()
            }
        }
    }
}

/// `log P(y | x_eq, b)` with `x_dif` averaged over the design.
///
/// `dif_energy` is `sum_dif b_i^2` for the Gaussian design; `dif_size` is
/// `|s_dif|` for the Bernoulli design.
pub fn log_likelihood_marginal(model: &ModelSpec, k: usize, eq_signal: f64, dif_energy: f64, dif_size: usize, y: f64) -> f64 {
    match (model.channel, model.design) {
        (Channel::Linear { sigma }, _) => {
            let s2 = sigma * sigma + dif_energy;
            let z = y - eq_signal;
            -0.5 * (LN_2PI + s2.ln() + z * z / s2)
        }
        (Channel::OneBit { sigma }, _) => {
            let tau = (sigma * sigma + dif_energy).sqrt();
            log_q_function(-y * eq_signal / tau)
        }
        (Channel::GroupTesting { rho }, Design::Bernoulli { nu }) => {
            if eq_signal > 0.0 {
                return log_likelihood(&model.channel, eq_signal, y);
            }
            let xi = (1.0 - nu / k as f64).powi(dif_size as i32);
            let p1 = (1.0 - xi) * (1.0 - rho) + xi * rho;
            if y > 0.5 {
                p1.ln()
            } else {
                (1.0 - p1).ln()
            }
        }
        (Channel::GroupTesting { .. }, Design::GaussianUnit) => f64::NAN,
    }
}

/// Precomputed single-letter density for one `(model, partition, b)`.
#[derive(Clone, Debug)]
pub struct DensityKernel {
    model: ModelSpec,
    partition: Partition,
    b: Vec<f64>,
    dif_energy: f64,
    k: usize,
}

impl DensityKernel {
    pub fn new(model: &ModelSpec, partition: &Partition, b: &[f64]) -> Result<Self> {
        partition.check_len(b.len())?;
        model.validate(b.len())?;
        let (dif_energy, _) = partition.energies(b);
        Ok(Self { model: *model, partition: partition.clone(), b: b.to_vec(), dif_energy, k: b.len() })
    }

    /// Density at a measurement row over the `k` support positions.
    pub fn eval(&self, x_row: &[f64], y: f64) -> f64 {
        let dot = |idx: &[usize]| idx.iter().map(|&i| x_row[i] * self.b[i]).sum::<f64>();
        let dif = dot(&self.partition.s_dif);
        let eq = dot(&self.partition.s_eq);
        let num = log_likelihood(&self.model.channel, dif + eq, y);
        if num == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let den = log_likelihood_marginal(&self.model, self.k, eq, self.dif_energy, self.partition.ell(), y);
        num - den
    }
}

/// `log P(y | x_dif, x_eq, b) - log P(y | x_eq, b)` for a single measurement.
pub fn info_density(model: &ModelSpec, partition: &Partition, b: &[f64], x_row: &[f64], y: f64) -> Result<f64> {
    if x_row.len() != b.len() {
        return Err(Error::Domain(format!("row has {} entries, expected {}", x_row.len(), b.len())));
    }
    Ok(DensityKernel::new(model, partition, b)?.eval(x_row, y))
}

/// Group testing density as `(probability, value)` atoms; impossible outcomes
/// are omitted.
pub fn gt_density_atoms(k: usize, ell: usize, nu: f64, rho: f64) -> Vec<(f64, f64)> {
    let q = nu / k as f64;
    let eta = (1.0 - q).powi((k - ell) as i32);
    let xi = (1.0 - q).powi(ell as i32);
    let p1 = xi * rho + (1.0 - xi) * (1.0 - rho);
    let p0 = 1.0 - p1;
    let mut atoms = vec![(1.0 - eta, 0.0)];
    let mut push = |prob: f64, num: f64, den: f64| {
        if prob > 0.0 {
            atoms.push((prob, num.ln() - den.ln()));
        }
    };
    // x_eq untested, x_dif untested.
    push(eta * xi * rho, rho, p1);
    push(eta * xi * (1.0 - rho), 1.0 - rho, p0);
    // x_eq untested, x_dif tested.
    push(eta * (1.0 - xi) * (1.0 - rho), 1.0 - rho, p1);
    push(eta * (1.0 - xi) * rho, rho, p0);
    atoms
}

/// `I_{s_dif, s_eq}(b)` and the variance of the density.
pub fn mutual_information(model: &ModelSpec, partition: &Partition, b: &[f64], quad: &QuadratureSpec) -> Result<InfoStats> {
    partition.check_len(b.len())?;
    model.validate(b.len())?;
    let (dif, eq) = partition.energies(b);
    match (model.channel, model.design) {
        (Channel::Linear { sigma }, _) => {
            let s2 = sigma * sigma;
            Ok(InfoStats { mi: 0.5 * (dif / s2).ln_1p(), var: dif / (s2 + dif), method: InfoMethod::ClosedForm })
        }
        (Channel::OneBit { sigma }, _) => {
            let mi = one_bit_mi(sigma, dif, eq, quad)?;
            let var = one_bit_variance(sigma, dif, eq, quad)?;
            Ok(InfoStats { mi, var, method: InfoMethod::Quadrature })
        }
        (Channel::GroupTesting { rho }, Design::Bernoulli { nu }) => {
            let k = partition.k();
            let ell = partition.ell();
            let q = nu / k as f64;
            let xi = (1.0 - q).powi(ell as i32);
            let mi = (1.0 - q).powi((k - ell) as i32) * (h2(xi * rho + (1.0 - xi) * (1.0 - rho)) - h2(rho));
            let atoms = gt_density_atoms(k, ell, nu, rho);
            let mean: f64 = atoms.iter().map(|(p, v)| p * v).sum();
            let second: f64 = atoms.iter().map(|(p, v)| p * v * v).sum();
            Ok(InfoStats { mi, var: (second - mean * mean).max(0.0), method: InfoMethod::ClosedForm })
        }
        _ => Err(config("unsupported channel/design pairing")),
    }
}

/// `E[H2(Q(W sqrt(eq / (sigma^2 + dif))))] - E[H2(Q(W sqrt((dif + eq) / sigma^2)))]`.
pub fn one_bit_mi(sigma: f64, dif: f64, eq: f64, quad: &QuadratureSpec) -> Result<f64> {
    let s2 = sigma * sigma;
    let first = expected_h2_of_q((eq / (s2 + dif)).sqrt(), quad)?;
    let second = expected_h2_of_q(((dif + eq) / s2).sqrt(), quad)?;
    Ok((first - second).max(0.0))
}

fn one_bit_variance(sigma: f64, dif: f64, eq: f64, quad: &QuadratureSpec) -> Result<f64> {
    if dif == 0.0 {
        return Ok(0.0);
    }
    let tau = (sigma * sigma + dif).sqrt();
    let (sd, se) = (dif.sqrt(), eq.sqrt());
    let moments = |w1: f64, w2: f64| {
        let u = se * w1;
        let t = sd * w2;
        let lp1 = log_q_function(-(u + t) / sigma);
        let lm1 = log_q_function((u + t) / sigma);
        let lp0 = log_q_function(-u / tau);
        let lm0 = log_q_function(u / tau);
        let (a, c) = (lp1 - lp0, lm1 - lm0);
        let p = lp1.exp();
        (p * a + (1.0 - p) * c, p * a * a + (1.0 - p) * c * c)
    };
    let mean = gaussian_expectation_2d(|a, b| moments(a, b).0, quad)?;
    let second = gaussian_expectation_2d(|a, b| moments(a, b).1, quad)?;
    Ok((second - mean * mean).max(0.0))
}

/// Low-SNR approximation `sum_dif b_i^2 / (pi sigma^2)` of the 1-bit information.
pub fn mi_asymptotic_1bit_lowsnr(b: &[f64], sigma: f64, partition: &Partition) -> Result<f64> {
    partition.check_len(b.len())?;
    let (dif, _) = partition.energies(b);
    Ok(dif / (std::f64::consts::PI * sigma * sigma))
}

/// `E[W log((1 - Q(W)) / Q(W))]`, about 1.806.
pub fn swap_constant(quad: &QuadratureSpec) -> Result<f64> {
    gaussian_expectation(|w| w * (log_q_function(-w) - log_q_function(w)), quad)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingleSwap {
    /// Leading-order approximation of the one-swap information.
    pub approx: f64,
    /// The same quantity by quadrature, with `ell = 1`.
    pub exact_mi_ell1: f64,
    pub constant: f64,
}

/// One-swap information of the 1-bit model with all entries equal to `b0`.
pub fn mi_1bit_single_swap(k: usize, b0: f64, sigma: f64, quad: &QuadratureSpec) -> Result<SingleSwap> {
    if k < 2 || !(b0 > 0.0) {
        return Err(Error::Domain("single-swap information needs k >= 2 and b0 > 0".into()));
    }
    let snr = b0 * b0 / (sigma * sigma);
    let constant = swap_constant(quad)?;
    let approx = 0.5 * snr / (2.0 * std::f64::consts::PI * k as f64 * snr).sqrt() * constant;
    let exact_mi_ell1 = one_bit_mi(sigma, b0 * b0, (k - 1) as f64 * b0 * b0, quad)?;
    Ok(SingleSwap { approx, exact_mi_ell1, constant })
}

/// Structural variance bound `c0 (S + S^2 + min(1, S^2) E)` with
/// `S = sum_dif b^2 / sigma^2`, `E = sum_eq b^2 / sigma^2`.
pub fn variance_bound_1bit(b: &[f64], sigma: f64, partition: &Partition, c0: f64) -> Result<f64> {
    partition.check_len(b.len())?;
    let (dif, eq) = partition.energies(b);
    let s2 = sigma * sigma;
    let (s, e) = (dif / s2, eq / s2);
    Ok(c0 * (s + s * s + (s * s).min(1.0) * e))
}

/// Default multiplier for [`variance_bound_1bit`].
pub const VARIANCE_BOUND_C0: f64 = 1.0;

const MC_BLOCK: u64 = 4096;

/// Sample mean and variance of the density under the true model, seeded and
/// sharded into fixed blocks so the result does not depend on `exec`.
pub fn variance_mc(model: &ModelSpec, partition: &Partition, b: &[f64], trials: u64, seed: u64, exec: Execution) -> Result<InfoStats> {
    if trials < 1000 {
        return Err(Error::Domain(format!("variance_mc needs at least 1000 trials, got {trials}")));
    }
    let kernel = DensityKernel::new(model, partition, b)?;
    let k = b.len();
    let blocks = trials.div_ceil(MC_BLOCK);
    let stats = map_indices(exec, blocks, |blk| {
        let mut rng = trial_rng(seed, blk);
        let count = MC_BLOCK.min(trials - blk * MC_BLOCK);
        let mut row = vec![0.0; k];
        let (mut mean, mut m2) = (0.0, 0.0);
        for i in 0..count {
            let v = draw_density(&kernel, model, b, &mut row, &mut rng);
            if !v.is_finite() {
                return None;
            }
            let d = v - mean;
            mean += d / (i + 1) as f64;
            m2 += d * (v - mean);
        }
        Some((count, mean, m2))
    });
    let (mut n, mut mean, mut m2) = (0u64, 0.0, 0.0);
    for s in stats {
        let Some((c, mb, m2b)) = s else {
            return Err(Error::Domain("non-finite density under the true model (support mismatch)".into()));
        };
        let tot = n + c;
        let d = mb - mean;
        mean += d * c as f64 / tot as f64;
        m2 += m2b + d * d * (n as f64) * (c as f64) / tot as f64;
        n = tot;
    }
    let var = m2 / (n - 1) as f64;
    Ok(InfoStats { mi: mean, var, method: InfoMethod::MonteCarlo { trials: n, std_err: (var / n as f64).sqrt() } })
}

/// Draw one `(x, y)` pair under the true model and evaluate the density.
pub fn draw_density<R: Rng + ?Sized>(kernel: &DensityKernel, model: &ModelSpec, b: &[f64], row: &mut [f64], rng: &mut R) -> f64 {
    let k = b.len();
    for v in row.iter_mut() {
        *v = sample_design(&model.design, k, rng);
    }
    let signal: f64 = row.iter().zip(b).map(|(x, b)| x * b).sum();
    let y = sample_observation(&model.channel, signal, rng);
    kernel.eval(row, y)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorDivergence {
    pub i0_bound: f64,
    pub v0_bound: f64,
    pub i0plus_bound: f64,
}

/// Bounds on the mean, variance and positive-part mean of the divergence
/// between the `beta`-conditional and marginal output laws (Gaussian prior).
pub fn prior_divergence_stats(model: &ModelSpec, prior: &SignalPrior, dims: &ProblemDims) -> Result<PriorDivergence> {
    let SignalPrior::IidGaussian { sigma_beta_sq } = prior else {
        return Err(config("prior divergence bounds need the Gaussian prior"));
    };
    let sigma = match model.channel {
        Channel::Linear { sigma } | Channel::OneBit { sigma } => sigma,
        Channel::GroupTesting { .. } => return Err(config("prior divergence bounds need a Gaussian-noise channel")),
    };
    let l = (dims.n as f64 * sigma_beta_sq / (sigma * sigma)).ln_1p();
    let k = dims.k as f64;
    let i0 = 0.5 * k * l;
    Ok(PriorDivergence { i0_bound: i0, v0_bound: 2.0 * dims.n as f64, i0plus_bound: i0 + (k * l).sqrt() })
}

/// Upper limit on the number of mixture components in a marginal likelihood.
pub const MAX_MIXTURE_TERMS: f64 = 1e6;

/// Distinct orderings of `b`, guarded at [`MAX_MIXTURE_TERMS`].
pub fn distinct_permutations(b: &[f64]) -> Result<Vec<Vec<f64>>> {
    let mut sorted = b.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut count = (1..=b.len()).map(|i| (i as f64).ln()).sum::<f64>();
    let mut run = 1usize;
    for i in 1..=sorted.len() {
        if i < sorted.len() && sorted[i] == sorted[i - 1] {
            run += 1;
        } else {
            count -= (1..=run).map(|j| (j as f64).ln()).sum::<f64>();
            run = 1;
        }
    }
    if count.exp() > MAX_MIXTURE_TERMS * (1.0 + 1e-9) {
        return Err(Error::Guard(format!("{:.3e} permutations exceed the mixture limit", count.exp())));
    }
    let mut out = vec![sorted.clone()];
    loop {
        // Next lexicographic permutation.
        let v = &mut sorted;
        let Some(i) = (1..v.len()).rev().find(|&i| v[i - 1] < v[i]) else { break };
        let j = (i..v.len()).rev().find(|&j| v[j] > v[i - 1]).expect("pivot has a successor");
        v.swap(i - 1, j);
        v[i..].reverse();
        out.push(v.clone());
    }
    Ok(out)
}

fn beta_candidates(model: &ModelSpec, prior: &SignalPrior, k: usize) -> Result<Vec<Vec<f64>>> {
    match prior {
        SignalPrior::FixedVector { b } => Ok(vec![b.clone()]),
        SignalPrior::PermutedVector { b, .. } => distinct_permutations(b),
        SignalPrior::AllOnes => {
            if matches!(model.channel, Channel::GroupTesting { .. }) {
                Ok(vec![vec![1.0; k]])
            } else {
                Err(config("the all-ones prior is only meaningful for group testing"))
            }
        }
        SignalPrior::IidGaussian { .. } => Err(config("Gaussian prior marginal is only available for the linear channel")),
    }
}

fn check_rows(x_s: &[Vec<f64>], y: &[f64], k: usize) -> Result<()> {
    if x_s.len() != y.len() || x_s.iter().any(|r| r.len() != k) {
        return Err(Error::Domain("x_s must be n x k with n = len(y)".into()));
    }
    Ok(())
}

/// `log P(y | x_s)` with `beta_S` averaged over the prior.
pub fn log_marginal_likelihood(model: &ModelSpec, prior: &SignalPrior, x_s: &[Vec<f64>], y: &[f64]) -> Result<f64> {
    let k = match prior.vector() {
        Some(b) => b.len(),
        None => x_s.first().map_or(0, Vec::len),
    };
    check_rows(x_s, y, k)?;
    if let SignalPrior::IidGaussian { sigma_beta_sq } = prior {
        let Channel::Linear { sigma } = model.channel else {
            return Err(config("Gaussian prior marginal is only available for the linear channel"));
        };
        return Ok(gaussian_marginal(sigma, *sigma_beta_sq, x_s, y));
    }
    let cands = beta_candidates(model, prior, k)?;
    let terms: Vec<f64> = cands
        .iter()
        .map(|b| x_s.iter().zip(y).map(|(row, &yi)| log_likelihood(&model.channel, row.iter().zip(b).map(|(x, b)| x * b).sum(), yi)).sum())
        .collect();
    Ok(log_sum_exp(&terms) - (cands.len() as f64).ln())
}

/// `log P(y | x_eq)`: the `s_dif` columns of `x_s` are averaged over the
/// design and `beta_S` over the prior.
pub fn log_partial_marginal_likelihood(
    model: &ModelSpec,
    prior: &SignalPrior,
    x_s: &[Vec<f64>],
    y: &[f64],
    partition: &Partition,
) -> Result<f64> {
    let k = partition.k();
    check_rows(x_s, y, k)?;
    let cands = beta_candidates(model, prior, k)?;
    let terms: Vec<f64> = cands
        .iter()
        .map(|b| {
            let (dif_energy, _) = partition.energies(b);
            x_s.iter()
                .zip(y)
                .map(|(row, &yi)| {
                    let eq: f64 = partition.s_eq.iter().map(|&i| row[i] * b[i]).sum();
                    log_likelihood_marginal(model, k, eq, dif_energy, partition.ell(), yi)
                })
                .sum()
        })
        .collect();
    Ok(log_sum_exp(&terms) - (cands.len() as f64).ln())
}

/// `log N(y; 0, sigma^2 I + sigma_beta^2 X X^T)`.
fn gaussian_marginal(sigma: f64, sigma_beta_sq: f64, x_s: &[Vec<f64>], y: &[f64]) -> f64 {
    use nalgebra::{DMatrix, DVector};
    let n = y.len();
    let k = x_s.first().map_or(0, Vec::len);
    let x = DMatrix::from_fn(n, k, |i, j| x_s[i][j]);
    let cov = DMatrix::<f64>::identity(n, n) * (sigma * sigma) + (&x * x.transpose()) * sigma_beta_sq;
    let chol = nalgebra::Cholesky::new(cov).expect("covariance is positive definite");
    let yv = DVector::from_column_slice(y);
    let sol = chol.solve(&yv);
    let logdet: f64 = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    -0.5 * (yv.dot(&sol) + logdet + n as f64 * LN_2PI)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permutations_of_a_multiset() {
        let p = distinct_permutations(&[1.0, 2.0, 2.0]).unwrap();
        assert_eq!(p.len(), 3);
        let p = distinct_permutations(&[3.0, 1.0, 2.0, 4.0]).unwrap();
        assert_eq!(p.len(), 24);
        let big: Vec<f64> = (0..10).map(f64::from).collect();
        assert!(matches!(distinct_permutations(&big), Err(Error::Guard(_))));
    }

    #[test]
    fn gt_atoms_sum_to_one() {
        for rho in [0.0, 0.11] {
            let atoms = gt_density_atoms(7, 3, 0.9, rho);
            let total: f64 = atoms.iter().map(|a| a.0).sum();
            assert!((total - 1.0).abs() < 1e-14);
        }
    }
}
