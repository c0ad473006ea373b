//! Seeded Monte Carlo estimates of the support recovery error rate for three
//! exhaustive or near-exhaustive decoders, sized for a desk.
//!
//! Every trial draws its own ChaCha stream from `(seed, n, trial)`, so reports
//! are reproducible bit for bit and do not depend on thread count.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bounds::{gamma_select, GammaRule};
use crate::error::{config, domain, Error, Result};
use crate::info::{log_marginal_likelihood, log_partial_marginal_likelihood};
use crate::model::{sample_realization_with, trial_rng, Channel, ModelSpec, Partition, ProblemDims, Realization, SignalPrior};
use crate::numerics::{g_alpha, ln_choose, wilson_interval};
use crate::par::{map_indices, Execution};

/// Largest candidate count the exhaustive decoders will enumerate.
pub const MAX_CANDIDATES: f64 = 1e6;
/// Largest sparsity the threshold decoder accepts (it tests `2^k - 1` partitions per candidate).
pub const MAX_THRESHOLD_K: usize = 12;

const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DecoderSpec {
    /// Unique set whose every partition clears `gamma_ell + gamma'_ell + gamma`.
    Threshold {
        delta1: f64,
        gamma_rule: GammaRule,
    },
    ExhaustiveMl,
    /// Group testing only: discard items seen in negative tests.
    CompGt,
}

impl DecoderSpec {
    pub fn name(&self) -> &'static str {
        match self {
            DecoderSpec::Threshold { .. } => "threshold",
            DecoderSpec::ExhaustiveMl => "exhaustive-ml",
            DecoderSpec::CompGt => "comp-gt",
        }
    }

    /// Refuse configurations the decoder cannot run at desk scale.
    pub fn check(&self, model: &ModelSpec, p: usize, k: usize) -> Result<()> {
        let exhaustive = |limit_k: Option<usize>| -> Result<()> {
            if ln_choose(p as u64, k as u64) > MAX_CANDIDATES.ln() + 1e-9 {
                return Err(Error::Guard(format!("C({p}, {k}) exceeds {MAX_CANDIDATES:e} candidate sets")));
            }
            if let Some(lim) = limit_k {
                if k > lim {
                    return Err(Error::Guard(format!("threshold decoding needs k <= {lim}, got {k}")));
                }
            }
            Ok(())
        };
        match self {
            DecoderSpec::Threshold { delta1, .. } => {
                if !(*delta1 > 0.0 && *delta1 <= 1.0) {
                    return Err(domain("delta1 must lie in (0, 1]"));
                }
                exhaustive(Some(MAX_THRESHOLD_K))
            }
            DecoderSpec::ExhaustiveMl => exhaustive(None),
            DecoderSpec::CompGt => match model.channel {
                Channel::GroupTesting { .. } => Ok(()),
                _ => Err(config("COMP needs the group testing channel")),
            },
        }
    }
}

/// What a decoder returned.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", content = "support", rename_all = "kebab-case")]
pub enum Decoded {
    Unique(Vec<usize>),
    /// No candidate passed.
    None,
    /// More than one candidate passed.
    Multiple,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub decoded: Decoded,
    /// Threshold: sets passing every test. ML: sets tied at the maximum.
    /// COMP: items not ruled out.
    pub candidates: u64,
}

/// Lexicographic successor of a sorted `k`-subset of `0..p`.
fn next_combination(c: &mut [usize], p: usize) -> bool {
    let k = c.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if c[i] < p - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn for_each_subset<F: FnMut(&[usize]) -> Result<()>>(p: usize, k: usize, mut f: F) -> Result<()> {
    let mut c: Vec<usize> = (0..k).collect();
    loop {
        f(&c)?;
        if !next_combination(&mut c, p) {
            return Ok(());
        }
    }
}

/// Working threshold `log((k / delta1)^2 C(p-k, ell) C(k, ell)^2) + gamma` for each `ell = 1..=k`.
pub fn threshold_levels(p: usize, k: usize, delta1: f64, gamma: f64) -> Vec<f64> {
    (1..=k)
        .map(|ell| {
            let ckl = ln_choose(k as u64, ell as u64);
            2.0 * ((k as f64).ln() - delta1.ln()) + ln_choose((p - k) as u64, ell as u64) + 2.0 * ckl + gamma
        })
        .collect()
}

/// Whether `cols` clears the threshold at every partition: `log P(y | x_s) -
/// log P(y | x_eq) > levels[ell - 1]`, both sides averaged over the prior.
pub fn passes_all_partitions(real: &Realization, model: &ModelSpec, prior: &SignalPrior, cols: &[usize], levels: &[f64]) -> Result<bool> {
    let k = cols.len();
    let x_s = real.columns(cols);
    let full = log_marginal_likelihood(model, prior, &x_s, &real.y)?;
    if full == f64::NEG_INFINITY {
        return Ok(false);
    }
    for mask in 1u64..1 << k {
        let part = Partition::from_mask(k, mask);
        let reduced = log_partial_marginal_likelihood(model, prior, &x_s, &real.y, &part)?;
        if !(full - reduced > levels[part.ell() - 1]) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Threshold decoder over all `k`-subsets.
pub fn decode_threshold(
    real: &Realization,
    model: &ModelSpec,
    prior: &SignalPrior,
    dims: &ProblemDims,
    delta1: f64,
    gamma_rule: GammaRule,
) -> Result<Decision> {
    DecoderSpec::Threshold { delta1, gamma_rule }.check(model, dims.p, dims.k)?;
    let gamma = gamma_select(gamma_rule, model, prior, dims)?;
    let levels = threshold_levels(dims.p, dims.k, delta1, gamma);
    let mut found: Option<Vec<usize>> = None;
    let mut count = 0u64;
    for_each_subset(dims.p, dims.k, |c| {
        if passes_all_partitions(real, model, prior, c, &levels)? {
            count += 1;
            if found.is_none() {
                found = Some(c.to_vec());
            }
        }
        Ok(())
    })?;
    let decoded = match (count, found) {
        (1, Some(s)) => Decoded::Unique(s),
        (0, _) => Decoded::None,
        _ => Decoded::Multiple,
    };
    Ok(Decision { decoded, candidates: count })
}

/// Maximum marginal likelihood over all `k`-subsets, lexicographically first on ties.
pub fn decode_ml(real: &Realization, model: &ModelSpec, prior: &SignalPrior, dims: &ProblemDims) -> Result<Decision> {
    DecoderSpec::ExhaustiveMl.check(model, dims.p, dims.k)?;
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut ties = 0u64;
    for_each_subset(dims.p, dims.k, |c| {
        let ll = log_marginal_likelihood(model, prior, &real.columns(c), &real.y)?;
        match &best {
            Some((b, _)) if ll < *b => {}
            Some((b, _)) if ll == *b => ties += 1,
            _ => {
                best = Some((ll, c.to_vec()));
                ties = 1;
            }
        }
        Ok(())
    })?;
    let (_, s) = best.expect("at least one candidate");
    Ok(Decision { decoded: Decoded::Unique(s), candidates: ties })
}

/// COMP: rule out items in negative tests, then rank survivors first, by
/// positive-test count, then by index. Returns the top `k`, sorted.
pub fn decode_comp(real: &Realization, dims: &ProblemDims) -> Decision {
    let p = dims.p;
    let mut ruled_out = vec![false; p];
    let mut score = vec![0u64; p];
    for (row, &y) in real.x.iter().zip(&real.y) {
        for (j, &x) in row.iter().enumerate() {
            if x > 0.5 {
                if y > 0.5 {
                    score[j] += 1;
                } else {
                    ruled_out[j] = true;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| ruled_out[a].cmp(&ruled_out[b]).then(score[b].cmp(&score[a])).then(a.cmp(&b)));
    let mut s = order[..dims.k].to_vec();
    s.sort_unstable();
    let survivors = ruled_out.iter().filter(|r| !**r).count() as u64;
    Decision { decoded: Decoded::Unique(s), candidates: survivors }
}

pub fn decode(spec: &DecoderSpec, real: &Realization, model: &ModelSpec, prior: &SignalPrior, dims: &ProblemDims) -> Result<Decision> {
    match *spec {
        DecoderSpec::Threshold { delta1, gamma_rule } => decode_threshold(real, model, prior, dims, delta1, gamma_rule),
        DecoderSpec::ExhaustiveMl => decode_ml(real, model, prior, dims),
        DecoderSpec::CompGt => {
            spec.check(model, dims.p, dims.k)?;
            Ok(decode_comp(real, dims))
        }
    }
}

/// `(|S \ S_hat|, |S_hat \ S|)` for sorted index lists.
pub fn set_differences(truth: &[usize], est: &[usize]) -> (usize, usize) {
    let missed = truth.iter().filter(|i| est.binary_search(i).is_err()).count();
    let extra = est.iter().filter(|i| truth.binary_search(i).is_err()).count();
    (missed, extra)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub n: usize,
    pub trials: u64,
    pub errors_exact: u64,
    /// Trials with more than `d_max` missed support entries (or no unique output).
    pub errors_partial: u64,
    pub pe_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub pe_partial_hat: f64,
    pub mean_decode_candidates: f64,
    /// Threshold decoder only: trials where the true support failed some test.
    pub true_support_rejections: Option<u64>,
    pub seed: u64,
}

pub const SIM_CSV_HEADER: [&str; 8] = ["n", "trials", "errors_exact", "errors_partial", "pe_hat", "ci_lo", "ci_hi", "seed"];

impl SimReport {
    pub fn csv_record(&self) -> [String; 8] {
        [
            self.n.to_string(),
            self.trials.to_string(),
            self.errors_exact.to_string(),
            self.errors_partial.to_string(),
            format!("{:.6}", self.pe_hat),
            format!("{:.6}", self.ci_lo),
            format!("{:.6}", self.ci_hi),
            self.seed.to_string(),
        ]
    }
}

struct TrialOutcome {
    exact: bool,
    partial: bool,
    candidates: u64,
    truth_rejected: bool,
}

/// Stream index for trial `t` at `n`: independent across both.
fn stream(n: usize, t: u64) -> u64 {
    ((n as u64) << 32) | t
}

/// One report per `n` in `ns`, each from `trials` independent draws.
#[allow(clippy::too_many_arguments)]
pub fn phase_sweep(
    model: &ModelSpec,
    prior: &SignalPrior,
    p: usize,
    k: usize,
    d_max: usize,
    ns: &[usize],
    decoder: &DecoderSpec,
    trials: u64,
    seed: u64,
    exec: Execution,
) -> Result<Vec<SimReport>> {
    if trials == 0 || trials > u32::MAX as u64 {
        return Err(domain("trials must lie in 1..=2^32-1"));
    }
    if ns.iter().any(|&n| n as u64 > u32::MAX as u64) {
        return Err(domain("n must fit in 32 bits"));
    }
    ProblemDims::new(p, k, 0, d_max)?;
    model.validate(k)?;
    prior.validate(k, model)?;
    decoder.check(model, p, k)?;
    let threshold_levels_for = match *decoder {
        DecoderSpec::Threshold { delta1, gamma_rule } => {
            let dims = ProblemDims::new(p, k, 0, d_max)?;
            Some(threshold_levels(p, k, delta1, gamma_select(gamma_rule, model, prior, &dims)?))
        }
        _ => None,
    };
    let mut out = Vec::with_capacity(ns.len());
    for &n in ns {
        let dims = ProblemDims::new(p, k, n, d_max)?;
        let results = map_indices(exec, trials, |t| -> Result<TrialOutcome> {
            let mut rng = trial_rng(seed, stream(n, t));
            let real = sample_realization_with(&dims, model, prior, &mut rng)?;
            let decision = decode(decoder, &real, model, prior, &dims)?;
            let truth_rejected = match &threshold_levels_for {
                Some(levels) => !passes_all_partitions(&real, model, prior, &real.support, levels)?,
                None => false,
            };
            let (exact, partial) = match &decision.decoded {
                Decoded::Unique(s) => {
                    let (missed, extra) = set_differences(&real.support, s);
                    debug_assert_eq!(missed, extra);
                    (missed > 0, missed > d_max)
                }
                Decoded::None | Decoded::Multiple => (true, true),
            };
            Ok(TrialOutcome { exact, partial, candidates: decision.candidates, truth_rejected })
        });
        let (mut ee, mut ep, mut cand, mut rej) = (0u64, 0u64, 0u64, 0u64);
        for r in results {
            let r = r?;
            ee += r.exact as u64;
            ep += r.partial as u64;
            cand += r.candidates;
            rej += r.truth_rejected as u64;
        }
        let (ci_lo, ci_hi) = wilson_interval(ee, trials, Z_95);
        out.push(SimReport {
            n,
            trials,
            errors_exact: ee,
            errors_partial: ep,
            pe_hat: ee as f64 / trials as f64,
            ci_lo,
            ci_hi,
            pe_partial_hat: ep as f64 / trials as f64,
            mean_decode_candidates: cand as f64 / trials as f64,
            true_support_rejections: threshold_levels_for.as_ref().map(|_| rej),
            seed,
        });
    }
    Ok(out)
}

/// Union-bound term `sum_ell C(p-k, ell) C(k, ell) e^{-level_ell}` for wrong
/// sets passing the threshold test.
pub fn threshold_false_pass_bound(p: usize, k: usize, levels: &[f64]) -> f64 {
    (1..=k).map(|ell| (ln_choose((p - k) as u64, ell as u64) + ln_choose(k as u64, ell as u64) - levels[ell - 1]).exp()).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GCheckRow {
    pub alpha: f64,
    pub empirical: f64,
    pub g_alpha: f64,
}

/// Average over `trials` draws of `(1/k) sum` of the `floor(alpha k)` smallest
/// of `k` squared standard normals, next to `g(alpha)`.
pub fn empirical_g_check(k: usize, trials: u64, seed: u64, alphas: &[f64], exec: Execution) -> Result<Vec<GCheckRow>> {
    if k == 0 || trials == 0 {
        return Err(domain("need k >= 1 and at least one trial"));
    }
    for &a in alphas {
        if !(0.0..=1.0).contains(&a) {
            return Err(domain(format!("alpha = {a} outside [0, 1]")));
        }
    }
    let per_trial = map_indices(exec, trials, |t| {
        let mut rng = trial_rng(seed, t);
        let mut sq: Vec<f64> = (0..k)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * z
            })
            .collect();
        sq.sort_by(f64::total_cmp);
        let mut prefix = Vec::with_capacity(k + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for v in &sq {
            acc += v;
            prefix.push(acc);
        }
        alphas.iter().map(|&a| prefix[(a * k as f64).floor() as usize] / k as f64).collect::<Vec<f64>>()
    });
    alphas
        .iter()
        .enumerate()
        .map(|(i, &alpha)| {
            let empirical = per_trial.iter().map(|row| row[i]).sum::<f64>() / trials as f64;
            Ok(GCheckRow { alpha, empirical, g_alpha: g_alpha(alpha)? })
        })
        .collect()
}
