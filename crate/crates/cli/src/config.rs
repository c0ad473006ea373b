//! Run configuration: a JSON manifest, overlaid by command-line flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use support_limits::bounds::{BoundOptions, Delta2Schedule, GammaRule, DEFAULT_DELTA1, DEFAULT_DELTA2};
use support_limits::model::{ModelSpec, ProblemDims, SignalPrior};
use support_limits::sim::DecoderSpec;

use crate::CliError;

/// Seed used by randomized commands when none is given; always echoed to stderr.
pub const DEFAULT_SEED: u64 = 20_170_123;

/// Longest grid a range may expand to.
const MAX_RANGE_POINTS: usize = 1_000_000;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelName {
    Linear,
    OneBit,
    GroupTesting,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum PriorKind {
    AllOnes,
    Fixed,
    Permuted,
    IidGaussian,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum DecoderName {
    Threshold,
    Ml,
    Comp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum FigureName {
    GtNoiseless,
    GtNoisy,
    PartialRecovery,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct ModelBlock {
    pub channel: Option<ChannelName>,
    pub sigma: Option<f64>,
    pub rho: Option<f64>,
    pub nu: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct PriorBlock {
    pub kind: Option<PriorKind>,
    /// Support values; a single value is repeated `k` times.
    pub b: Option<Vec<f64>>,
    pub sigma_beta_sq: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct DimsBlock {
    pub p: Option<usize>,
    pub k: Option<usize>,
    pub d_max: Option<usize>,
    /// Sets `d_max = floor(alpha* k)` when `d_max` is absent.
    pub alpha_star: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct BoundBlock {
    pub delta1: Option<f64>,
    pub delta2: Option<f64>,
    pub eta: Option<f64>,
    pub asymptotic: Option<bool>,
    pub gamma_rule: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct DecoderBlock {
    pub kind: Option<DecoderName>,
    pub delta1: Option<f64>,
    pub gamma_rule: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct SweepBlock {
    /// `block.field`, e.g. `dims.p` or `model.rho`.
    pub param: String,
    pub range: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunConfig {
    /// Optional; when present it must name the subcommand being run.
    pub command: Option<String>,
    pub model: ModelBlock,
    pub prior: PriorBlock,
    pub dims: DimsBlock,
    pub bound: BoundBlock,
    pub decoder: DecoderBlock,
    pub sweep: Option<SweepBlock>,
    pub figure: Option<FigureName>,
    pub theta: Option<String>,
    pub snr_db: Option<String>,
    pub rhos: Option<Vec<f64>>,
    pub n: Option<String>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
    pub only: Option<Vec<String>>,
    pub perturb: Option<f64>,
    pub report: Option<PathBuf>,
    pub verbose: Option<bool>,
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| bad(format!("{}: {e}", path.display())))
    }

    pub fn check_command(&self, name: &str) -> Result<(), CliError> {
        match &self.command {
            Some(c) if c != name => Err(bad(format!("config is for `{c}`, not `{name}`"))),
            _ => Ok(()),
        }
    }

    pub fn model(&self) -> Result<ModelSpec, CliError> {
        let m = &self.model;
        let channel = m.channel.ok_or_else(|| bad("no model given (use --model or model.channel)"))?;
        let stray = |name: &str, set: bool| if set { Err(bad(format!("model.{name} does not apply to {channel:?}"))) } else { Ok(()) };
        match channel {
            ChannelName::Linear | ChannelName::OneBit => {
                stray("rho", m.rho.is_some())?;
                stray("nu", m.nu.is_some())?;
                let sigma = m.sigma.unwrap_or(1.0);
                Ok(if channel == ChannelName::Linear { ModelSpec::linear(sigma) } else { ModelSpec::one_bit(sigma) })
            }
            ChannelName::GroupTesting => {
                stray("sigma", m.sigma.is_some())?;
                Ok(ModelSpec::group_testing(m.rho.unwrap_or(0.0), m.nu.unwrap_or(std::f64::consts::LN_2)))
            }
        }
    }

    pub fn dims(&self, n: usize) -> Result<ProblemDims, CliError> {
        let p = self.dims.p.ok_or_else(|| bad("dims.p is required"))?;
        let k = self.dims.k.ok_or_else(|| bad("dims.k is required"))?;
        let d_max = match (self.dims.d_max, self.dims.alpha_star) {
            (Some(d), _) => d,
            (None, Some(a)) if (0.0..1.0).contains(&a) => (a * k as f64).floor() as usize,
            (None, Some(a)) => return Err(bad(format!("alpha* = {a} must lie in [0, 1)"))),
            (None, None) => 0,
        };
        Ok(ProblemDims::new(p, k, n, d_max)?)
    }

    /// The prior and the support vector the bounds are evaluated at.
    pub fn prior(&self, model: &ModelSpec, k: usize) -> Result<(SignalPrior, Option<Vec<f64>>), CliError> {
        let gt = matches!(model.channel, support_limits::model::Channel::GroupTesting { .. });
        let kind = self.prior.kind.unwrap_or(if gt { PriorKind::AllOnes } else { PriorKind::Fixed });
        let vector = || -> Result<Vec<f64>, CliError> {
            match self.prior.b.as_deref() {
                None => Ok(vec![1.0; k]),
                Some([v]) => Ok(vec![*v; k]),
                Some(b) if b.len() == k => Ok(b.to_vec()),
                Some(b) => Err(bad(format!("prior.b has {} entries, expected 1 or k = {k}", b.len()))),
            }
        };
        let out = match kind {
            PriorKind::AllOnes => (SignalPrior::AllOnes, Some(vec![1.0; k])),
            PriorKind::Fixed => {
                let b = vector()?;
                (SignalPrior::FixedVector { b: b.clone() }, Some(b))
            }
            PriorKind::Permuted => {
                let b = vector()?;
                (SignalPrior::permuted(b.clone()), Some(b))
            }
            PriorKind::IidGaussian => {
                let s = self.prior.sigma_beta_sq.ok_or_else(|| bad("prior.sigma-beta-sq is required for iid-gaussian"))?;
                (SignalPrior::IidGaussian { sigma_beta_sq: s }, None)
            }
        };
        out.0.validate(k, model)?;
        Ok(out)
    }

    pub fn bound_options(&self) -> Result<BoundOptions, CliError> {
        let b = &self.bound;
        let gamma_rule = match &b.gamma_rule {
            Some(s) => parse_gamma_rule(s)?,
            None => GammaRule::Discrete,
        };
        let opts = BoundOptions {
            delta1: b.delta1.unwrap_or(DEFAULT_DELTA1),
            delta2: Delta2Schedule::Constant { delta2: b.delta2.unwrap_or(DEFAULT_DELTA2) },
            gamma_rule,
            eta: b.eta.unwrap_or(0.0),
            asymptotic: b.asymptotic.unwrap_or(false),
            ..BoundOptions::default()
        };
        opts.validate()?;
        Ok(opts)
    }

    pub fn decoder(&self) -> Result<DecoderSpec, CliError> {
        let d = &self.decoder;
        Ok(match d.kind.unwrap_or(DecoderName::Ml) {
            DecoderName::Ml => DecoderSpec::ExhaustiveMl,
            DecoderName::Comp => DecoderSpec::CompGt,
            DecoderName::Threshold => DecoderSpec::Threshold {
                delta1: d.delta1.unwrap_or(DEFAULT_DELTA1),
                gamma_rule: match &d.gamma_rule {
                    Some(s) => parse_gamma_rule(s)?,
                    None => GammaRule::Discrete,
                },
            },
        })
    }

    /// Overwrite one numeric field named `block.field`.
    pub fn set_param(&mut self, param: &str, v: f64) -> Result<(), CliError> {
        let whole = |v: f64| -> Result<usize, CliError> {
            if v >= 0.0 && v.fract() == 0.0 && v < 1e15 {
                Ok(v as usize)
            } else {
                Err(bad(format!("{param} needs whole numbers, got {v}")))
            }
        };
        match param {
            "dims.p" => self.dims.p = Some(whole(v)?),
            "dims.k" => self.dims.k = Some(whole(v)?),
            "dims.d-max" => self.dims.d_max = Some(whole(v)?),
            "dims.alpha-star" => self.dims.alpha_star = Some(v),
            "model.sigma" => self.model.sigma = Some(v),
            "model.rho" => self.model.rho = Some(v),
            "model.nu" => self.model.nu = Some(v),
            "bound.delta1" => self.bound.delta1 = Some(v),
            "bound.delta2" => self.bound.delta2 = Some(v),
            "bound.eta" => self.bound.eta = Some(v),
            _ => return Err(bad(format!("unknown sweep parameter `{param}`; expected one of {}", SWEEP_PARAMS.join(", ")))),
        }
        Ok(())
    }
}

pub const SWEEP_PARAMS: [&str; 10] = [
    "dims.p",
    "dims.k",
    "dims.d-max",
    "dims.alpha-star",
    "model.sigma",
    "model.rho",
    "model.nu",
    "bound.delta1",
    "bound.delta2",
    "bound.eta",
];

/// `discrete`, `zero`, `chebyshev:<delta0>` or `markov:<delta0>`.
pub fn parse_gamma_rule(s: &str) -> Result<GammaRule, CliError> {
    let (name, arg) = match s.split_once(':') {
        Some((n, a)) => (n, Some(a)),
        None => (s, None),
    };
    let delta0 = || -> Result<f64, CliError> {
        arg.ok_or_else(|| bad(format!("gamma rule `{name}` needs `:<delta0>`")))?
            .parse::<f64>()
            .map_err(|_| bad(format!("bad delta0 in gamma rule `{s}`")))
    };
    match name {
        "discrete" if arg.is_none() => Ok(GammaRule::Discrete),
        "zero" if arg.is_none() => Ok(GammaRule::Zero),
        "chebyshev" => Ok(GammaRule::Chebyshev { delta0: delta0()? }),
        "markov" => Ok(GammaRule::Markov { delta0: delta0()? }),
        _ => Err(bad(format!("unknown gamma rule `{s}`"))),
    }
}

/// Expand `a:b:step` (inclusive of `b` up to rounding), a comma list, or one number.
pub fn parse_range(s: &str) -> Result<Vec<f64>, CliError> {
    let num = |t: &str| -> Result<f64, CliError> {
        let v: f64 = t.trim().parse().map_err(|_| bad(format!("malformed range `{s}`: `{t}` is not a number")))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(bad(format!("malformed range `{s}`: non-finite value")))
        }
    };
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [a, b, step] => {
            let (a, b, step) = (num(a)?, num(b)?, num(step)?);
            if step.is_nan() || step <= 0.0 {
                return Err(bad(format!("malformed range `{s}`: step must be positive")));
            }
            if a > b {
                return Err(bad(format!("malformed range `{s}`: start exceeds end")));
            }
            let count = ((b - a) / step + 1e-9).floor() + 1.0;
            if count > MAX_RANGE_POINTS as f64 {
                return Err(bad(format!("range `{s}` has more than {MAX_RANGE_POINTS} points")));
            }
            // Round away the drift of repeated float steps so 0.15 prints as 0.15.
            Ok((0..count as usize).map(|i| tidy(a + step * i as f64)).collect())
        }
        [list] => {
            let v = list.split(',').map(num).collect::<Result<Vec<f64>, _>>()?;
            Ok(v)
        }
        _ => Err(bad(format!("malformed range `{s}`: expected a:b:step, a comma list, or a number"))),
    }
}

fn tidy(v: f64) -> f64 {
    let r = (v * 1e12).round() / 1e12;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// Integer grid, e.g. measurement counts.
pub fn parse_count_range(s: &str) -> Result<Vec<usize>, CliError> {
    parse_range(s)?
        .into_iter()
        .map(|v| {
            if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                Ok(v as usize)
            } else {
                Err(bad(format!("range `{s}` must contain whole numbers, got {v}")))
            }
        })
        .collect()
}
