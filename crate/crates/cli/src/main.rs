//! `support-limits`: threshold curves, decoder simulations and the self-check suite.
//!
//! Exit codes: 0 success, 1 a verify check failed, 2 invalid configuration or
//! I/O failure, 3 numerical non-convergence, 4 a desk-scale guard refused.

mod config;
mod output;
mod verify;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use support_limits::bounds::{figure_curves, generic_thresholds, Figure, FigureOptions, CURVE_CSV_HEADER};
use support_limits::numerics::set_entropy_perturbation;
use support_limits::sim::{phase_sweep, SIM_CSV_HEADER};
use support_limits::{Error, Execution};

use config::{
    parse_count_range, parse_range, ChannelName, DecoderName, FigureName, Format, PriorKind, RunConfig, SweepBlock, DEFAULT_SEED,
};
use output::Table;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    Lib(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Lib(Error::Domain(_) | Error::InvalidConfig(_)) => 2,
            CliError::Lib(Error::NonConvergence { .. }) => 3,
            CliError::Lib(Error::Guard(_)) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "invalid configuration: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

#[derive(Parser, Debug)]
#[command(name = "support-limits", version, about = "Sample-complexity thresholds and seeded simulations for sparse support recovery")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Curve tables for a figure, or generic thresholds over a parameter sweep.
    Threshold(ThresholdArgs),
    /// Monte Carlo error rates of a decoder over a grid of measurement counts.
    Simulate(SimulateArgs),
    /// Check the library against independent oracles; exit 1 if any check fails.
    Verify(VerifyArgs),
}

#[derive(Args, Debug)]
struct IoArgs {
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args, Debug)]
struct ModelArgs {
    #[arg(long, value_enum)]
    model: Option<ChannelName>,
    /// Noise level (linear and 1-bit).
    #[arg(long)]
    sigma: Option<f64>,
    /// Crossover probability (group testing).
    #[arg(long)]
    rho: Option<f64>,
    /// Design parameter: each item joins a test with probability nu / k.
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long, value_enum)]
    prior: Option<PriorKind>,
    /// Support values, comma separated; one value is repeated k times.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    b: Option<Vec<f64>>,
    #[arg(long)]
    sigma_beta_sq: Option<f64>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    d_max: Option<usize>,
    /// Partial recovery level; sets d_max = floor(alpha* k) unless --d-max is given.
    #[arg(long)]
    alpha_star: Option<f64>,
}

#[derive(Args, Debug)]
struct ThresholdArgs {
    #[command(flatten)]
    io: IoArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_enum)]
    figure: Option<FigureName>,
    /// Sparsity exponents for the group testing figures, a:b:step or a list.
    #[arg(long)]
    theta: Option<String>,
    /// SNR grid in dB for the partial recovery figure.
    #[arg(long, allow_hyphen_values = true)]
    snr_db: Option<String>,
    /// Crossover probabilities for the noisy group testing figure.
    #[arg(long, value_delimiter = ',')]
    rhos: Option<Vec<f64>>,
    /// `block.field=range`, e.g. `dims.p=1000:10000:1000`.
    #[arg(long)]
    sweep: Option<String>,
    #[arg(long)]
    delta1: Option<f64>,
    #[arg(long)]
    delta2: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    /// Use k log(p/k) style numerators instead of exact binomials.
    #[arg(long)]
    asymptotic: bool,
    /// discrete, zero, chebyshev:<delta0> or markov:<delta0>.
    #[arg(long)]
    gamma_rule: Option<String>,
    /// Print the binding partition size or alpha of every row to stderr.
    #[arg(long)]
    verbose: bool,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    io: IoArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Measurement counts, a:b:step or a list.
    #[arg(long)]
    n: Option<String>,
    #[arg(long, value_enum)]
    decoder: Option<DecoderName>,
    #[arg(long)]
    delta1: Option<f64>,
    #[arg(long)]
    gamma_rule: Option<String>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[command(flatten)]
    io: IoArgs,
    /// Run only these checks (comma separated).
    #[arg(long, value_delimiter = ',')]
    only: Option<Vec<String>>,
    /// Scale every binary entropy by 1 + eps, to confirm the checks notice.
    #[arg(long)]
    perturb: Option<f64>,
    /// Also write the JSON report here.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// List the check names and exit.
    #[arg(long)]
    list: bool,
}

fn set<T>(dst: &mut Option<T>, src: Option<T>) {
    if src.is_some() {
        *dst = src;
    }
}

fn base_config(io: &IoArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match &io.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    set(&mut cfg.output, io.output.clone());
    set(&mut cfg.format, io.format);
    Ok(cfg)
}

fn apply_model(cfg: &mut RunConfig, m: &ModelArgs) {
    set(&mut cfg.model.channel, m.model);
    set(&mut cfg.model.sigma, m.sigma);
    set(&mut cfg.model.rho, m.rho);
    set(&mut cfg.model.nu, m.nu);
    set(&mut cfg.prior.kind, m.prior);
    set(&mut cfg.prior.b, m.b.clone());
    set(&mut cfg.prior.sigma_beta_sq, m.sigma_beta_sq);
    set(&mut cfg.dims.p, m.p);
    set(&mut cfg.dims.k, m.k);
    set(&mut cfg.dims.d_max, m.d_max);
    set(&mut cfg.dims.alpha_star, m.alpha_star);
}

fn seed_or_default(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        eprintln!("seed: {DEFAULT_SEED} (default)");
        DEFAULT_SEED
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// Parse and run; returns the process exit code.
fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Threshold(a) => {
            let mut cfg = base_config(&a.io)?;
            apply_model(&mut cfg, &a.model);
            set(&mut cfg.figure, a.figure);
            set(&mut cfg.theta, a.theta);
            set(&mut cfg.snr_db, a.snr_db);
            set(&mut cfg.rhos, a.rhos);
            if let Some(s) = a.sweep {
                let (param, range) =
                    s.split_once('=').ok_or_else(|| CliError::Config(format!("--sweep `{s}` is not block.field=range")))?;
                cfg.sweep = Some(SweepBlock { param: param.into(), range: range.into() });
            }
            set(&mut cfg.bound.delta1, a.delta1);
            set(&mut cfg.bound.delta2, a.delta2);
            set(&mut cfg.bound.eta, a.eta);
            set(&mut cfg.bound.asymptotic, a.asymptotic.then_some(true));
            set(&mut cfg.bound.gamma_rule, a.gamma_rule);
            set(&mut cfg.verbose, a.verbose.then_some(true));
            cmd_threshold(&cfg)
        }
        Command::Simulate(a) => {
            let mut cfg = base_config(&a.io)?;
            apply_model(&mut cfg, &a.model);
            set(&mut cfg.n, a.n);
            set(&mut cfg.decoder.kind, a.decoder);
            set(&mut cfg.decoder.delta1, a.delta1);
            set(&mut cfg.decoder.gamma_rule, a.gamma_rule);
            set(&mut cfg.trials, a.trials);
            set(&mut cfg.seed, a.seed);
            cmd_simulate(&cfg)
        }
        Command::Verify(a) => {
            if a.list {
                for name in verify::check_names() {
                    println!("{name}");
                }
                return Ok(0);
            }
            let mut cfg = base_config(&a.io)?;
            set(&mut cfg.only, a.only);
            set(&mut cfg.perturb, a.perturb);
            set(&mut cfg.report, a.report);
            set(&mut cfg.seed, a.seed);
            cmd_verify(&cfg)
        }
    }
}

#[derive(Serialize)]
struct ThresholdRow {
    sweep: String,
    x: Option<f64>,
    n_ach: f64,
    n_conv: f64,
    binding_ach: Option<f64>,
    binding_conv: Option<f64>,
    rate_ach_bits: f64,
    rate_conv_bits: f64,
}

const THRESHOLD_CSV_HEADER: [&str; 8] = ["sweep", "x", "n_ach", "n_conv", "binding_ach", "binding_conv", "rate_ach_bits", "rate_conv_bits"];

fn cmd_threshold(cfg: &RunConfig) -> Result<i32, CliError> {
    cfg.check_command("threshold")?;
    let format = cfg.format.unwrap_or_default();
    let verbose = cfg.verbose.unwrap_or(false);
    if let Some(fig) = cfg.figure {
        if cfg.sweep.is_some() {
            return Err(CliError::Config("a figure run takes its grid from --theta or --snr-db, not --sweep".into()));
        }
        let mut opts = FigureOptions { exec: Execution::Parallel, ..FigureOptions::default() };
        set_if(&mut opts.alpha_star, cfg.dims.alpha_star);
        set_if(&mut opts.sigma, cfg.model.sigma);
        if let Some(r) = &cfg.rhos {
            opts.rhos = r.clone();
        }
        let (figure, grid) = match fig {
            FigureName::GtNoiseless => (Figure::GtNoiselessTheta, parse_range(cfg.theta.as_deref().unwrap_or("0.05:0.95:0.05"))?),
            FigureName::GtNoisy => (Figure::GtNoisyTheta, parse_range(cfg.theta.as_deref().unwrap_or("0.05:0.95:0.05"))?),
            FigureName::PartialRecovery => (Figure::PartialRecoverySnr, parse_range(cfg.snr_db.as_deref().unwrap_or("-20:50:1"))?),
        };
        let rows = figure_curves(figure, &grid, &opts)?;
        if verbose {
            for r in &rows {
                eprintln!("{} x={} {}: y={} binding={}", r.figure, r.x, r.curve, r.y, fmt_opt(r.binding));
            }
        }
        let table = Table {
            header: &CURVE_CSV_HEADER,
            rows: rows.into_iter().map(|r| (vec![r.figure.clone(), r.x.to_string(), r.curve.clone(), r.y.to_string()], r)).collect(),
        };
        table.write(format, cfg.output.as_deref())?;
        return Ok(0);
    }

    let points: Vec<(String, Option<f64>)> = match &cfg.sweep {
        Some(s) => parse_range(&s.range)?.into_iter().map(|v| (s.param.clone(), Some(v))).collect(),
        None => vec![("none".into(), None)],
    };
    let mut rows = Vec::new();
    for (param, x) in points {
        let mut c = cfg.clone();
        if let Some(v) = x {
            c.set_param(&param, v)?;
        }
        let model = c.model()?;
        let dims = c.dims(0)?;
        let (prior, b) = c.prior(&model, dims.k)?;
        let b = b.ok_or_else(|| CliError::Config("thresholds need a vector prior (all-ones, fixed or permuted)".into()))?;
        let r = generic_thresholds(&model, &prior, &b, &dims, &c.bound_options()?)?;
        if verbose {
            eprintln!("{param}={}: binding ell achievability {}, converse {}", fmt_opt(x), fmt_opt(r.binding_ach), fmt_opt(r.binding_conv));
        }
        let bits = dims.k as f64 * (dims.p as f64 / dims.k as f64).log2();
        rows.push(ThresholdRow {
            sweep: param,
            x,
            n_ach: r.n_ach,
            n_conv: r.n_conv,
            binding_ach: r.binding_ach,
            binding_conv: r.binding_conv,
            rate_ach_bits: bits / r.n_ach,
            rate_conv_bits: bits / r.n_conv,
        });
    }
    rows.sort_by(|a, b| a.x.unwrap_or(0.0).total_cmp(&b.x.unwrap_or(0.0)));
    let table = Table {
        header: &THRESHOLD_CSV_HEADER,
        rows: rows
            .into_iter()
            .map(|r| {
                let rec = vec![
                    r.sweep.clone(),
                    fmt_opt(r.x),
                    r.n_ach.to_string(),
                    r.n_conv.to_string(),
                    fmt_opt(r.binding_ach),
                    fmt_opt(r.binding_conv),
                    r.rate_ach_bits.to_string(),
                    r.rate_conv_bits.to_string(),
                ];
                (rec, r)
            })
            .collect(),
    };
    table.write(format, cfg.output.as_deref())?;
    Ok(0)
}

fn set_if(dst: &mut f64, src: Option<f64>) {
    if let Some(v) = src {
        *dst = v;
    }
}

fn cmd_simulate(cfg: &RunConfig) -> Result<i32, CliError> {
    cfg.check_command("simulate")?;
    let model = cfg.model()?;
    let dims = cfg.dims(0)?;
    let (prior, _) = cfg.prior(&model, dims.k)?;
    let decoder = cfg.decoder()?;
    let mut ns = parse_count_range(cfg.n.as_deref().ok_or_else(|| CliError::Config("a measurement grid is required (--n)".into()))?)?;
    ns.sort_unstable();
    ns.dedup();
    let trials = cfg.trials.unwrap_or(100);
    let seed = seed_or_default(cfg.seed);
    let reports = phase_sweep(&model, &prior, dims.p, dims.k, dims.d_max, &ns, &decoder, trials, seed, Execution::Parallel)?;
    let table = Table { header: &SIM_CSV_HEADER, rows: reports.into_iter().map(|r| (r.csv_record().to_vec(), r)).collect() };
    table.write(cfg.format.unwrap_or_default(), cfg.output.as_deref())?;
    Ok(0)
}

#[derive(Serialize)]
struct VerifyReport<'a> {
    seed: u64,
    perturb: f64,
    passed: usize,
    failed: usize,
    checks: &'a [verify::CheckResult],
}

const VERIFY_CSV_HEADER: [&str; 6] = ["check", "passed", "measured", "tolerance", "seconds", "detail"];

fn cmd_verify(cfg: &RunConfig) -> Result<i32, CliError> {
    cfg.check_command("verify")?;
    let perturb = cfg.perturb.unwrap_or(0.0);
    if !perturb.is_finite() {
        return Err(CliError::Config("--perturb must be finite".into()));
    }
    let seed = seed_or_default(cfg.seed);
    let only = cfg.only.clone().unwrap_or_default();
    set_entropy_perturbation(perturb);
    let results = verify::run(&only, &verify::Ctx { seed });
    set_entropy_perturbation(0.0);
    let results = results.map_err(CliError::Config)?;
    let failed = results.iter().filter(|r| !r.passed).count();
    let report = VerifyReport { seed, perturb, passed: results.len() - failed, failed, checks: &results };
    if let Some(path) = &cfg.report {
        output::write_json(&report, path)?;
    }
    match cfg.format.unwrap_or_default() {
        Format::Json => {
            let text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Io(e.to_string()))?;
            match &cfg.output {
                Some(p) => std::fs::write(p, text + "\n").map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?,
                None => println!("{text}"),
            }
        }
        Format::Csv => {
            let table = Table {
                header: &VERIFY_CSV_HEADER,
                rows: results
                    .iter()
                    .map(|r| {
                        let rec = vec![
                            r.name.to_string(),
                            r.passed.to_string(),
                            format!("{:.6e}", r.measured),
                            format!("{:.6e}", r.tolerance),
                            format!("{:.3}", r.seconds),
                            r.detail.clone(),
                        ];
                        (rec, r)
                    })
                    .collect(),
            };
            table.write(Format::Csv, cfg.output.as_deref())?;
        }
    }
    eprintln!("{} checks: {} passed, {failed} failed", results.len(), results.len() - failed);
    Ok(if failed == 0 { 0 } else { 1 })
}

/// Thread cap from `SUPPORT_LIMITS_THREADS`.
fn thread_cap(value: Option<&str>) -> Result<Option<usize>, CliError> {
    match value {
        None => Ok(None),
        Some(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(CliError::Config(format!("SUPPORT_LIMITS_THREADS must be a positive integer, got `{v}`"))),
        },
    }
}

fn init_threads() -> Result<(), CliError> {
    let cap = thread_cap(std::env::var("SUPPORT_LIMITS_THREADS").ok().as_deref())?;
    #[cfg(feature = "parallel")]
    if let Some(n) = cap {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Config(e.to_string()))?;
    }
    #[cfg(not(feature = "parallel"))]
    let _ = cap;
    Ok(())
}

fn main() {
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
    std::process::exit(run_cli(std::env::args_os()));
}
