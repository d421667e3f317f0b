//! `sompns`: dictionary generation, metrics, recovery, bounds and Monte Carlo
//! campaigns from the command line.
//!
//! Exit codes: 0 success, 1 domain error, 2 usage or config error.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use sompns::bounds::{
    b2_bound, bias_b, combinatorial_c, conjectured_bound, epsilon_prime, epsilon_threshold, kappa, theorem5_bound,
    Conditioning, ConjecturedBoundParams,
};
use sompns::experiments::{
    estimate_snr_in, generate_sparse_signal, Campaign, ExperimentConfig, Precision, SignPattern, SweepOptions,
    FORMAT_VERSION,
};
use sompns::recovery::{somp_ns_prescaled, RecoveryError};
use sompns::{matrix_io, somp_ns, Dictionary, Error, NoiseSpec, RecoveryTrace, Support, WeightVector};

#[derive(Parser, Debug)]
#[command(name = "sompns", about = "Weighted simultaneous OMP toolkit")]
struct Cli {
    /// Master seed; overrides the config seed where one exists.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Arithmetic for recovery runs.
    #[arg(long, global = true, value_parser = ["32", "64"])]
    precision: Option<String>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    threads: Option<u16>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a random unit-norm dictionary.
    GenDict(GenDictArgs),
    /// Coherence, Babel profile, spark bound and support-dependent constants.
    DictMetrics(DictMetricsArgs),
    /// Run SOMP-NS and write the per-iteration trace.
    Recover(RecoverArgs),
    /// Evaluate a recovery-probability lower bound.
    Bound(BoundArgs),
    /// Monte Carlo campaigns.
    #[command(subcommand)]
    Experiment(ExperimentCommand),
    /// Mean input SNR in dB of a campaign's signal model.
    SnrEstimate(SnrArgs),
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum DictKind {
    Gaussian,
    Rademacher,
}

#[derive(Args, Debug)]
struct GenDictArgs {
    #[arg(long, value_enum)]
    kind: DictKind,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    n: usize,
}

#[derive(Args, Debug)]
struct DictMetricsArgs {
    #[arg(long)]
    dict: PathBuf,
    /// 1-based atom indices, e.g. `1,5,9`.
    #[arg(long)]
    support: Option<String>,
    /// Largest Babel order reported.
    #[arg(long, default_value_t = 10)]
    max_p: usize,
    /// Also compute the exact δ_s by enumeration.
    #[arg(long)]
    ric_order: Option<usize>,
    /// Largest number of submatrices the enumeration may visit.
    #[arg(long, default_value_t = 1_000_000)]
    ric_budget: u128,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Form {
    /// Weights inside the selection metric.
    Metric,
    /// Columns of Y scaled by the weights, then plain SOMP.
    Prescaled,
}

#[derive(Args, Debug)]
struct RecoverArgs {
    #[arg(long)]
    dict: PathBuf,
    /// Measurement matrix, m × K.
    #[arg(long)]
    y: PathBuf,
    /// Comma-separated weights; all ones when omitted.
    #[arg(long)]
    weights: Option<String>,
    #[arg(long)]
    iters: usize,
    #[arg(long, value_enum, default_value_t = Form::Metric)]
    form: Form,
}

#[derive(Copy, Clone, Debug, PartialEq, ValueEnum)]
enum Mode {
    Ric,
    Coherence,
}

#[derive(Copy, Clone, Debug, PartialEq, ValueEnum)]
enum BoundKind {
    Theorem5,
    B1,
    B2,
}

#[derive(Args, Debug)]
struct BoundArgs {
    #[arg(long)]
    dict: PathBuf,
    /// 1-based atom indices of the true support.
    #[arg(long)]
    support: String,
    /// Signal matrix, n × K. Without it the signal is drawn from the sign pattern.
    #[arg(long, conflicts_with = "sign_pattern")]
    x: Option<PathBuf>,
    /// Sign pattern 1 (shared per row) or 2 (independent entries).
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    sign_pattern: Option<u8>,
    /// Magnitude of the nonzero entries; for b2 with `--x`, defaults to the smallest one.
    #[arg(long)]
    mu_x: Option<f64>,
    #[arg(long)]
    weights: String,
    /// Noise standard deviations, one per measurement vector.
    #[arg(long)]
    sigma: String,
    #[arg(long, value_enum)]
    mode: Mode,
    #[arg(long = "bound", value_enum, default_value_t = BoundKind::Theorem5)]
    kind: BoundKind,
    /// Number of correct selections still required; defaults to |S| − 1.
    #[arg(long)]
    s: Option<usize>,
    /// Use this δ_|S| instead of enumerating (ric mode).
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, default_value_t = 1_000_000)]
    ric_budget: u128,
    /// Effective atom count n̄ for b1.
    #[arg(long)]
    n_bar: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Keep the bias term in b1.
    #[arg(long)]
    keep_bias: bool,
    /// Exit 1 when the bound is vacuous.
    #[arg(long)]
    require_valid: bool,
}

#[derive(Subcommand, Debug)]
enum ExperimentCommand {
    /// Success counts over the (θ_q, θ_σ) grid; needs K = 2.
    Angles(CampaignArgs),
    /// Failure counts as K grows, equal weights.
    Ksweep(KSweepArgs),
}

#[derive(Args, Debug)]
struct CampaignArgs {
    #[arg(long)]
    config: PathBuf,
    /// Reuse draws across θ_q within each θ_σ row.
    #[arg(long)]
    shared_draws: bool,
    /// Multiplies every σ; 0 removes the noise.
    #[arg(long, default_value_t = 1.0)]
    noise_scale: f64,
}

#[derive(Args, Debug)]
struct KSweepArgs {
    #[command(flatten)]
    campaign: CampaignArgs,
    /// Comma-separated K values.
    #[arg(long, default_value = "1,2,3,4,5,6,7,8")]
    ks: String,
}

#[derive(Args, Debug)]
struct SnrArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    cases: usize,
}

/// A failure plus the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure { code: if e.is_usage() { 2 } else { 1 }, message: e.to_string() }
    }
}

type CliResult<T> = Result<T, Failure>;

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: 2, message: message.into() }
}

fn main() -> ExitCode {
    let version = format!("{} (format {FORMAT_VERSION})", env!("CARGO_PKG_VERSION"));
    let matches = Cli::command().version(&*Box::leak(version.into_boxed_str())).get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        pool = pool.num_threads(t as usize);
    }
    let pool = pool.build().map_err(|e| usage(format!("cannot start worker pool: {e}")))?;
    let text = pool.install(|| dispatch(&cli))?;
    emit(cli.out.as_deref(), &text)
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    let written = match out {
        Some(path) => fs::write(path, text),
        None => std::io::stdout().lock().write_all(text.as_bytes()),
    };
    written.map_err(|e| Failure::from(Error::Io(e)))
}

fn dispatch(cli: &Cli) -> CliResult<String> {
    match &cli.command {
        Command::GenDict(a) => gen_dict(a, cli.seed.unwrap_or(0)),
        Command::DictMetrics(a) => dict_metrics(a),
        Command::Recover(a) => recover(a, cli.precision.as_deref()),
        Command::Bound(a) => bound(a, cli.seed.unwrap_or(0)),
        Command::Experiment(ExperimentCommand::Angles(a)) => {
            let campaign = load_campaign(&a.config, cli)?;
            let summary = campaign.angle_sweep(&sweep_options(a))?;
            Ok(summary.to_csv())
        }
        Command::Experiment(ExperimentCommand::Ksweep(a)) => {
            let campaign = load_campaign(&a.campaign.config, cli)?;
            let ks = parse_list::<usize>(&a.ks, "--ks")?;
            Ok(campaign.k_sweep(&ks, &sweep_options(&a.campaign))?.to_csv())
        }
        Command::SnrEstimate(a) => {
            let config = load_config(&a.config, cli)?;
            let snr = estimate_snr_in(config, a.cases)?;
            Ok(format!("snr_in_db\n{snr}\n"))
        }
    }
}

fn gen_dict(a: &GenDictArgs, seed: u64) -> CliResult<String> {
    let dict = match a.kind {
        DictKind::Gaussian => Dictionary::gaussian(a.m, a.n, seed)?,
        DictKind::Rademacher => Dictionary::rademacher(a.m, a.n, seed)?,
    };
    Ok(matrix_io::to_string(dict.atoms()))
}

fn dict_metrics(a: &DictMetricsArgs) -> CliResult<String> {
    let dict = Dictionary::load(&a.dict)?;
    let support = a.support.as_deref().map(|s| Support::parse_one_based(s, dict.len())).transpose()?;
    let report = dict.metrics(a.max_p, support.as_ref())?;
    let mut out = String::from("metric,value\n");
    writeln!(out, "coherence,{}", report.coherence).unwrap();
    for (p, v) in &report.babel {
        writeln!(out, "babel_{p},{v}").unwrap();
    }
    writeln!(out, "spark_lower_bound,{}", report.spark_lower_bound).unwrap();
    if let Some(e) = report.erc_norm {
        writeln!(out, "erc_norm,{e}").unwrap();
    }
    if let Some(r) = report.ric_coherence_bound {
        writeln!(out, "ric_coherence_bound,{}", r.value).unwrap();
    }
    if let Some(s) = a.ric_order {
        writeln!(out, "exact_ric_{s},{}", dict.exact_ric(s, a.ric_budget)?).unwrap();
    }
    Ok(out)
}

fn recover(a: &RecoverArgs, precision: Option<&str>) -> CliResult<String> {
    let dict = Dictionary::load(&a.dict)?;
    let y = matrix_io::read(&a.y)?;
    let weights = match &a.weights {
        Some(w) => WeightVector::new(parse_list(w, "--weights")?)?,
        None => WeightVector::ones(y.ncols()),
    };
    match precision.unwrap_or("64") {
        "32" => trace_csv(run_form(a.form, &dict.atoms().clone().cast::<f32>(), &y.clone().cast::<f32>(), &weights, a.iters)?),
        _ => trace_csv(run_form(a.form, dict.atoms(), &y, &weights, a.iters)?),
    }
}

fn run_form<T: sompns::linalg::Scalar>(
    form: Form,
    atoms: &DMatrix<T>,
    y: &DMatrix<T>,
    weights: &WeightVector,
    iters: usize,
) -> CliResult<RecoveryTrace<T>> {
    let run = match form {
        Form::Metric => somp_ns(atoms, y, weights, iters),
        Form::Prescaled => somp_ns_prescaled(atoms, y, weights, iters),
    };
    run.map_err(|e: RecoveryError<T>| Failure::from(Error::from(e)))
}

fn trace_csv<T: sompns::linalg::Scalar>(trace: RecoveryTrace<T>) -> CliResult<String> {
    let mut out = String::from("t,selected_index,metric_value,residual_fro\n");
    for (t, (j, v)) in trace.selected.iter().zip(&trace.metric_values).enumerate() {
        writeln!(out, "{},{},{},{}", t + 1, j + 1, v, trace.residual_norms[t + 1]).unwrap();
    }
    Ok(out)
}

fn bound(a: &BoundArgs, seed: u64) -> CliResult<String> {
    let dict = Dictionary::load(&a.dict)?;
    let n = dict.len();
    let support = Support::parse_one_based(&a.support, n)?;
    if support.is_empty() {
        return Err(usage("--support must name at least one atom"));
    }
    let weights = WeightVector::new(parse_list(&a.weights, "--weights")?)?;
    let noise = NoiseSpec::new(parse_list(&a.sigma, "--sigma")?)?;
    let x = match (&a.x, a.sign_pattern) {
        (Some(path), _) => {
            let x = matrix_io::read(path)?;
            if x.nrows() != n {
                return Err(usage(format!("X has {} rows but the dictionary has {n} atoms", x.nrows())));
            }
            x
        }
        (None, Some(p)) => {
            let mu = a.mu_x.ok_or_else(|| usage("--sign-pattern needs --mu-x"))?;
            let pattern = SignPattern::try_from(p).map_err(usage)?;
            generate_sparse_signal(n, &support, mu, pattern, weights.len(), seed)?
        }
        (None, None) => return Err(usage("give either --x or --sign-pattern with --mu-x")),
    };
    let conditioning = match a.mode {
        Mode::Ric => {
            let delta = match a.delta {
                Some(d) => d,
                None => dict.exact_ric(support.len(), a.ric_budget)?,
            };
            Conditioning::Ric { erc_norm: dict.erc_constant(&support)?, delta }
        }
        Mode::Coherence => Conditioning::Coherence { mu: dict.coherence()? },
    };
    let s = a.s.unwrap_or(support.len() - 1);
    let eps = epsilon_threshold(conditioning, &x, &support, &weights)?;
    let k = kappa(&weights, &noise)?;
    let b = bias_b(&weights, &noise)?;

    let (epsilon, epsilon_bar, c_s, prob, valid) = match a.kind {
        BoundKind::Theorem5 => {
            let r = theorem5_bound(eps.value, &weights, &noise, n, support.len(), s)?;
            (r.epsilon, r.epsilon_bar, r.c_s, r.prob_lower_bound, r.valid && !eps.vacuous)
        }
        BoundKind::B1 => {
            let n_bar = a.n_bar.ok_or_else(|| usage("--bound b1 needs --n-bar"))?;
            let params = ConjecturedBoundParams::new(n_bar, a.alpha, !a.keep_bias)?;
            let bar = if params.drop_bias { eps.value } else { eps.value - b };
            let p = conjectured_bound(&params, eps.value, &weights, &noise, s)?;
            let valid = !eps.vacuous && bar > 0.0;
            (eps.value, bar, combinatorial_c(support.len(), s)?, Some(p), valid)
        }
        BoundKind::B2 => {
            let mu_x = match a.mu_x {
                Some(m) => m,
                None => smallest_support_magnitude(&x, &support),
            };
            let factor = epsilon_prime(conditioning, support.len());
            let p = b2_bound(mu_x, &weights, &noise, n, support.len(), factor.value)?;
            let c = combinatorial_c(support.len(), support.len() - 1)?;
            (factor.value, factor.value, c, Some(p), !factor.vacuous)
        }
    };
    if a.require_valid && !valid {
        return Err(Failure { code: 1, message: "bound is vacuous for these inputs".into() });
    }
    let name = match a.kind {
        BoundKind::Theorem5 => "theorem5",
        BoundKind::B1 => "b1",
        BoundKind::B2 => "b2",
    };
    let mode = match a.mode {
        Mode::Ric => "ric",
        Mode::Coherence => "coherence",
    };
    let fmt_opt = |v: Option<f64>| v.map(|p| p.to_string()).unwrap_or_default();
    let mut out = String::from("bound,mode,kappa,b,epsilon,epsilon_bar,c_s,prob_lower_bound,prob_clamped,valid\n");
    writeln!(
        out,
        "{name},{mode},{k},{b},{epsilon},{epsilon_bar},{c_s},{},{},{valid}",
        fmt_opt(prob),
        fmt_opt(prob.map(|p| p.clamp(0.0, 1.0)))
    )
    .unwrap();
    Ok(out)
}

fn smallest_support_magnitude(x: &DMatrix<f64>, support: &Support) -> f64 {
    support
        .as_slice()
        .iter()
        .flat_map(|&j| x.row(j).iter().map(|v| v.abs()).collect::<Vec<_>>())
        .fold(f64::INFINITY, f64::min)
}

fn load_config(path: &Path, cli: &Cli) -> CliResult<ExperimentConfig> {
    let mut config = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(p) = &cli.precision {
        config.precision = if p == "64" { Precision::Double } else { Precision::Single };
    }
    Ok(config)
}

fn load_campaign(path: &Path, cli: &Cli) -> CliResult<Campaign> {
    Ok(Campaign::new(load_config(path, cli)?)?)
}

fn sweep_options(a: &CampaignArgs) -> SweepOptions {
    SweepOptions { noise_scale: a.noise_scale, shared_draws: a.shared_draws, ..SweepOptions::default() }
}

fn parse_list<T: std::str::FromStr>(text: &str, flag: &str) -> CliResult<Vec<T>> {
    text.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<T>().map_err(|_| usage(format!("{flag}: cannot parse {t:?}"))))
        .collect()
}
