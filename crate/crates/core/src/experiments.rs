//! Seeded Monte Carlo campaigns: sign-pattern signals, angle sweeps over
//! `(θ_q, θ_σ)`, K-sweeps, input SNR estimation, calibration of `μ_X` and the
//! log-linear fit of failure rate against `K`.
//!
//! Every trial draws its support, signal and noise from a generator seeded by
//! `mix(seed, [cell, trial])`. Cells accumulate integer counts, so outputs are
//! bit-identical for any worker count.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bounds::{ConjecturedBoundParams, NoiseSpec};
use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::linalg::{select_columns, Scalar};
use crate::recovery::{somp_ns, RecoveryError, WeightVector};
use crate::rng::{from_seed, mix};
use crate::support::Support;

/// Version of the CSV and config schemas; bumped on any column change.
pub const FORMAT_VERSION: u32 = 1;

/// Two-sided 95% standard normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

const SNR_STREAM: u64 = u64::MAX;
const CALIBRATION_STREAM: u64 = u64::MAX - 1;
const SHARED_DRAWS_STREAM: u64 = u64::MAX - 2;

/// How the signs of `X_{i,k} = ±μ_X` relate across measurement vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum SignPattern {
    /// One sign per row, shared by every column.
    Shared,
    /// Independent sign per entry.
    Independent,
}

impl TryFrom<u8> for SignPattern {
    type Error = String;
    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(SignPattern::Shared),
            2 => Ok(SignPattern::Independent),
            _ => Err(format!("sign_pattern must be 1 or 2, got {v}")),
        }
    }
}

impl From<SignPattern> for u8 {
    fn from(p: SignPattern) -> u8 {
        match p {
            SignPattern::Shared => 1,
            SignPattern::Independent => 2,
        }
    }
}

/// Arithmetic used by the recovery step of each trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Precision {
    Single,
    Double,
}

impl TryFrom<u8> for Precision {
    type Error = String;
    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            32 => Ok(Precision::Single),
            64 => Ok(Precision::Double),
            _ => Err(format!("precision must be 32 or 64, got {v}")),
        }
    }
}

impl From<Precision> for u8 {
    fn from(p: Precision) -> u8 {
        match p {
            Precision::Single => 32,
            Precision::Double => 64,
        }
    }
}

/// Where the campaign dictionary comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DictSource {
    Gaussian { m: usize, n: usize, seed: u64 },
    Rademacher { m: usize, n: usize, seed: u64 },
    File { path: PathBuf },
}

impl DictSource {
    pub fn load(&self) -> Result<Dictionary> {
        match self {
            DictSource::Gaussian { m, n, seed } => Dictionary::gaussian(*m, *n, *seed),
            DictSource::Rademacher { m, n, seed } => Dictionary::rademacher(*m, *n, *seed),
            DictSource::File { path } => Dictionary::load(path),
        }
    }
}

/// 21 angles from 5° to 85°.
pub fn default_theta_q_grid() -> Vec<f64> {
    uniform_grid(5.0, 85.0, 21)
}

/// 21 angles from 20° to 70°.
pub fn default_theta_sigma_grid() -> Vec<f64> {
    uniform_grid(20.0, 70.0, 21)
}

/// `count` evenly spaced points from `lo` to `hi` inclusive.
pub fn uniform_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![lo],
        _ => (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect(),
    }
}

fn default_precision() -> Precision {
    Precision::Single
}

/// One Monte Carlo campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dict_source: DictSource,
    pub sign_pattern: SignPattern,
    pub support_size: usize,
    pub mu_x: f64,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(default = "default_theta_q_grid")]
    pub theta_q_grid: Vec<f64>,
    #[serde(default = "default_theta_sigma_grid")]
    pub theta_sigma_grid: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    #[serde(default = "default_precision")]
    pub precision: Precision,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical TOML rendering.
    pub fn checksum(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.support_size == 0 {
            return bad("support_size must be at least 1".into());
        }
        if !(self.mu_x > 0.0 && self.mu_x.is_finite()) {
            return bad(format!("mu_x must be positive, got {}", self.mu_x));
        }
        if self.k == 0 {
            return bad("K must be at least 1".into());
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        for (name, grid) in [("theta_q_grid", &self.theta_q_grid), ("theta_sigma_grid", &self.theta_sigma_grid)] {
            if grid.is_empty() {
                return bad(format!("{name} is empty"));
            }
            if let Some(a) = grid.iter().find(|a| !(**a > 0.0 && **a < 90.0)) {
                return bad(format!("{name} angle {a} outside (0, 90)"));
            }
        }
        if let DictSource::Gaussian { m, n, .. } | DictSource::Rademacher { m, n, .. } = self.dict_source {
            check_support_fits(self.support_size, m, n)?;
        }
        Ok(())
    }

    pub fn with_mu_x(&self, mu_x: f64) -> Self {
        ExperimentConfig { mu_x, ..self.clone() }
    }
}

fn check_support_fits(support_size: usize, m: usize, n: usize) -> Result<()> {
    if support_size > m.min(n) {
        return Err(Error::Config(format!("support_size {support_size} exceeds min(m, n) = {}", m.min(n))));
    }
    Ok(())
}

/// Uniformly random support of `size` atoms out of `n`, sorted.
pub fn random_support(n: usize, size: usize, seed: u64) -> Result<Support> {
    if size > n {
        return Err(Error::InvalidInput(format!("support size {size} exceeds n={n}")));
    }
    let mut idx = sample(&mut from_seed(seed), n, size).into_vec();
    idx.sort_unstable();
    Support::new(idx, n)
}

fn sign_block(rows: usize, k: usize, mu_x: f64, pattern: SignPattern, seed: u64) -> DMatrix<f64> {
    let mut rng = from_seed(seed);
    let sign = |b: bool| if b { mu_x } else { -mu_x };
    match pattern {
        SignPattern::Shared => {
            let signs: Vec<f64> = (0..rows).map(|_| sign(rng.random())).collect();
            DMatrix::from_fn(rows, k, |i, _| signs[i])
        }
        SignPattern::Independent => {
            let mut x = DMatrix::zeros(rows, k);
            for v in x.iter_mut() {
                *v = sign(rng.random());
            }
            x
        }
    }
}

/// `n × K` signal with entries `±μ_X` on the support and zero elsewhere.
pub fn generate_sparse_signal(
    n: usize,
    support: &Support,
    mu_x: f64,
    pattern: SignPattern,
    k: usize,
    seed: u64,
) -> Result<DMatrix<f64>> {
    if support.as_slice().iter().any(|&j| j >= n) {
        return Err(Error::InvalidInput(format!("support {support} does not fit in {n} rows")));
    }
    let block = sign_block(support.len(), k, mu_x, pattern, seed);
    let mut x = DMatrix::zeros(n, k);
    for (r, &j) in support.as_slice().iter().enumerate() {
        x.set_row(j, &block.row(r));
    }
    Ok(x)
}

/// `m × K` noise, column `k` i.i.d. `N(0, σ_k²)`.
pub fn generate_noise(m: usize, noise: &NoiseSpec, seed: u64) -> DMatrix<f64> {
    let mut rng = from_seed(seed);
    let mut e = DMatrix::zeros(m, noise.len());
    for (mut col, s) in e.column_iter_mut().zip(noise.as_slice()) {
        for v in col.iter_mut() {
            *v = s * rng.sample::<f64, _>(StandardNormal);
        }
    }
    e
}

/// One simulated recovery.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    /// The selected set equals the true support after `|S|` iterations.
    pub success: bool,
    pub trial_index: u64,
    pub support: Support,
}

/// One draw of the signal model.
#[derive(Debug, Clone)]
pub struct Instance {
    pub support: Support,
    /// Nonzero rows of `X`, in support order.
    pub x_support: DMatrix<f64>,
    /// `Φ X`.
    pub clean: DMatrix<f64>,
    pub noise: DMatrix<f64>,
}

impl Instance {
    pub fn measurements(&self) -> DMatrix<f64> {
        &self.clean + &self.noise
    }

    /// The full `n × K` signal matrix.
    pub fn signal(&self, n: usize) -> DMatrix<f64> {
        let mut x = DMatrix::zeros(n, self.x_support.ncols());
        for (r, &j) in self.support.as_slice().iter().enumerate() {
            x.set_row(j, &self.x_support.row(r));
        }
        x
    }
}

/// Knobs that are not part of the campaign config.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    /// Multiplies every `σ`; zero removes the noise entirely.
    pub noise_scale: f64,
    /// Multiplies every weight vector.
    pub weight_scale: f64,
    /// Reuse the same support/signal/noise draws for every `θ_q` in a row.
    /// Each cell keeps the same marginal distribution; comparisons along a
    /// row become paired.
    pub shared_draws: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions { noise_scale: 1.0, weight_scale: 1.0, shared_draws: false }
    }
}

impl SweepOptions {
    fn check(&self) -> Result<()> {
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return Err(Error::InvalidInput(format!("noise scale {} must be ≥ 0", self.noise_scale)));
        }
        if !(self.weight_scale > 0.0 && self.weight_scale.is_finite()) {
            return Err(Error::InvalidInput(format!("weight scale {} must be > 0", self.weight_scale)));
        }
        Ok(())
    }
}

/// Wilson score interval at 95% for `hits` out of `trials`.
pub fn wilson_interval(hits: u64, trials: u64) -> (f64, f64) {
    assert!(trials > 0 && hits <= trials, "need 0 ≤ hits ≤ trials, trials > 0");
    let n = trials as f64;
    let p = hits as f64 / n;
    let z2 = Z_95 * Z_95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z_95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Results for one `(θ_q, θ_σ)` cell. The interval brackets the failure rate.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub theta_q_deg: f64,
    pub theta_sigma_deg: f64,
    pub trials: u64,
    pub successes: u64,
    pub failure_rate: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
}

impl CellResult {
    fn new(theta_q_deg: f64, theta_sigma_deg: f64, successes: u64, trials: u64) -> Self {
        let (wilson_lo, wilson_hi) = wilson_interval(trials - successes, trials);
        CellResult {
            theta_q_deg,
            theta_sigma_deg,
            trials,
            successes,
            failure_rate: 1.0 - successes as f64 / trials as f64,
            wilson_lo,
            wilson_hi,
        }
    }

    pub fn success_rate(&self) -> f64 {
        self.successes as f64 / self.trials as f64
    }

    pub fn wilson_halfwidth(&self) -> f64 {
        0.5 * (self.wilson_hi - self.wilson_lo)
    }
}

fn csv_comment(config: &ExperimentConfig, dict_checksum: &str) -> String {
    format!("# seed={} dict_sha={} config_sha={}\n", config.seed, dict_checksum, config.checksum())
}

/// Output of an angle sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSummary {
    pub config: ExperimentConfig,
    pub dict_checksum: String,
    /// `θ_σ` outer, `θ_q` inner, both in grid order.
    pub cells: Vec<CellResult>,
}

impl ExperimentSummary {
    pub fn cell(&self, theta_q_deg: f64, theta_sigma_deg: f64) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| (c.theta_q_deg - theta_q_deg).abs() < 1e-9 && (c.theta_sigma_deg - theta_sigma_deg).abs() < 1e-9)
    }

    /// All cells at one noise angle, in `θ_q` order.
    pub fn row(&self, theta_sigma_deg: f64) -> Vec<&CellResult> {
        self.cells.iter().filter(|c| (c.theta_sigma_deg - theta_sigma_deg).abs() < 1e-9).collect()
    }

    /// The `θ_q` with the lowest failure rate at `θ_σ`; ties keep the first.
    pub fn best_theta_q(&self, theta_sigma_deg: f64) -> Option<f64> {
        self.row(theta_sigma_deg)
            .into_iter()
            .fold(None::<&CellResult>, |best, c| match best {
                Some(b) if b.successes >= c.successes => Some(b),
                _ => Some(c),
            })
            .map(|c| c.theta_q_deg)
    }

    pub fn to_csv(&self) -> String {
        let mut out = csv_comment(&self.config, &self.dict_checksum);
        out.push_str("theta_q_deg,theta_sigma_deg,trials,successes,failure_rate,wilson_lo,wilson_hi\n");
        for c in &self.cells {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                c.theta_q_deg, c.theta_sigma_deg, c.trials, c.successes, c.failure_rate, c.wilson_lo, c.wilson_hi
            )
            .unwrap();
        }
        out
    }
}

/// One row of a K-sweep. The interval brackets the failure rate.
#[derive(Debug, Clone, PartialEq)]
pub struct KSweepRow {
    pub k: usize,
    pub trials: u64,
    pub failures: u64,
    pub failure_rate: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
}

impl KSweepRow {
    pub fn new(k: usize, failures: u64, trials: u64) -> Self {
        let (wilson_lo, wilson_hi) = wilson_interval(failures, trials);
        KSweepRow { k, trials, failures, failure_rate: failures as f64 / trials as f64, wilson_lo, wilson_hi }
    }

    pub fn wilson_halfwidth(&self) -> f64 {
        0.5 * (self.wilson_hi - self.wilson_lo)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KSweepResult {
    pub config: ExperimentConfig,
    pub dict_checksum: String,
    pub rows: Vec<KSweepRow>,
}

impl KSweepResult {
    pub fn to_csv(&self) -> String {
        let mut out = csv_comment(&self.config, &self.dict_checksum);
        out.push_str("K,trials,failures,failure_rate,wilson_lo,wilson_hi\n");
        for r in &self.rows {
            writeln!(out, "{},{},{},{},{},{}", r.k, r.trials, r.failures, r.failure_rate, r.wilson_lo, r.wilson_hi)
                .unwrap();
        }
        out
    }
}

/// Result of the bisection on `μ_X`.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub mu_x: f64,
    pub success_rate: f64,
    /// Every `(μ_X, success rate)` pair evaluated, in order.
    pub evaluations: Vec<(f64, f64)>,
}

/// A loaded dictionary plus the config that drives trials on it.
#[derive(Debug, Clone)]
pub struct Campaign {
    config: ExperimentConfig,
    dict: Dictionary,
    atoms32: DMatrix<f32>,
    checksum: String,
}

impl Campaign {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let dict = config.dict_source.load()?;
        Self::with_dictionary(config, dict)
    }

    pub fn with_dictionary(config: ExperimentConfig, dict: Dictionary) -> Result<Self> {
        config.validate()?;
        check_support_fits(config.support_size, dict.rows(), dict.len())?;
        let atoms32 = dict.atoms().clone().cast::<f32>();
        let checksum = dict.checksum();
        Ok(Campaign { config, dict, atoms32, checksum })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn dictionary(&self) -> &Dictionary {
        &self.dict
    }

    pub fn dict_checksum(&self) -> &str {
        &self.checksum
    }

    /// Same dictionary, different `μ_X`.
    pub fn with_mu_x(&self, mu_x: f64) -> Result<Self> {
        let config = self.config.with_mu_x(mu_x);
        config.validate()?;
        Ok(Campaign { config, ..self.clone() })
    }

    /// Draw support, signal and noise for one trial seed; `noise = None` means `E = 0`.
    pub fn draw_instance(&self, k: usize, noise: Option<&NoiseSpec>, seed: u64) -> Result<Instance> {
        let n = self.dict.len();
        let support = random_support(n, self.config.support_size, mix(seed, &[0]))?;
        let x_support = sign_block(support.len(), k, self.config.mu_x, self.config.sign_pattern, mix(seed, &[1]));
        let clean = select_columns(self.dict.atoms(), support.as_slice()) * &x_support;
        let noise = match noise {
            Some(spec) => {
                if spec.len() != k {
                    return Err(Error::DimensionMismatch(format!("{} noise deviations for K={k}", spec.len())));
                }
                generate_noise(self.dict.rows(), spec, mix(seed, &[2]))
            }
            None => DMatrix::zeros(self.dict.rows(), k),
        };
        Ok(Instance { support, x_support, clean, noise })
    }

    /// Run SOMP-NS for `|S|` iterations on one fresh instance.
    pub fn run_trial(
        &self,
        weights: &WeightVector,
        noise: Option<&NoiseSpec>,
        seed: u64,
        trial_index: u64,
    ) -> Result<TrialOutcome> {
        let inst = self.draw_instance(weights.len(), noise, seed)?;
        let y = inst.measurements();
        let s = self.config.support_size;
        let selected = match self.config.precision {
            Precision::Single => recover(&self.atoms32, &y.cast::<f32>(), weights, s)?,
            Precision::Double => recover(self.dict.atoms(), &y, weights, s)?,
        };
        let success = selected.is_some_and(|sel| inst.support.same_set(&sel));
        Ok(TrialOutcome { success, trial_index, support: inst.support })
    }

    fn count_successes(
        &self,
        weights: &WeightVector,
        noise: Option<&NoiseSpec>,
        trials: usize,
        seed_of: impl Fn(u64) -> u64 + Sync,
    ) -> Result<u64> {
        (0..trials as u64)
            .into_par_iter()
            .map(|t| self.run_trial(weights, noise, seed_of(t), t).map(|o| o.success as u64))
            .try_reduce(|| 0, |a, b| Ok(a + b))
    }

    fn scaled_noise(&self, base: NoiseSpec, scale: f64) -> Result<Option<NoiseSpec>> {
        if scale == 0.0 {
            Ok(None)
        } else {
            base.scaled(scale).map(Some)
        }
    }

    /// Success counts on the `(θ_q, θ_σ)` grid with `σ = (cos θ_σ, sin θ_σ)` and
    /// `q = (cos θ_q, sin θ_q)`.
    pub fn angle_sweep(&self, opts: &SweepOptions) -> Result<ExperimentSummary> {
        opts.check()?;
        let cfg = &self.config;
        if cfg.k != 2 {
            return Err(Error::Config(format!("angle sweeps need K = 2, got K = {}", cfg.k)));
        }
        let nq = cfg.theta_q_grid.len();
        let cells: Vec<(usize, usize)> =
            (0..cfg.theta_sigma_grid.len()).flat_map(|i| (0..nq).map(move |j| (i, j))).collect();
        let cells = cells
            .par_iter()
            .map(|&(is, iq)| {
                let (ts, tq) = (cfg.theta_sigma_grid[is], cfg.theta_q_grid[iq]);
                let noise = self.scaled_noise(NoiseSpec::from_angle_deg(ts)?, opts.noise_scale)?;
                let weights = WeightVector::from_angle_deg(tq)?.scaled(opts.weight_scale)?;
                let cell = (is * nq + iq) as u64;
                let hits = if opts.shared_draws {
                    self.count_successes(&weights, noise.as_ref(), cfg.trials, |t| {
                        mix(cfg.seed, &[SHARED_DRAWS_STREAM, is as u64, t])
                    })?
                } else {
                    self.count_successes(&weights, noise.as_ref(), cfg.trials, |t| mix(cfg.seed, &[cell, t]))?
                };
                Ok(CellResult::new(tq, ts, hits, cfg.trials as u64))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ExperimentSummary { config: cfg.clone(), dict_checksum: self.checksum.clone(), cells })
    }

    /// Failure counts for each `K` with equal weights and `σ = (√2/2)·(1, …, 1)`.
    pub fn k_sweep(&self, k_list: &[usize], opts: &SweepOptions) -> Result<KSweepResult> {
        opts.check()?;
        if k_list.is_empty() || k_list.contains(&0) {
            return Err(Error::InvalidInput(format!("K values must be ≥ 1, got {k_list:?}")));
        }
        let cfg = &self.config;
        let rows = k_list
            .iter()
            .map(|&k| {
                let noise = self.scaled_noise(NoiseSpec::uniform(k, std::f64::consts::FRAC_1_SQRT_2)?, opts.noise_scale)?;
                let weights = WeightVector::ones(k).scaled(opts.weight_scale)?;
                let hits = self.count_successes(&weights, noise.as_ref(), cfg.trials, |t| mix(cfg.seed, &[k as u64, t]))?;
                Ok(KSweepRow::new(k, cfg.trials as u64 - hits, cfg.trials as u64))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(KSweepResult { config: cfg.clone(), dict_checksum: self.checksum.clone(), rows })
    }

    /// Mean over `cases` draws of `20 log₁₀(‖Y‖_F / ‖E‖_F)` in dB.
    pub fn snr_in(&self, noise: &NoiseSpec, cases: usize) -> Result<f64> {
        if cases == 0 {
            return Err(Error::InvalidInput("need at least one case".into()));
        }
        let total: f64 = (0..cases as u64)
            .into_par_iter()
            .map(|c| {
                let inst = self.draw_instance(noise.len(), Some(noise), mix(self.config.seed, &[SNR_STREAM, c]))?;
                Ok(20.0 * (inst.measurements().norm() / inst.noise.norm()).log10())
            })
            .collect::<Result<Vec<f64>>>()?
            .iter()
            .sum();
        Ok(total / cases as f64)
    }

    /// Success rate at one `(θ_q, θ_σ)` cell using the calibration stream,
    /// so every `μ_X` sees the same supports, signs and noise.
    fn calibration_rate(&self, theta_q: f64, theta_sigma: f64, trials: usize) -> Result<f64> {
        let noise = NoiseSpec::from_angle_deg(theta_sigma)?;
        let weights = WeightVector::from_angle_deg(theta_q)?;
        let seed = self.config.seed;
        let hits = self.count_successes(&weights, Some(&noise), trials, |t| mix(seed, &[CALIBRATION_STREAM, t]))?;
        Ok(hits as f64 / trials as f64)
    }

    /// Bisect `log μ_X` so the `(θ_q, θ_σ)` cell succeeds at about `target`.
    /// Starts from the config's `μ_X` and brackets by doubling or halving.
    pub fn calibrate_mu_x(
        &self,
        target: f64,
        theta_q: f64,
        theta_sigma: f64,
        trials: usize,
        steps: usize,
    ) -> Result<Calibration> {
        if !(target > 0.0 && target < 1.0) || trials == 0 {
            return Err(Error::InvalidInput(format!("need target in (0, 1) and trials ≥ 1, got {target}, {trials}")));
        }
        if self.config.k != 2 {
            return Err(Error::Config(format!("calibration uses the K = 2 angle cell, got K = {}", self.config.k)));
        }
        let mut evaluations = Vec::new();
        let mut eval = |mu: f64| -> Result<f64> {
            let rate = self.with_mu_x(mu)?.calibration_rate(theta_q, theta_sigma, trials)?;
            evaluations.push((mu, rate));
            Ok(rate)
        };
        let start = self.config.mu_x;
        let r0 = eval(start)?;
        let (mut lo, mut hi) = (start, start);
        if r0 < target {
            for _ in 0..60 {
                hi *= 2.0;
                if eval(hi)? >= target {
                    break;
                }
                lo = hi;
            }
        } else {
            for _ in 0..60 {
                lo /= 2.0;
                if eval(lo)? < target {
                    break;
                }
                hi = lo;
            }
        }
        for _ in 0..steps {
            let mid = (lo * hi).sqrt();
            if eval(mid)? < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (mu_x, success_rate) = evaluations
            .iter()
            .copied()
            .min_by(|a, b| (a.1 - target).abs().total_cmp(&(b.1 - target).abs()))
            .expect("at least one evaluation");
        Ok(Calibration { mu_x, success_rate, evaluations })
    }
}

fn recover<T: Scalar>(atoms: &DMatrix<T>, y: &DMatrix<T>, weights: &WeightVector, s: usize) -> Result<Option<Vec<usize>>> {
    match somp_ns(atoms, y, weights, s) {
        Ok(trace) => Ok(Some(trace.selected)),
        Err(RecoveryError::RankDeficient { .. }) => Ok(None),
        Err(RecoveryError::Input(e)) => Err(e),
    }
}

pub fn run_angle_sweep(config: ExperimentConfig) -> Result<ExperimentSummary> {
    Campaign::new(config)?.angle_sweep(&SweepOptions::default())
}

pub fn run_k_sweep(config: ExperimentConfig, k_list: &[usize]) -> Result<KSweepResult> {
    Campaign::new(config)?.k_sweep(k_list, &SweepOptions::default())
}

/// Input SNR with `σ = (1/√K)·(1, …, 1)`, i.e. `(cos 45°, sin 45°)` for `K = 2`.
pub fn estimate_snr_in(config: ExperimentConfig, cases: usize) -> Result<f64> {
    let k = config.k;
    let noise = NoiseSpec::uniform(k, 1.0 / (k as f64).sqrt())?;
    Campaign::new(config)?.snr_in(&noise, cases)
}

/// Ordinary least squares `y ≈ intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::Fit(format!("need ≥ 2 paired points, got {} and {}", xs.len(), ys.len())));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("all x values coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(LinearFit { slope, intercept, r_squared })
}

/// Log-linear model `log P_fail ≈ intercept + slope·K` fitted to a K-sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ConjectureFit {
    pub fit: LinearFit,
    /// K values whose failure count met the threshold.
    pub ks_used: Vec<usize>,
    /// `n̄` from `exp(intercept) = n̄·α·s` with `α = 1`, `s = |S| − 1`, bias dropped.
    pub params: ConjecturedBoundParams,
}

impl ConjectureFit {
    /// Decay rate per additional measurement vector, `−slope`.
    pub fn rate(&self) -> f64 {
        -self.fit.slope
    }

    pub fn predicted_failure(&self, k: usize) -> f64 {
        (self.fit.intercept + self.fit.slope * k as f64).exp()
    }

    /// `ε′` such that equal weights, `σ = c·1` and `ε = ε′·K·μ_X` reproduce the slope.
    pub fn implied_epsilon_prime(&self, mu_x: f64, sigma_scale: f64) -> Option<f64> {
        (self.fit.slope < 0.0).then(|| (-2.0 * sigma_scale * sigma_scale * self.fit.slope).sqrt() / mu_x)
    }
}

/// Fit `log(failure_rate)` against `K` over rows with at least `min_failures`
/// failures. Rows below the threshold are excluded, not imputed.
pub fn fit_conjecture_params(rows: &[KSweepRow], support_size: usize, min_failures: u64) -> Result<ConjectureFit> {
    if support_size < 2 {
        return Err(Error::Fit(format!("need |S| ≥ 2 for s = |S| − 1 ≥ 1, got {support_size}")));
    }
    let used: Vec<&KSweepRow> = rows.iter().filter(|r| r.failures >= min_failures.max(1)).collect();
    if used.len() < 3 {
        return Err(Error::Fit(format!(
            "only {} K values have ≥ {} failures; need 3",
            used.len(),
            min_failures.max(1)
        )));
    }
    let xs: Vec<f64> = used.iter().map(|r| r.k as f64).collect();
    let ys: Vec<f64> = used.iter().map(|r| r.failure_rate.ln()).collect();
    let fit = linear_fit(&xs, &ys)?;
    let s = (support_size - 1) as f64;
    let params = ConjecturedBoundParams::new(fit.intercept.exp() / s, 1.0, true)?;
    Ok(ConjectureFit { fit, ks_used: used.iter().map(|r| r.k).collect(), params })
}
