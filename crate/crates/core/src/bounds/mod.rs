//! Probability bounds for SOMP-NS under independent Gaussian noise.
//!
//! With `q⁽σ⁾_k = q_k σ_k`, the weighted sum `Σ_k q_k |⟨φ, e_k⟩|` of a unit
//! atom against the noise has mean `b = √(2/π)‖q⁽σ⁾‖₁` and Gaussian tails with
//! rate `κ = 1 / (2‖q⁽σ⁾‖₂²)`. Combined with the exact recovery constant and a
//! lower bound on the signal correlation this yields
//!
//! ```text
//! P(correct decisions in iterations 0..=s) ≥ 1 − n·C_s·exp(−κ (ε − b)²)
//! ```
//!
//! where `C_s = Σ_{i≤s} C(|S|, i)`.

pub mod validation;

use nalgebra::DMatrix;
use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::linalg::{max_row_abs_sum, select_columns};
use crate::recovery::{orthonormalize, WeightVector};
use crate::support::Support;

/// Per-measurement-vector noise standard deviations, all positive.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    sigma: Vec<f64>,
}

impl NoiseSpec {
    pub fn new(sigma: Vec<f64>) -> Result<Self> {
        if sigma.is_empty() {
            return Err(Error::InvalidInput("noise vector is empty".into()));
        }
        if sigma.iter().any(|s| !s.is_finite() || *s <= 0.0) {
            return Err(Error::InvalidInput(format!("noise deviations must be positive, got {sigma:?}")));
        }
        Ok(NoiseSpec { sigma })
    }

    /// `σ = (cos θ, sin θ)`, angle in degrees strictly inside `(0°, 90°)`.
    pub fn from_angle_deg(theta_deg: f64) -> Result<Self> {
        if !(theta_deg > 0.0 && theta_deg < 90.0) {
            return Err(Error::InvalidInput(format!("noise angle {theta_deg}° outside (0°, 90°)")));
        }
        let t = theta_deg.to_radians();
        NoiseSpec::new(vec![t.cos(), t.sin()])
    }

    /// `c·(1, ..., 1)` with `K` entries.
    pub fn uniform(k: usize, c: f64) -> Result<Self> {
        NoiseSpec::new(vec![c; k])
    }

    pub fn theta_deg(&self) -> Option<f64> {
        match self.sigma.as_slice() {
            [s1, s2] => Some(s2.atan2(*s1).to_degrees()),
            _ => None,
        }
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        NoiseSpec::new(self.sigma.iter().map(|s| s * c).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.sigma
    }

    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }
}

fn weighted_sigma(weights: &WeightVector, noise: &NoiseSpec) -> Result<Vec<f64>> {
    if weights.len() != noise.len() {
        return Err(Error::DimensionMismatch(format!("{} weights but {} noise deviations", weights.len(), noise.len())));
    }
    Ok(weights.as_slice().iter().zip(noise.as_slice()).map(|(q, s)| q * s).collect())
}

/// Concentration rate `κ(q, σ) = 1 / (2‖q⁽σ⁾‖₂²)`.
pub fn kappa(weights: &WeightVector, noise: &NoiseSpec) -> Result<f64> {
    let qs = weighted_sigma(weights, noise)?;
    let sq: f64 = qs.iter().map(|v| v * v).sum();
    if sq == 0.0 {
        return Err(Error::InvalidInput("κ undefined: every q_k σ_k is zero".into()));
    }
    Ok(1.0 / (2.0 * sq))
}

/// Bias `b(q, σ) = √(2/π)‖q⁽σ⁾‖₁`, the mean of the weighted half-normal sum.
pub fn bias_b(weights: &WeightVector, noise: &NoiseSpec) -> Result<f64> {
    let qs = weighted_sigma(weights, noise)?;
    Ok((2.0 / std::f64::consts::PI).sqrt() * qs.iter().sum::<f64>())
}

/// A bound value that may be vacuous (its hypotheses fail).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounded {
    pub value: f64,
    pub vacuous: bool,
}

/// `min_{j∈S} Σ_k |X_{j,k}| q_k`.
pub fn min_weighted_row_sum(x: &DMatrix<f64>, support: &Support, weights: &WeightVector) -> Result<f64> {
    check_signal(x, support, weights)?;
    Ok(support
        .as_slice()
        .iter()
        .map(|&j| weights.as_slice().iter().enumerate().map(|(k, q)| x[(j, k)].abs() * q).sum::<f64>())
        .fold(f64::INFINITY, f64::min))
}

fn check_signal(x: &DMatrix<f64>, support: &Support, weights: &WeightVector) -> Result<()> {
    if x.ncols() != weights.len() {
        return Err(Error::DimensionMismatch(format!("X has {} columns but {} weights", x.ncols(), weights.len())));
    }
    if support.is_empty() {
        return Err(Error::InvalidInput("support is empty".into()));
    }
    if let Some(j) = support.as_slice().iter().find(|&&j| j >= x.nrows()) {
        return Err(Error::InvalidInput(format!("support index {} beyond the {} rows of X", j + 1, x.nrows())));
    }
    for j in support.complement(x.nrows()) {
        if x.row(j).iter().any(|v| *v != 0.0) {
            return Err(Error::InvalidInput(format!("X row {} is nonzero but outside the support", j + 1)));
        }
    }
    Ok(())
}

/// How much the dictionary shrinks the in-support correlation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SignalConditioning {
    /// Restricted isometry constant `δ`.
    Ric { delta: f64 },
    /// `(|S| − t − 1)·μ` at iteration `t`.
    Coherence { mu: f64, t: usize },
    /// `μ₁(|S| − t − 1)` supplied directly.
    Babel { mu1: f64 },
}

impl SignalConditioning {
    pub fn constant(&self, support_size: usize) -> f64 {
        match *self {
            SignalConditioning::Ric { delta } => delta,
            SignalConditioning::Coherence { mu, t } => support_size.saturating_sub(t + 1) as f64 * mu,
            SignalConditioning::Babel { mu1 } => mu1,
        }
    }
}

/// Lower bound `(1 − c)·min_{j∈S} Σ_k |X_{j,k}| q_k` on the in-support
/// correlation; vacuous when the conditioning constant `c` is not below 1.
pub fn signal_metric_lower_bound(
    x: &DMatrix<f64>,
    support: &Support,
    weights: &WeightVector,
    conditioning: SignalConditioning,
) -> Result<Bounded> {
    let c = conditioning.constant(support.len());
    if !(c >= 0.0) {
        return Err(Error::InvalidInput(format!("conditioning constant {c} must be nonnegative")));
    }
    let min_sum = min_weighted_row_sum(x, support, weights)?;
    Ok(Bounded { value: (1.0 - c) * min_sum, vacuous: c >= 1.0 })
}

/// Dictionary-side inputs of the correct-decision threshold `ε(q)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Conditioning {
    /// Exact recovery constant `‖Φ_S⁺Φ_S̄‖₁` and `δ_|S|` (or upper bounds on them).
    Ric { erc_norm: f64, delta: f64 },
    /// Coherence only.
    Coherence { mu: f64 },
}

/// The dictionary factor multiplying the min-sum in `ε(q)`:
/// `0.5(1 − ERC)(1 − δ)` or `0.5(1 − μ(2|S| − 1))`.
pub fn epsilon_prime(conditioning: Conditioning, support_size: usize) -> Bounded {
    match conditioning {
        Conditioning::Ric { erc_norm, delta } => Bounded {
            value: 0.5 * (1.0 - erc_norm) * (1.0 - delta),
            vacuous: erc_norm >= 1.0 || delta >= 1.0,
        },
        Conditioning::Coherence { mu } => {
            let c = mu * (2 * support_size) as f64 - mu;
            Bounded { value: 0.5 * (1.0 - c), vacuous: c >= 1.0 }
        }
    }
}

/// Correct-decision threshold `ε(q)` (RIC form) or `ε⁽μ⁾(q)` (coherence form).
pub fn epsilon_threshold(
    conditioning: Conditioning,
    x: &DMatrix<f64>,
    support: &Support,
    weights: &WeightVector,
) -> Result<Bounded> {
    let factor = epsilon_prime(conditioning, support.len());
    let min_sum = min_weighted_row_sum(x, support, weights)?;
    let value = factor.value * min_sum;
    Ok(Bounded { value, vacuous: factor.vacuous || value <= 0.0 })
}

/// `C_s = Σ_{i=0}^{s} C(|S|, i)`, exactly.
pub fn combinatorial_c(support_size: usize, s: usize) -> Result<BigUint> {
    if support_size == 0 || s >= support_size {
        return Err(Error::InvalidInput(format!("need 0 ≤ s ≤ |S|−1, got s={s}, |S|={support_size}")));
    }
    let mut term = BigUint::one();
    let mut total = BigUint::one();
    for i in 0..s {
        term = term * BigUint::from(support_size - i) / BigUint::from(i + 1);
        total += &term;
    }
    Ok(total)
}

/// Natural log of a positive big integer without overflowing `f64`.
pub fn ln_biguint(v: &BigUint) -> f64 {
    assert!(!v.is_zero(), "log of zero");
    let bits = v.bits();
    if bits <= 1000 {
        return v.to_f64().expect("fits in f64").ln();
    }
    let shift = bits - 64;
    let top: BigUint = v >> shift;
    top.to_f64().expect("64-bit mantissa").ln() + shift as f64 * std::f64::consts::LN_2
}

/// Everything that enters the main recovery-probability bound.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub kappa: f64,
    pub b: f64,
    pub epsilon: f64,
    /// `ε − b`.
    pub epsilon_bar: f64,
    pub c_s: BigUint,
    /// `1 − n·C_s·exp(−κ ε̄²)`; `None` when the bound does not apply.
    pub prob_lower_bound: Option<f64>,
    /// `ε̄ > 0`.
    pub valid: bool,
}

impl BoundReport {
    /// The bound clipped to `[0, 1]`.
    pub fn clamped(&self) -> Option<f64> {
        self.prob_lower_bound.map(|p| p.clamp(0.0, 1.0))
    }

    /// Upper bound on the failure probability, `n·C_s·exp(−κ ε̄²)`.
    pub fn failure_bound(&self) -> Option<f64> {
        self.prob_lower_bound.map(|p| 1.0 - p)
    }
}

/// `1 − exp(ln_prefactor − exponent)`, evaluated in log space.
fn one_minus_exp(ln_prefactor: f64, exponent: f64) -> f64 {
    1.0 - (ln_prefactor - exponent).exp()
}

/// Lower bound on the probability that SOMP-NS makes correct decisions in
/// iterations `0..=s`, given the threshold `ε(q)`.
pub fn theorem5_bound(
    epsilon: f64,
    weights: &WeightVector,
    noise: &NoiseSpec,
    n: usize,
    support_size: usize,
    s: usize,
) -> Result<BoundReport> {
    if n == 0 {
        return Err(Error::InvalidInput("atom count must be positive".into()));
    }
    let kappa = kappa(weights, noise)?;
    let b = bias_b(weights, noise)?;
    let c_s = combinatorial_c(support_size, s)?;
    let epsilon_bar = epsilon - b;
    let valid = epsilon_bar > 0.0;
    let prob_lower_bound = valid.then(|| {
        one_minus_exp((n as f64).ln() + ln_biguint(&c_s), kappa * epsilon_bar * epsilon_bar)
    });
    Ok(BoundReport { kappa, b, epsilon, epsilon_bar, c_s, prob_lower_bound, valid })
}

/// Free parameters of the conjectured bound `1 − n̄·α·s·exp(−κ ε̄²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConjecturedBoundParams {
    /// Effective number of competing atoms.
    pub n_bar: f64,
    /// Per-iteration growth replacing `C_s`.
    pub alpha: f64,
    /// Use `ε` instead of `ε − b` in the exponent.
    pub drop_bias: bool,
}

impl ConjecturedBoundParams {
    pub fn new(n_bar: f64, alpha: f64, drop_bias: bool) -> Result<Self> {
        if !(n_bar > 0.0 && n_bar.is_finite()) || !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidInput(format!("need n̄ > 0 and α > 0, got n̄={n_bar}, α={alpha}")));
        }
        Ok(ConjecturedBoundParams { n_bar, alpha, drop_bias })
    }
}

/// Conjectured bound `1 − n̄·α·s·exp(−κ ε̄²)`, with `ε̄ = ε` when the bias is dropped.
pub fn conjectured_bound(
    params: &ConjecturedBoundParams,
    epsilon: f64,
    weights: &WeightVector,
    noise: &NoiseSpec,
    s: usize,
) -> Result<f64> {
    let kappa = kappa(weights, noise)?;
    let eps = if params.drop_bias { epsilon } else { epsilon - bias_b(weights, noise)? };
    let prefactor = params.n_bar * params.alpha * s as f64;
    Ok(1.0 - prefactor * (-kappa * eps * eps).exp())
}

/// Full-recovery bound for the equal-magnitude sign-pattern signals:
/// `1 − n·C_{|S|−1}·exp(−K⟨q⟩²μ_X²ε′² / (2⟨q²σ²⟩))`.
pub fn b2_bound(
    mu_x: f64,
    weights: &WeightVector,
    noise: &NoiseSpec,
    n: usize,
    support_size: usize,
    epsilon_prime: f64,
) -> Result<f64> {
    if !(mu_x > 0.0) {
        return Err(Error::InvalidInput(format!("μ_X must be positive, got {mu_x}")));
    }
    let exponent = b2_exponent(mu_x, weights, noise, epsilon_prime)?;
    let c = combinatorial_c(support_size, support_size - 1)?;
    Ok(one_minus_exp((n as f64).ln() + ln_biguint(&c), exponent))
}

/// The exponent `K⟨q⟩²μ_X²ε′² / (2⟨q²σ²⟩)` of the B2 bound.
pub fn b2_exponent(mu_x: f64, weights: &WeightVector, noise: &NoiseSpec, epsilon_prime: f64) -> Result<f64> {
    let qs = weighted_sigma(weights, noise)?;
    let k = weights.len() as f64;
    let mean_q = weights.as_slice().iter().sum::<f64>() / k;
    let mean_q2s2 = qs.iter().map(|v| v * v).sum::<f64>() / k;
    if mean_q2s2 == 0.0 {
        return Err(Error::InvalidInput("every q_k σ_k is zero".into()));
    }
    Ok(k * mean_q * mean_q * mu_x * mu_x * epsilon_prime * epsilon_prime / (2.0 * mean_q2s2))
}

/// `⟨q⟩² / ⟨q²σ²⟩`, the weight-dependent part of the B2 exponent.
pub fn weight_efficiency(weights: &WeightVector, noise: &NoiseSpec) -> Result<f64> {
    let qs = weighted_sigma(weights, noise)?;
    let k = weights.len() as f64;
    let mean_q = weights.as_slice().iter().sum::<f64>() / k;
    let mean_q2s2 = qs.iter().map(|v| v * v).sum::<f64>() / k;
    Ok(mean_q * mean_q / mean_q2s2)
}

/// Weights `q_k = 1/σ_k²`, which maximize the B2 exponent.
pub fn optimal_weights(noise: &NoiseSpec) -> WeightVector {
    WeightVector::new(noise.as_slice().iter().map(|s| 1.0 / (s * s)).collect())
        .expect("positive deviations give positive weights")
}

/// Outcome of the noisy exact-recovery condition at one iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoisyErcCheck {
    /// `(1 − ‖Φ_S⁺Φ_S̄‖₁)·‖Φ_Sᵀ Z⁽ᵗ⁾ Q‖_∞`.
    pub signal_margin: f64,
    /// `2‖Φᵀ E⁽ᵗ⁾ Q‖_∞`.
    pub noise_level: f64,
    pub holds: bool,
}

/// Evaluate the sufficient condition for a correct decision at the iteration
/// where `t_support ⊆ support` has already been selected.
pub fn noisy_erc_check(
    dict: &Dictionary,
    support: &Support,
    x: &DMatrix<f64>,
    e: &DMatrix<f64>,
    weights: &WeightVector,
    t_support: &Support,
) -> Result<NoisyErcCheck> {
    let atoms = dict.atoms();
    if x.nrows() != dict.len() || e.nrows() != dict.rows() || x.ncols() != e.ncols() || x.ncols() != weights.len() {
        return Err(Error::DimensionMismatch(format!(
            "X {}×{}, E {}×{}, {} weights for a {}×{} dictionary",
            x.nrows(),
            x.ncols(),
            e.nrows(),
            e.ncols(),
            weights.len(),
            dict.rows(),
            dict.len()
        )));
    }
    if !t_support.is_subset_of(support) {
        return Err(Error::InvalidInput(format!("{t_support} is not a subset of {support}")));
    }
    let erc = dict.erc_constant(support)?;
    let basis = orthonormalize(atoms, t_support)?;
    let mut z = basis.project_out(&(atoms * x));
    let mut et = basis.project_out(e);
    for (k, &q) in weights.as_slice().iter().enumerate() {
        z.column_mut(k).scale_mut(q);
        et.column_mut(k).scale_mut(q);
    }
    let in_support = select_columns(atoms, support.as_slice()).tr_mul(&z);
    let signal_margin = (1.0 - erc) * max_row_abs_sum(&in_support);
    let noise_level = 2.0 * max_row_abs_sum(&atoms.tr_mul(&et));
    Ok(NoisyErcCheck { signal_margin, noise_level, holds: signal_margin > noise_level })
}
