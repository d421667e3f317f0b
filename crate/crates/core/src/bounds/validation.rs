//! Monte Carlo checks of the concentration inequalities behind the bounds.
//!
//! Each draw uses its own seed `mix(seed, [draw])`, so results are identical
//! for any thread count.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::{bias_b, kappa, NoiseSpec};
use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::recovery::WeightVector;
use crate::rng::{from_seed, mix, Rng};

/// Number of standard errors of slack granted to an empirical frequency.
pub const SIGMA_SLACK: f64 = 3.0;

/// One empirical tail frequency compared against its analytic bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailCheck {
    pub epsilon: f64,
    /// `b + ε`, the level the statistic is compared against.
    pub threshold: f64,
    pub empirical: f64,
    pub bound: f64,
    /// Binomial standard error at the bound, `√(p(1−p)/N)` with `p = min(bound, 1)`.
    pub std_error: f64,
    pub passed: bool,
}

fn gaussian_vector(rng: &mut Rng, m: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(m, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        scale * z
    })
}

/// Weighted sums `Σ_k q_k |⟨φ_j, e_k⟩|` for every atom, maximized over atoms.
fn max_weighted_statistic(atoms: &DMatrix<f64>, weights: &[f64], sigma: &[f64], rng: &mut Rng) -> f64 {
    let mut sums = DVector::<f64>::zeros(atoms.ncols());
    for (q, s) in weights.iter().zip(sigma) {
        let e = gaussian_vector(rng, atoms.nrows(), *s);
        let c = atoms.tr_mul(&e);
        sums.iter_mut().zip(c.iter()).for_each(|(acc, v)| *acc += q * v.abs());
    }
    sums.max()
}

fn tail_checks(
    stats: &[f64],
    weights: &WeightVector,
    noise: &NoiseSpec,
    eps_multipliers: &[f64],
    prefactor: f64,
) -> Result<Vec<TailCheck>> {
    let kappa = kappa(weights, noise)?;
    let b = bias_b(weights, noise)?;
    let norm = (1.0 / (2.0 * kappa)).sqrt();
    let n = stats.len() as f64;
    Ok(eps_multipliers
        .iter()
        .map(|&mult| {
            let epsilon = mult * norm;
            let threshold = b + epsilon;
            let empirical = stats.iter().filter(|&&v| v >= threshold).count() as f64 / n;
            let bound = prefactor * (-kappa * epsilon * epsilon).exp();
            let p = bound.min(1.0);
            let std_error = (p * (1.0 - p) / n).sqrt();
            TailCheck { epsilon, threshold, empirical, bound, std_error, passed: empirical <= bound + SIGMA_SLACK * std_error }
        })
        .collect())
}

fn check_draws(draws: usize) -> Result<()> {
    if draws < 2 {
        return Err(Error::InvalidInput(format!("need at least two draws, got {draws}")));
    }
    Ok(())
}

/// Tail of `Σ_k q_k |⟨φ, e_k⟩|` for one fixed unit atom against
/// `exp(−κ ε²)`, at `ε = c·‖q⁽σ⁾‖₂` for each multiplier `c`.
pub fn single_atom_tail(
    weights: &WeightVector,
    noise: &NoiseSpec,
    m: usize,
    eps_multipliers: &[f64],
    draws: usize,
    seed: u64,
) -> Result<Vec<TailCheck>> {
    check_draws(draws)?;
    let atom = Dictionary::gaussian(m, 1, mix(seed, &[u64::MAX]))?;
    let stats: Vec<f64> = (0..draws as u64)
        .into_par_iter()
        .map(|d| max_weighted_statistic(atom.atoms(), weights.as_slice(), noise.as_slice(), &mut from_seed(mix(seed, &[d]))))
        .collect();
    tail_checks(&stats, weights, noise, eps_multipliers, 1.0)
}

/// Tail of `max_j Σ_k q_k |⟨φ_j, e_k⟩|` over a whole dictionary against the
/// union bound `n·exp(−κ ε²)`.
pub fn union_tail(
    dict: &Dictionary,
    weights: &WeightVector,
    noise: &NoiseSpec,
    eps_multipliers: &[f64],
    draws: usize,
    seed: u64,
) -> Result<Vec<TailCheck>> {
    check_draws(draws)?;
    let stats: Vec<f64> = (0..draws as u64)
        .into_par_iter()
        .map(|d| max_weighted_statistic(dict.atoms(), weights.as_slice(), noise.as_slice(), &mut from_seed(mix(seed, &[d]))))
        .collect();
    tail_checks(&stats, weights, noise, eps_multipliers, dict.len() as f64)
}

/// Sample variance of `⟨φ_j, (I − P)e⟩` for `e ~ N(0, σ²I)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceCheck {
    pub atom: usize,
    pub variance: f64,
    /// `σ²‖(I − P)φ_j‖²`, the exact variance.
    pub predicted: f64,
    /// `σ²(1 + 5√(2/(N−1)))`.
    pub limit: f64,
    pub passed: bool,
}

/// Projecting out a random `rank`-dimensional subspace never raises the
/// per-atom noise variance above `σ²`.
pub fn projected_noise_variance(
    m: usize,
    n_atoms: usize,
    rank: usize,
    sigma: f64,
    draws: usize,
    seed: u64,
) -> Result<Vec<VarianceCheck>> {
    check_draws(draws)?;
    if rank >= m {
        return Err(Error::InvalidInput(format!("projection rank {rank} must be below m={m}")));
    }
    let dict = Dictionary::gaussian(m, n_atoms, mix(seed, &[u64::MAX]))?;
    let span = Dictionary::gaussian(m, rank.max(1), mix(seed, &[u64::MAX - 1]))?;
    let projected_atoms = if rank == 0 {
        dict.atoms().clone()
    } else {
        let q = span.atoms().clone().qr().q();
        dict.atoms() - &q * q.tr_mul(dict.atoms())
    };
    let sums: Vec<(DVector<f64>, DVector<f64>)> = (0..draws as u64)
        .into_par_iter()
        .map(|d| {
            let e = gaussian_vector(&mut from_seed(mix(seed, &[d])), m, sigma);
            let v = projected_atoms.tr_mul(&e);
            let sq = v.map(|x| x * x);
            (v, sq)
        })
        .collect();
    let nf = draws as f64;
    let limit = sigma * sigma * (1.0 + 5.0 * (2.0 / (nf - 1.0)).sqrt());
    Ok((0..n_atoms)
        .map(|j| {
            let mean = sums.iter().map(|(v, _)| v[j]).sum::<f64>() / nf;
            let sq = sums.iter().map(|(_, s)| s[j]).sum::<f64>();
            let variance = (sq - nf * mean * mean) / (nf - 1.0);
            let predicted = sigma * sigma * projected_atoms.column(j).norm_squared();
            VarianceCheck { atom: j, variance, predicted, limit, passed: variance <= limit }
        })
        .collect())
}

/// Empirical CDFs of `X + |Y₁|` and `X + |Y₂|` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DominanceCheck {
    pub t: f64,
    pub cdf_small: f64,
    pub cdf_large: f64,
    pub slack: f64,
    pub passed: bool,
}

/// With `X = Σ_k |X_k|`, `X_k ~ N(0, σ_{x,k}²)`, and `Y_i ~ N(0, σ_i²)` for
/// `σ₁ ≤ σ₂`, check `P(X + |Y₂| ≤ t) ≤ P(X + |Y₁| ≤ t)` on a grid of `t`.
/// The two sides are sampled from independent streams.
pub fn half_normal_dominance(
    sigma_x: &[f64],
    sigma_small: f64,
    sigma_large: f64,
    grid: &[f64],
    draws: usize,
    seed: u64,
) -> Result<Vec<DominanceCheck>> {
    check_draws(draws)?;
    if !(sigma_small > 0.0 && sigma_small <= sigma_large) {
        return Err(Error::InvalidInput(format!("need 0 < σ₁ ≤ σ₂, got {sigma_small}, {sigma_large}")));
    }
    let sample = |stream: u64, sy: f64| -> Vec<f64> {
        (0..draws as u64)
            .into_par_iter()
            .map(|d| {
                let mut rng = from_seed(mix(seed, &[stream, d]));
                let x: f64 = sigma_x.iter().map(|s| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    (s * z).abs()
                }).sum();
                let y: f64 = StandardNormal.sample(&mut rng);
                x + (sy * y).abs()
            })
            .collect()
    };
    let small = sample(0, sigma_small);
    let large = sample(1, sigma_large);
    let nf = draws as f64;
    let cdf = |v: &[f64], t: f64| v.iter().filter(|&&x| x <= t).count() as f64 / nf;
    Ok(grid
        .iter()
        .map(|&t| {
            let (cdf_small, cdf_large) = (cdf(&small, t), cdf(&large, t));
            let var = cdf_small * (1.0 - cdf_small) / nf + cdf_large * (1.0 - cdf_large) / nf;
            let slack = SIGMA_SLACK * var.sqrt();
            DominanceCheck { t, cdf_small, cdf_large, slack, passed: cdf_large <= cdf_small + slack }
        })
        .collect())
}
