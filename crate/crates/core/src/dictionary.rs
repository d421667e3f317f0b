//! Dictionaries of unit-norm atoms and the conditioning metrics computed on them:
//! mutual coherence, the Babel (cumulative coherence) function, the exact
//! recovery constant `‖Φ_S⁺ Φ_S̄‖₁`, restricted isometry constants and the
//! coherence-based bounds on them.

use std::collections::BTreeMap;
use std::path::Path;

use itertools::Itertools;
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{lstsq_full_rank, max_col_abs_sum, max_row_abs_sum, select_columns, symmetric_eigen_extremes};
use crate::matrix_io;
use crate::recovery::WeightVector;
use crate::rng;
use crate::support::Support;

/// Allowed deviation of a column norm from 1.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-6;

/// Default cap on the number of supports `exact_ric` may enumerate.
pub const DEFAULT_RIC_BUDGET: u128 = 200_000;

/// An `m × n` real matrix whose columns (atoms) have unit ℓ₂ norm.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    atoms: DMatrix<f64>,
}

impl Dictionary {
    /// Wrap a matrix whose columns are already unit norm.
    pub fn from_matrix(atoms: DMatrix<f64>) -> Result<Self> {
        check_shape(&atoms)?;
        for (j, col) in atoms.column_iter().enumerate() {
            let norm = col.norm();
            if (norm - 1.0).abs() > UNIT_NORM_TOLERANCE {
                return Err(Error::InvalidInput(format!("atom {} has norm {norm}, expected 1", j + 1)));
            }
        }
        Ok(Dictionary { atoms })
    }

    /// Rescale every column to unit norm. Zero columns are rejected.
    pub fn normalized(mut atoms: DMatrix<f64>) -> Result<Self> {
        check_shape(&atoms)?;
        for (j, mut col) in atoms.column_iter_mut().enumerate() {
            let norm = col.norm();
            if norm == 0.0 {
                return Err(Error::InvalidInput(format!("atom {} is identically zero", j + 1)));
            }
            col /= norm;
        }
        Ok(Dictionary { atoms })
    }

    /// I.i.d. standard normal entries, each column rescaled to unit norm.
    pub fn gaussian(m: usize, n: usize, seed: u64) -> Result<Self> {
        check_dims(m, n)?;
        let mut rng = rng::from_seed(seed);
        let mut atoms = DMatrix::zeros(m, n);
        for mut col in atoms.column_iter_mut() {
            loop {
                for v in col.iter_mut() {
                    *v = rng.sample(StandardNormal);
                }
                let norm = col.norm();
                if norm > 0.0 {
                    col /= norm;
                    break;
                }
            }
        }
        Ok(Dictionary { atoms })
    }

    /// Independent ±1/√m entries with equal probability.
    pub fn rademacher(m: usize, n: usize, seed: u64) -> Result<Self> {
        check_dims(m, n)?;
        let mut rng = rng::from_seed(seed);
        let scale = 1.0 / (m as f64).sqrt();
        let atoms = DMatrix::from_fn(m, n, |_, _| if rng.random::<bool>() { scale } else { -scale });
        Ok(Dictionary { atoms })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Dictionary::from_matrix(matrix_io::read(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        matrix_io::write(path, &self.atoms)
    }

    pub fn atoms(&self) -> &DMatrix<f64> {
        &self.atoms
    }

    /// Number of rows `m`.
    pub fn rows(&self) -> usize {
        self.atoms.nrows()
    }

    /// Number of atoms `n`.
    pub fn len(&self) -> usize {
        self.atoms.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.ncols() == 0
    }

    /// SHA-256 over the little-endian bytes of the entries in column-major order.
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.rows() as u64).to_le_bytes());
        h.update((self.len() as u64).to_le_bytes());
        for v in self.atoms.iter() {
            h.update(v.to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    fn gram_abs(&self) -> DMatrix<f64> {
        self.atoms.tr_mul(&self.atoms).map(f64::abs)
    }

    /// Mutual coherence `max_{i≠j} |⟨φ_i, φ_j⟩|`.
    pub fn coherence(&self) -> Result<f64> {
        self.babel(1)
    }

    /// Babel function `μ₁(p)`: the worst total coherence between one atom and
    /// `p` others.
    pub fn babel(&self, p: usize) -> Result<f64> {
        Ok(*self.babel_profile(p)?.last().expect("p >= 1"))
    }

    /// `[μ₁(1), μ₁(2), ..., μ₁(max_p)]` from a single pass over the Gram matrix.
    pub fn babel_profile(&self, max_p: usize) -> Result<Vec<f64>> {
        let n = self.len();
        if n < 2 {
            return Err(Error::InvalidInput("coherence needs at least two atoms".into()));
        }
        if max_p == 0 || max_p > n - 1 {
            return Err(Error::InvalidInput(format!("babel order {max_p} outside 1..={}", n - 1)));
        }
        let gram = self.gram_abs();
        let mut best = vec![0.0f64; max_p];
        let mut column = Vec::with_capacity(n - 1);
        for j in 0..n {
            column.clear();
            column.extend((0..n).filter(|&i| i != j).map(|i| gram[(i, j)]));
            column.sort_unstable_by(|a, b| b.total_cmp(a));
            let mut acc = 0.0;
            for (p, v) in column.iter().take(max_p).enumerate() {
                acc += v;
                if acc > best[p] {
                    best[p] = acc;
                }
            }
        }
        Ok(best)
    }

    /// Exact recovery constant `‖Φ_S⁺ Φ_S̄‖₁` (largest absolute column sum).
    pub fn erc_constant(&self, support: &Support) -> Result<f64> {
        let coeffs = self.support_pinv_product(support)?;
        Ok(max_col_abs_sum(&coeffs))
    }

    /// `Φ_S⁺ Φ_S̄` as an `|S| × (n−|S|)` matrix, columns in ascending atom order.
    pub fn support_pinv_product(&self, support: &Support) -> Result<DMatrix<f64>> {
        self.check_support(support)?;
        if support.is_empty() {
            return Err(Error::InvalidInput("support is empty".into()));
        }
        let inside = select_columns(&self.atoms, support.as_slice());
        let outside = select_columns(&self.atoms, &support.complement(self.len()));
        lstsq_full_rank(&inside, &outside, &support.to_one_based())
    }

    /// Restricted isometry constant `δ_s` by exhaustive enumeration of all
    /// `s`-column submatrices; only feasible for tiny dictionaries.
    pub fn exact_ric(&self, s: usize, budget: u128) -> Result<f64> {
        let n = self.len();
        if s == 0 || s > self.rows().min(n) {
            return Err(Error::InvalidInput(format!("RIC order {s} outside 1..={}", self.rows().min(n))));
        }
        let count = binomial_u128(n, s);
        if count.is_none_or(|c| c > budget) {
            return Err(Error::BudgetExceeded { supports: count.unwrap_or(u128::MAX), budget });
        }
        let gram = self.atoms.tr_mul(&self.atoms);
        let mut upper = f64::NEG_INFINITY;
        let mut lower = f64::INFINITY;
        for cols in (0..n).combinations(s) {
            let sub = DMatrix::from_fn(s, s, |a, b| gram[(cols[a], cols[b])]);
            let (lo, hi) = symmetric_eigen_extremes(sub);
            lower = lower.min(lo);
            upper = upper.max(hi);
        }
        Ok((upper - 1.0).max(1.0 - lower).max(0.0))
    }

    /// Coherence upper bound on `δ_s`: `μ₁(s−1)` or `(s−1)μ`.
    pub fn ric_coherence_bound(&self, s: usize, use_babel: bool) -> Result<RicBound> {
        if s == 0 {
            return Err(Error::InvalidInput("RIC order must be positive".into()));
        }
        let value = if s == 1 {
            0.0
        } else if use_babel {
            self.babel(s - 1)?
        } else {
            (s - 1) as f64 * self.coherence()?
        };
        Ok(RicBound { value, vacuous: value >= 1.0 })
    }

    /// Largest `s` with `(s−1)μ < 1`, capped at `m + 1`. Every set of `s`
    /// atoms is then linearly independent, so `spark(Φ) ≥ s`.
    pub fn spark_lower_bound(&self) -> Result<usize> {
        let mu = self.coherence()?;
        Ok(spark_bound_from_coherence(mu, self.rows()))
    }

    /// Greedy selection ratio `‖Φ_S̄ᵀ R Q‖_∞ / ‖Φ_Sᵀ R Q‖_∞`.
    pub fn greedy_selection_ratio(
        &self,
        support: &Support,
        residual: &DMatrix<f64>,
        weights: &WeightVector,
    ) -> Result<SelectionRatio> {
        self.check_support(support)?;
        if support.is_empty() || support.len() == self.len() {
            return Err(Error::InvalidInput("support must be a nonempty proper subset".into()));
        }
        if residual.nrows() != self.rows() || residual.ncols() != weights.len() {
            return Err(Error::DimensionMismatch(format!(
                "residual is {}×{}, expected {}×{}",
                residual.nrows(),
                residual.ncols(),
                self.rows(),
                weights.len()
            )));
        }
        let mut corr = self.atoms.tr_mul(residual);
        for (k, mut col) in corr.column_iter_mut().enumerate() {
            col *= weights.as_slice()[k];
        }
        let inside = max_row_abs_sum(&select_rows(&corr, support.as_slice()));
        let outside = max_row_abs_sum(&select_rows(&corr, &support.complement(self.len())));
        if inside == 0.0 {
            return Ok(SelectionRatio { value: f64::INFINITY, degenerate: true });
        }
        Ok(SelectionRatio { value: outside / inside, degenerate: false })
    }

    /// All metrics in one report. `max_p` bounds the Babel profile; when a
    /// support is given the exact recovery constant and the `δ_|S|` coherence
    /// bound are included.
    pub fn metrics(&self, max_p: usize, support: Option<&Support>) -> Result<DictMetricsReport> {
        let max_p = max_p.clamp(1, self.len().saturating_sub(1).max(1));
        let profile = self.babel_profile(max_p)?;
        let coherence = profile[0];
        let babel: BTreeMap<usize, f64> = profile.iter().enumerate().map(|(i, v)| (i + 1, *v)).collect();
        let (erc_norm, ric_coherence_bound) = match support {
            Some(s) => (Some(self.erc_constant(s)?), Some(self.ric_coherence_bound(s.len(), false)?)),
            None => (None, None),
        };
        Ok(DictMetricsReport {
            coherence,
            babel,
            erc_norm,
            ric_coherence_bound,
            spark_lower_bound: spark_bound_from_coherence(coherence, self.rows()),
        })
    }

    fn check_support(&self, support: &Support) -> Result<()> {
        match support.as_slice().iter().find(|&&j| j >= self.len()) {
            Some(j) => Err(Error::InvalidInput(format!("atom index {} outside 1..={}", j + 1, self.len()))),
            None => Ok(()),
        }
    }
}

fn check_dims(m: usize, n: usize) -> Result<()> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidInput(format!("dictionary dimensions must be positive, got {m}×{n}")));
    }
    Ok(())
}

fn check_shape(a: &DMatrix<f64>) -> Result<()> {
    check_dims(a.nrows(), a.ncols())?;
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("dictionary has non-finite entries".into()));
    }
    Ok(())
}

fn select_rows(a: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), a.ncols(), |i, j| a[(rows[i], j)])
}

fn spark_bound_from_coherence(mu: f64, m: usize) -> usize {
    if mu <= 0.0 {
        return m + 1;
    }
    let mut s = 1;
    while s < m + 1 && (s as f64) * mu < 1.0 {
        s += 1;
    }
    s
}

/// `C(n, k)` or `None` on overflow.
pub fn binomial_u128(n: usize, k: usize) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// A coherence-derived bound; `vacuous` when the value is not below 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RicBound {
    pub value: f64,
    pub vacuous: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionRatio {
    /// `+∞` when `degenerate`.
    pub value: f64,
    /// The in-support correlation was exactly zero.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DictMetricsReport {
    pub coherence: f64,
    /// `p → μ₁(p)`.
    pub babel: BTreeMap<usize, f64>,
    pub erc_norm: Option<f64>,
    pub ric_coherence_bound: Option<RicBound>,
    pub spark_lower_bound: usize,
}
