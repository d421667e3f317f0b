//! Greedy joint-support recovery: OMP, SOMP and the weighted SOMP-NS.
//!
//! SOMP-NS picks, at every iteration, the atom maximizing
//! `Σ_k q_k |⟨r_k, φ_j⟩|` over the current residual columns `r_k`, then
//! re-projects the measurements onto the orthogonal complement of the selected
//! atoms. Plain SOMP is the special case `q = 1`, and OMP is SOMP with a single
//! measurement vector.
//!
//! All routines are generic over [`Scalar`] so campaigns can run in single
//! precision while tests run in double precision.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::error::Error;
use crate::linalg::{remove_direction, OrthoBasis, Scalar};
use crate::support::Support;

/// Nonnegative per-measurement-vector weights `q`, not all zero.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    q: Vec<f64>,
}

impl WeightVector {
    pub fn new(q: Vec<f64>) -> Result<Self, Error> {
        if q.is_empty() {
            return Err(Error::InvalidInput("weight vector is empty".into()));
        }
        if q.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidInput(format!("weights must be finite and nonnegative, got {q:?}")));
        }
        if q.iter().all(|v| *v == 0.0) {
            return Err(Error::InvalidInput("at least one weight must be positive".into()));
        }
        Ok(WeightVector { q })
    }

    /// All-ones weights, i.e. plain SOMP.
    pub fn ones(k: usize) -> Self {
        WeightVector { q: vec![1.0; k.max(1)] }
    }

    /// `(cos θ, sin θ)` for an angle in degrees within `[0°, 90°]`.
    pub fn from_angle_deg(theta_deg: f64) -> Result<Self, Error> {
        if !(0.0..=90.0).contains(&theta_deg) {
            return Err(Error::InvalidInput(format!("weight angle {theta_deg}° outside [0°, 90°]")));
        }
        let t = theta_deg.to_radians();
        // cos(90°) is not exactly zero in floating point; clamp tiny negatives.
        WeightVector::new(vec![t.cos().max(0.0), t.sin().max(0.0)])
    }

    /// `θ_q = atan2(q₂, q₁)` in degrees; only defined for two weights.
    pub fn theta_deg(&self) -> Option<f64> {
        match self.q.as_slice() {
            [q1, q2] => Some(q2.atan2(*q1).to_degrees()),
            _ => None,
        }
    }

    pub fn scaled(&self, c: f64) -> Result<Self, Error> {
        WeightVector::new(self.q.iter().map(|v| v * c).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.q
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    fn cast<T: Scalar>(&self) -> Vec<T> {
        self.q.iter().map(|&v| <T as crate::linalg::Scalar>::from_f64(v)).collect()
    }
}

/// Everything a recovery run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryTrace<T: Scalar> {
    /// Selected atoms (0-based) in selection order.
    pub selected: Vec<usize>,
    /// Winning selection metric at each iteration.
    pub metric_values: Vec<T>,
    /// `‖R⁽ᵗ⁾‖_F` for `t = 0..=s`; entry 0 is `‖Y‖_F`.
    pub residual_norms: Vec<T>,
    /// Least-squares coefficients `Φ_S⁺ Y`, one row per selected atom.
    pub coefficients: DMatrix<T>,
    /// Final residual `R⁽ˢ⁾`.
    pub residual: DMatrix<T>,
}

impl<T: Scalar> RecoveryTrace<T> {
    pub fn support(&self, n: usize) -> Support {
        Support::new(self.selected.clone(), n).expect("selection never repeats an atom")
    }
}

#[derive(Debug, Error)]
pub enum RecoveryError<T: Scalar> {
    #[error(transparent)]
    Input(#[from] Error),
    /// Atom `atom` (0-based) is numerically dependent on those already selected.
    #[error("atom {} is linearly dependent on the {} atoms already selected", atom + 1, partial.selected.len())]
    RankDeficient { atom: usize, partial: Box<RecoveryTrace<T>> },
}

impl<T: Scalar> From<RecoveryError<T>> for Error {
    fn from(e: RecoveryError<T>) -> Self {
        match e {
            RecoveryError::Input(e) => e,
            RecoveryError::RankDeficient { atom, partial } => {
                let mut support: Vec<usize> = partial.selected.iter().map(|j| j + 1).collect();
                support.push(atom + 1);
                Error::RankDeficient { support }
            }
        }
    }
}

/// SOMP-NS, first form: weights applied inside the selection metric.
pub fn somp_ns<T: Scalar>(
    atoms: &DMatrix<T>,
    y: &DMatrix<T>,
    weights: &WeightVector,
    iterations: usize,
) -> Result<RecoveryTrace<T>, RecoveryError<T>> {
    check_inputs(atoms, y, weights, iterations)?;
    let q = weights.cast::<T>();
    let (m, n) = atoms.shape();
    let mut basis = OrthoBasis::new(m, iterations);
    let mut residual = y.clone();
    let mut taken = vec![false; n];
    let mut selected = Vec::with_capacity(iterations);
    let mut metric_values = Vec::with_capacity(iterations);
    let mut residual_norms = Vec::with_capacity(iterations + 1);
    residual_norms.push(residual.norm());

    for _ in 0..iterations {
        let (j, value) = weighted_argmax(atoms, &residual, &q, &taken);
        let direction = match basis.push(&atoms.column(j).into_owned()) {
            Some(d) => d,
            None => {
                let partial = RecoveryTrace {
                    coefficients: basis.coefficients(y),
                    selected,
                    metric_values,
                    residual_norms,
                    residual,
                };
                return Err(RecoveryError::RankDeficient { atom: j, partial: Box::new(partial) });
            }
        };
        remove_direction(&mut residual, &direction);
        taken[j] = true;
        selected.push(j);
        metric_values.push(value);
        residual_norms.push(residual.norm());
    }

    Ok(RecoveryTrace { coefficients: basis.coefficients(y), selected, metric_values, residual_norms, residual })
}

/// Plain SOMP: every measurement vector weighted equally.
pub fn somp<T: Scalar>(
    atoms: &DMatrix<T>,
    y: &DMatrix<T>,
    iterations: usize,
) -> Result<RecoveryTrace<T>, RecoveryError<T>> {
    somp_ns(atoms, y, &WeightVector::ones(y.ncols()), iterations)
}

/// SOMP-NS, second form: scale the columns of `Y` by `q`, then run SOMP.
///
/// Selects the same atoms as [`somp_ns`]; the residual and coefficients refer
/// to the scaled measurements `Y·diag(q)`.
pub fn somp_ns_prescaled<T: Scalar>(
    atoms: &DMatrix<T>,
    y: &DMatrix<T>,
    weights: &WeightVector,
    iterations: usize,
) -> Result<RecoveryTrace<T>, RecoveryError<T>> {
    check_inputs(atoms, y, weights, iterations)?;
    let mut scaled = y.clone();
    for (mut col, &qk) in scaled.column_iter_mut().zip(weights.cast::<T>().iter()) {
        col *= qk;
    }
    somp(atoms, &scaled, iterations)
}

/// Classical OMP on a single measurement vector.
pub fn omp<T: Scalar>(
    atoms: &DMatrix<T>,
    y: &DVector<T>,
    iterations: usize,
) -> Result<RecoveryTrace<T>, RecoveryError<T>> {
    let y = DMatrix::from_column_slice(y.len(), 1, y.as_slice());
    somp(atoms, &y, iterations)
}

/// One selection step: `argmax_j Σ_k q_k |⟨r_k, φ_j⟩|` and its value.
/// Ties go to the smallest index.
pub fn select_atom<T: Scalar>(
    atoms: &DMatrix<T>,
    residual: &DMatrix<T>,
    weights: &WeightVector,
) -> Result<(usize, T), Error> {
    if residual.nrows() != atoms.nrows() || residual.ncols() != weights.len() {
        return Err(Error::DimensionMismatch(format!(
            "residual is {}×{}, expected {}×{}",
            residual.nrows(),
            residual.ncols(),
            atoms.nrows(),
            weights.len()
        )));
    }
    Ok(weighted_argmax(atoms, residual, &weights.cast::<T>(), &vec![false; atoms.ncols()]))
}

/// `Y − Φ_S Φ_S⁺ Y`, computed through an orthonormal basis of `span(Φ_S)`.
pub fn project_residual<T: Scalar>(atoms: &DMatrix<T>, support: &Support, y: &DMatrix<T>) -> Result<DMatrix<T>, Error> {
    if y.nrows() != atoms.nrows() {
        return Err(Error::DimensionMismatch(format!("Y has {} rows, atoms have {}", y.nrows(), atoms.nrows())));
    }
    let basis = orthonormalize(atoms, support)?;
    Ok(basis.project_out(y))
}

pub(crate) fn orthonormalize<T: Scalar>(atoms: &DMatrix<T>, support: &Support) -> Result<OrthoBasis<T>, Error> {
    if let Some(j) = support.as_slice().iter().find(|&&j| j >= atoms.ncols()) {
        return Err(Error::InvalidInput(format!("atom index {} outside 1..={}", j + 1, atoms.ncols())));
    }
    let mut basis = OrthoBasis::new(atoms.nrows(), support.len());
    for &j in support.as_slice() {
        if support.len() > atoms.nrows() || basis.push(&atoms.column(j).into_owned()).is_none() {
            return Err(Error::RankDeficient { support: support.to_one_based() });
        }
    }
    Ok(basis)
}

/// Per-atom weighted correlation sums `Σ_k q_k |⟨r_k, φ_j⟩|`.
pub fn weighted_correlations<T: Scalar>(atoms: &DMatrix<T>, residual: &DMatrix<T>, q: &[T]) -> Vec<T> {
    let corr = atoms.tr_mul(residual);
    (0..corr.nrows())
        .map(|j| q.iter().enumerate().fold(T::zero(), |acc, (k, &qk)| acc + corr[(j, k)].abs() * qk))
        .collect()
}

fn weighted_argmax<T: Scalar>(atoms: &DMatrix<T>, residual: &DMatrix<T>, q: &[T], taken: &[bool]) -> (usize, T) {
    let metric = weighted_correlations(atoms, residual, q);
    let mut best: Option<(usize, T)> = None;
    for (j, &v) in metric.iter().enumerate() {
        if taken[j] {
            continue;
        }
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((j, v)),
        }
    }
    best.expect("at least one atom remains unselected")
}

fn check_inputs<T: Scalar>(atoms: &DMatrix<T>, y: &DMatrix<T>, weights: &WeightVector, iterations: usize) -> Result<(), Error> {
    let (m, n) = atoms.shape();
    if y.nrows() != m {
        return Err(Error::DimensionMismatch(format!("Y has {} rows, atoms have {m}", y.nrows())));
    }
    if y.ncols() != weights.len() {
        return Err(Error::DimensionMismatch(format!("Y has {} columns but {} weights", y.ncols(), weights.len())));
    }
    if iterations == 0 || iterations > m.min(n) {
        return Err(Error::InvalidInput(format!("iteration count {iterations} outside 1..={}", m.min(n))));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("Y has non-finite entries".into()));
    }
    Ok(())
}
