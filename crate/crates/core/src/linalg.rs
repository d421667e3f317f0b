//! Small dense linear-algebra helpers shared by the metric and recovery code.

use nalgebra::{DMatrix, DVector, RealField};

use crate::error::{Error, Result};

/// Floating point type the recovery code can run in.
pub trait Scalar: RealField + Copy + Send + Sync + std::fmt::Display {
    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
    /// Relative threshold below which a triangular pivot counts as zero.
    fn rank_tolerance() -> Self;
}

impl Scalar for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn rank_tolerance() -> Self {
        RANK_TOLERANCE
    }
}

impl Scalar for f32 {
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
    fn rank_tolerance() -> Self {
        // 1e-8 is below single-precision rounding; use a few hundred ulps instead.
        (f32::EPSILON * 100.0).max(RANK_TOLERANCE as f32)
    }
}

/// Pivot magnitudes at or below this fraction of the largest pivot are treated as zero.
pub const RANK_TOLERANCE: f64 = 1e-8;

/// Largest absolute row sum, i.e. the operator norm induced by the sup-norm.
pub fn max_row_abs_sum<T: Scalar>(a: &DMatrix<T>) -> T {
    a.row_iter()
        .map(|row| row.iter().fold(T::zero(), |acc, v| acc + v.abs()))
        .fold(T::zero(), |acc, v| if v > acc { v } else { acc })
}

/// Largest absolute column sum, i.e. the operator norm induced by the 1-norm.
pub fn max_col_abs_sum<T: Scalar>(a: &DMatrix<T>) -> T {
    a.column_iter()
        .map(|col| col.iter().fold(T::zero(), |acc, v| acc + v.abs()))
        .fold(T::zero(), |acc, v| if v > acc { v } else { acc })
}

/// Copy the listed columns of `a` into a new matrix, in order.
pub fn select_columns<T: Scalar>(a: &DMatrix<T>, cols: &[usize]) -> DMatrix<T> {
    DMatrix::from_fn(a.nrows(), cols.len(), |i, j| a[(i, cols[j])])
}

/// `(smallest, largest)` eigenvalue of a symmetric matrix.
pub fn symmetric_eigen_extremes(a: DMatrix<f64>) -> (f64, f64) {
    let eig = a.symmetric_eigen();
    let lo = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// Least-squares solution `A⁺B` for a full-column-rank `A`, via Householder QR.
///
/// `labels` names the columns of `A` in rank-deficiency errors.
pub fn lstsq_full_rank(a: &DMatrix<f64>, b: &DMatrix<f64>, labels: &[usize]) -> Result<DMatrix<f64>> {
    if a.nrows() != b.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "least squares with {} and {} rows",
            a.nrows(),
            b.nrows()
        )));
    }
    if a.ncols() > a.nrows() {
        return Err(Error::RankDeficient { support: labels.to_vec() });
    }
    let qr = a.clone().qr();
    let r = qr.r();
    if !pivots_full_rank(r.diagonal().iter().copied(), RANK_TOLERANCE) {
        return Err(Error::RankDeficient { support: labels.to_vec() });
    }
    let qtb = qr.q().tr_mul(b);
    r.solve_upper_triangular(&qtb)
        .ok_or_else(|| Error::RankDeficient { support: labels.to_vec() })
}

fn pivots_full_rank<T: Scalar>(diag: impl Iterator<Item = T> + Clone, tol: T) -> bool {
    let largest = diag.clone().fold(T::zero(), |acc, d| acc.max(d.abs()));
    if largest == T::zero() {
        return false;
    }
    diag.into_iter().all(|d| d.abs() > tol * largest)
}

/// Orthonormal basis of a growing set of columns, kept as a thin QR factorization.
///
/// Columns are appended one at a time with two passes of modified Gram-Schmidt,
/// which keeps the basis orthogonal to working precision.
#[derive(Debug, Clone)]
pub struct OrthoBasis<T: Scalar> {
    q: DMatrix<T>,
    r: DMatrix<T>,
    len: usize,
    largest_pivot: T,
}

impl<T: Scalar> OrthoBasis<T> {
    pub fn new(rows: usize, capacity: usize) -> Self {
        OrthoBasis {
            q: DMatrix::zeros(rows, capacity),
            r: DMatrix::zeros(capacity, capacity),
            len: 0,
            largest_pivot: T::zero(),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Append a column. Returns the new unit basis vector, or `None` when the
    /// column lies (numerically) in the span of the existing ones. On `None`
    /// the basis is left unchanged.
    pub fn push(&mut self, v: &DVector<T>) -> Option<DVector<T>> {
        assert!(self.len < self.q.ncols(), "OrthoBasis capacity exhausted");
        let mut w = v.clone();
        let mut coeffs = vec![T::zero(); self.len];
        for _ in 0..2 {
            for (i, c) in coeffs.iter_mut().enumerate() {
                let qi = self.q.column(i);
                let proj = qi.dot(&w);
                w.axpy(-proj, &qi, T::one());
                *c += proj;
            }
        }
        let pivot = w.norm();
        let largest = self.largest_pivot.max(pivot);
        if pivot <= T::rank_tolerance() * largest || pivot == T::zero() {
            return None;
        }
        w /= pivot;
        let t = self.len;
        self.q.set_column(t, &w);
        for (i, c) in coeffs.into_iter().enumerate() {
            self.r[(i, t)] = c;
        }
        self.r[(t, t)] = pivot;
        self.largest_pivot = largest;
        self.len += 1;
        Some(w)
    }

    /// `(I − QQᵀ) Y`.
    pub fn project_out(&self, y: &DMatrix<T>) -> DMatrix<T> {
        let mut res = y.clone();
        for i in 0..self.len {
            remove_direction(&mut res, &self.q.column(i).into_owned());
        }
        res
    }

    /// `R⁻¹ Qᵀ Y`, the least-squares coefficients of `Y` on the appended columns.
    pub fn coefficients(&self, y: &DMatrix<T>) -> DMatrix<T> {
        let q = self.q.columns(0, self.len);
        let qty = q.tr_mul(y);
        let r = self.r.view((0, 0), (self.len, self.len)).into_owned();
        r.solve_upper_triangular(&qty)
            .expect("triangular factor has nonzero pivots by construction")
    }
}

/// In-place `Y ← Y − q (qᵀ Y)` for a unit vector `q`.
pub fn remove_direction<T: Scalar>(y: &mut DMatrix<T>, q: &DVector<T>) {
    for mut col in y.column_iter_mut() {
        let proj = q.dot(&col);
        col.axpy(-proj, q, T::one());
    }
}
