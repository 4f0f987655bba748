//! Dense linear-algebra substrate: partitioned Householder QR of `[A, b]`,
//! SVD, spectral norm, and the vec / Kronecker / vec-permutation utilities.
//!
//! All matrices are `nalgebra::DMatrix<f64>`, stored column-major, so
//! `as_slice()` is exactly `vec(M)`.

use nalgebra::{DMatrix, DVector};

use crate::{Config, MtlsError, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Householder QR of `[A, b]` split at column `n1`:
///
/// ```text
/// Qᵀ [A1, A2, b] = [ R11  R12  R1b ]   n1 rows
///                  [  0   R22  R2b ]   m - n1 rows
/// ```
///
/// Only the leading `min(m, n + 1)` rows of the triangular factor are
/// stored; the remaining rows of `R22`/`R2b` are identically zero.
#[derive(Debug, Clone)]
pub struct PartitionedFactorization {
    m: usize,
    n1: usize,
    n2: usize,
    r: Matrix,
    q: Option<Matrix>,
    reflectors: Vec<(usize, Vector)>,
    signs: Vec<f64>,
    r22_singular_values: Vector,
}

impl PartitionedFactorization {
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn n1(&self) -> usize {
        self.n1
    }
    pub fn n2(&self) -> usize {
        self.n2
    }
    pub fn n(&self) -> usize {
        self.n1 + self.n2
    }

    /// The stored upper-trapezoidal factor, `min(m, n+1) x (n+1)`.
    pub fn r_tilde(&self) -> &Matrix {
        &self.r
    }

    pub fn r11(&self) -> Matrix {
        self.r.view((0, 0), (self.n1, self.n1)).into_owned()
    }
    pub fn r12(&self) -> Matrix {
        self.r.view((0, self.n1), (self.n1, self.n2)).into_owned()
    }
    pub fn r1b(&self) -> Vector {
        self.r.view((0, self.n()), (self.n1, 1)).column(0).into_owned()
    }

    /// Nonzero rows of `R22` (rows `n1..min(m, n+1)` of the triangular factor).
    pub fn r22(&self) -> Matrix {
        let rows = self.r.nrows() - self.n1;
        self.r.view((self.n1, self.n1), (rows, self.n2)).into_owned()
    }
    pub fn r2b(&self) -> Vector {
        let rows = self.r.nrows() - self.n1;
        self.r.view((self.n1, self.n()), (rows, 1)).column(0).into_owned()
    }

    /// `[R22, R2b]` restricted to its nonzero rows.
    pub fn r2_block(&self) -> Matrix {
        let rows = self.r.nrows() - self.n1;
        self.r.view((self.n1, self.n1), (rows, self.n2 + 1)).into_owned()
    }

    /// Singular values of `R22`, descending (computed during the rank check).
    pub fn r22_singular_values(&self) -> &Vector {
        &self.r22_singular_values
    }

    /// The full `m x m` orthogonal factor, if it was materialized.
    pub fn q(&self) -> Option<&Matrix> {
        self.q.as_ref()
    }

    /// The full `m x (n+1)` block `R̃` with its zero rows restored.
    pub fn r_tilde_full(&self) -> Matrix {
        let mut full = Matrix::zeros(self.m, self.n() + 1);
        full.view_mut((0, 0), self.r.shape()).copy_from(&self.r);
        full
    }

    /// Applies `Qᵀ` to an `m`-vector using the stored reflectors.
    pub fn apply_qt(&self, v: &Vector) -> Vector {
        let mut out = v.clone();
        for (k, h) in &self.reflectors {
            let mut tail = out.rows_mut(*k, h.len());
            let s = 2.0 * h.dot(&tail);
            tail.axpy(-s, h, 1.0);
        }
        for (i, s) in self.signs.iter().enumerate() {
            out[i] *= s;
        }
        out
    }
}

/// Partitioned QR factorization of `[A, b]` with the diagonal of the
/// triangular factor normalized to be nonnegative.
pub fn qr_partition(a: &Matrix, b: &Vector, n1: usize, cfg: &Config) -> Result<PartitionedFactorization> {
    let (m, n) = a.shape();
    if n == 0 || m < n {
        return Err(MtlsError::dim(format!("need m >= n >= 1, got {m}x{n}")));
    }
    if b.len() != m {
        return Err(MtlsError::dim(format!("rhs has {} entries, expected {m}", b.len())));
    }
    if n1 > n {
        return Err(MtlsError::dim(format!("n1 = {n1} exceeds n = {n}")));
    }
    if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(MtlsError::dim("non-finite entry in [A, b]"));
    }

    let mut work = Matrix::zeros(m, n + 1);
    work.view_mut((0, 0), (m, n)).copy_from(a);
    work.set_column(n, b);

    let steps = (n + 1).min(m);
    let mut reflectors = Vec::with_capacity(steps);
    for k in 0..steps {
        if k + 1 >= m {
            break;
        }
        let x = work.view((k, k), (m - k, 1)).column(0).into_owned();
        let norm = x.norm();
        if norm == 0.0 {
            continue;
        }
        let alpha = if x[0] >= 0.0 { -norm } else { norm };
        let mut v = x;
        v[0] -= alpha;
        let vnorm = v.norm();
        if vnorm == 0.0 {
            continue;
        }
        v /= vnorm;
        for j in k..=n {
            let mut col = work.view_mut((k, j), (m - k, 1));
            let s = 2.0 * v.dot(&col.column(0));
            col.column_mut(0).axpy(-s, &v, 1.0);
        }
        // exact zeros below the diagonal
        for i in (k + 1)..m {
            work[(i, k)] = 0.0;
        }
        reflectors.push((k, v));
    }

    let rows = steps;
    let mut signs = vec![1.0; rows];
    for (i, s) in signs.iter_mut().enumerate() {
        if work[(i, i)] < 0.0 {
            *s = -1.0;
            work.row_mut(i).neg_mut();
        }
    }

    let q = if m <= cfg.q_cap {
        let mut q = Matrix::identity(m, m);
        for (k, v) in reflectors.iter().rev() {
            let v = v.clone();
            for j in 0..m {
                let mut col = q.view_mut((*k, j), (m - k, 1));
                let s = 2.0 * v.dot(&col.column(0));
                col.column_mut(0).axpy(-s, &v, 1.0);
            }
        }
        for (i, s) in signs.iter().enumerate() {
            if *s < 0.0 {
                q.column_mut(i).neg_mut();
            }
        }
        Some(q)
    } else {
        None
    };

    let r = work.rows(0, rows).into_owned();
    let n2 = n - n1;

    let sigma_max = singular_values(&r, cfg)?.get(0).copied().unwrap_or(0.0);
    let tol = m.max(n) as f64 * f64::EPSILON * sigma_max;
    for i in 0..n1 {
        let pivot = r[(i, i)].abs();
        if pivot <= tol {
            return Err(MtlsError::RankDeficient { pivot, tol });
        }
    }
    let r22 = r.view((n1, n1), (rows - n1, n2)).into_owned();
    let r22_singular_values = if n2 > 0 { singular_values(&r22, cfg)? } else { Vector::zeros(0) };
    if n2 > 0 {
        let smin = r22_singular_values[n2 - 1];
        if smin <= tol {
            return Err(MtlsError::RankDeficient { pivot: smin, tol });
        }
    }

    Ok(PartitionedFactorization { m, n1, n2, r, q, reflectors, signs, r22_singular_values })
}

/// Thin SVD `M = U diag(s) Vᵀ` with singular values in descending order.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Matrix,
    pub singular_values: Vector,
    /// Right singular vectors as columns (not transposed).
    pub v: Matrix,
}

pub fn svd(m: &Matrix, cfg: &Config) -> Result<Svd> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(MtlsError::dim("non-finite entry passed to svd"));
    }
    let dec = nalgebra::SVD::try_new(m.clone(), true, true, cfg.svd_eps, cfg.svd_max_iter)
        .ok_or(MtlsError::NoConvergence { max_iter: cfg.svd_max_iter })?;
    let u = dec.u.expect("requested U");
    let v = dec.v_t.expect("requested Vᵀ").transpose();
    Ok(Svd { u, singular_values: dec.singular_values, v })
}

/// Singular values (descending) and right singular vectors as columns, without `U`.
pub fn right_svd(m: &Matrix, cfg: &Config) -> Result<(Vector, Matrix)> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(MtlsError::dim("non-finite entry passed to svd"));
    }
    let dec = nalgebra::SVD::try_new(m.clone(), false, true, cfg.svd_eps, cfg.svd_max_iter)
        .ok_or(MtlsError::NoConvergence { max_iter: cfg.svd_max_iter })?;
    Ok((dec.singular_values, dec.v_t.expect("requested Vᵀ").transpose()))
}

/// Singular values only, descending.
pub fn singular_values(m: &Matrix, cfg: &Config) -> Result<Vector> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(Vector::zeros(0));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(MtlsError::dim("non-finite entry passed to svd"));
    }
    let dec = nalgebra::SVD::try_new(m.clone(), false, false, cfg.svd_eps, cfg.svd_max_iter)
        .ok_or(MtlsError::NoConvergence { max_iter: cfg.svd_max_iter })?;
    Ok(dec.singular_values)
}

/// `‖M‖₂ = σ₁(M)`.
pub fn spectral_norm(m: &Matrix, cfg: &Config) -> Result<f64> {
    Ok(singular_values(m, cfg)?.get(0).copied().unwrap_or(0.0))
}

/// Column-stacking `vec(M)`.
pub fn vec(m: &Matrix) -> Vector {
    Vector::from_column_slice(m.as_slice())
}

/// Inverse of [`vec`]: reshapes a length `rows*cols` vector column by column.
pub fn unvec(v: &Vector, rows: usize, cols: usize) -> Matrix {
    Matrix::from_column_slice(rows, cols, v.as_slice())
}

/// `vec([A, b])`: `A` column-stacked, followed by `b`.
pub fn vec_augmented(a: &Matrix, b: &Vector) -> Vector {
    let mut out = Vector::zeros(a.len() + b.len());
    out.rows_mut(0, a.len()).copy_from_slice(a.as_slice());
    out.rows_mut(a.len(), b.len()).copy_from(b);
    out
}

/// Dense Kronecker product `A ⊗ B`, refused above the configured dense cap.
pub fn kron(a: &Matrix, b: &Matrix, cfg: &Config) -> Result<Matrix> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    cfg.check_dense(ar * br, ac * bc)?;
    let mut out = Matrix::zeros(ar * br, ac * bc);
    for j in 0..ac {
        for i in 0..ar {
            let aij = a[(i, j)];
            if aij != 0.0 {
                out.view_mut((i * br, j * bc), (br, bc)).copy_from(&(b * aij));
            }
        }
    }
    Ok(out)
}

/// The vec-permutation `Π_{m,n}` with `Π vec(C) = vec(Cᵀ)` for every `m x n` matrix `C`.
///
/// Kept implicit; [`VecPermutation::to_dense`] materializes it for checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VecPermutation {
    pub m: usize,
    pub n: usize,
}

impl VecPermutation {
    pub fn new(m: usize, n: usize) -> Self {
        VecPermutation { m, n }
    }

    pub fn size(&self) -> usize {
        self.m * self.n
    }

    /// Column index of the single one in row `row`.
    pub fn source(&self, row: usize) -> usize {
        // row = i*n + j  <-  j*m + i
        let (i, j) = (row / self.n, row % self.n);
        j * self.m + i
    }

    pub fn apply(&self, v: &Vector) -> Vector {
        Vector::from_fn(self.size(), |row, _| v[self.source(row)])
    }

    /// `M · Π`, permuting the columns of `M`.
    pub fn right_multiply(&self, mat: &Matrix) -> Matrix {
        assert_eq!(mat.ncols(), self.size(), "column count must equal mn");
        let mut out = Matrix::zeros(mat.nrows(), self.size());
        for row in 0..self.size() {
            // (M Π)[:, source(row)] = M[:, row]
            out.set_column(self.source(row), &mat.column(row));
        }
        out
    }

    pub fn to_dense(&self, cfg: &Config) -> Result<Matrix> {
        let s = self.size();
        cfg.check_dense(s, s)?;
        let mut out = Matrix::zeros(s, s);
        for row in 0..s {
            out[(row, self.source(row))] = 1.0;
        }
        Ok(out)
    }
}

/// Solves `R x = rhs` for upper-triangular `R` (columns of `rhs` independently).
pub fn solve_upper(r: &Matrix, rhs: &Matrix) -> Result<Matrix> {
    r.solve_upper_triangular(rhs)
        .ok_or(MtlsError::RankDeficient { pivot: 0.0, tol: 0.0 })
}

/// Solves `Rᵀ x = rhs` for upper-triangular `R`.
pub fn solve_upper_transpose(r: &Matrix, rhs: &Matrix) -> Result<Matrix> {
    r.tr_solve_upper_triangular(rhs)
        .ok_or(MtlsError::RankDeficient { pivot: 0.0, tol: 0.0 })
}

/// Inverse iteration `v ← (RᵀR)⁻¹ v` for the smallest right singular vector of a
/// square upper-triangular `R`, started from `v` and run until the update stalls.
/// Sharpens vectors from the bidiagonal SVD, which can lose accuracy on graded blocks.
pub fn refine_smallest_right_vector(r: &Matrix, v: &Vector, max_iter: usize) -> Vector {
    let mut v = v.normalize();
    if !r.is_square() || r.nrows() != v.len() || r.diagonal().iter().any(|d| *d == 0.0) {
        return v;
    }
    for _ in 0..max_iter {
        let Some(w) = r.tr_solve_upper_triangular(&v) else { break };
        let w = w.normalize();
        let Some(y) = r.solve_upper_triangular(&w) else { break };
        let mut y = y.normalize();
        if !y.iter().all(|t| t.is_finite()) {
            break;
        }
        if y.dot(&v) < 0.0 {
            y.neg_mut();
        }
        let change = (&y - &v).amax();
        v = y;
        if change <= 4.0 * f64::EPSILON {
            break;
        }
    }
    v
}

/// Entrywise absolute value.
pub fn abs(m: &Matrix) -> Matrix {
    m.map(f64::abs)
}

/// `‖v‖_∞`.
pub fn inf_norm(v: &Vector) -> f64 {
    v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}
