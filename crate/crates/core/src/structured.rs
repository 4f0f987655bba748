//! Linear matrix structures `A = Σ αᵢ Sᵢ` and the structured condition numbers.
//!
//! Basis matrices are stored as coordinate lists. `b` is always perturbed
//! without structure, so the full parameter vector is `[α; b]`.

use std::fmt::Write as _;

use serde::Serialize;

use crate::condition::MixedComponentwise;
use crate::kernels::{self, Matrix, Vector};
use crate::solver::MtlsSolution;
use crate::{MtlsError, Result};

/// One basis matrix in coordinate form, 0-based `(row, col, value)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseBasisMatrix {
    pub entries: Vec<(usize, usize, f64)>,
}

impl SparseBasisMatrix {
    /// `S x`
    pub fn mul_vec(&self, x: &Vector, m: usize) -> Vector {
        let mut out = Vector::zeros(m);
        for &(i, j, v) in &self.entries {
            out[i] += v * x[j];
        }
        out
    }

    /// `Sᵀ r`
    pub fn tr_mul_vec(&self, r: &Vector, n: usize) -> Vector {
        let mut out = Vector::zeros(n);
        for &(i, j, v) in &self.entries {
            out[j] += v * r[i];
        }
        out
    }
}

/// Which closed forms are known for a basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StructureKind {
    General,
    /// `[1_m, T]` with `T` banded lower Toeplitz of half-bandwidth `omega`.
    ToeplitzIntercept { omega: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructureBasis {
    m: usize,
    n: usize,
    basis: Vec<SparseBasisMatrix>,
    alpha: Vector,
    kind: StructureKind,
}

impl StructureBasis {
    /// Builds and validates a basis: entries in range, pairwise disjoint
    /// supports (so `ΦᵀΦ` is diagonal), and no empty matrix (full column rank).
    pub fn new(m: usize, n: usize, basis: Vec<SparseBasisMatrix>, alpha: Vector) -> Result<Self> {
        if basis.len() != alpha.len() {
            return Err(MtlsError::dim(format!(
                "{} basis matrices but {} coefficients",
                basis.len(),
                alpha.len()
            )));
        }
        let mut owner = vec![usize::MAX; m * n];
        for (k, s) in basis.iter().enumerate() {
            if s.entries.iter().all(|e| e.2 == 0.0) {
                return Err(MtlsError::dim(format!("basis matrix {} is zero", k + 1)));
            }
            for &(i, j, v) in &s.entries {
                if i >= m || j >= n {
                    return Err(MtlsError::dim(format!("entry ({i}, {j}) outside {m}x{n}")));
                }
                if !v.is_finite() {
                    return Err(MtlsError::dim("non-finite basis entry"));
                }
                if v == 0.0 {
                    continue;
                }
                let slot = &mut owner[j * m + i];
                if *slot != usize::MAX && *slot != k {
                    return Err(MtlsError::dim(format!(
                        "basis matrices {} and {} overlap at ({i}, {j})",
                        *slot + 1,
                        k + 1
                    )));
                }
                *slot = k;
            }
        }
        Ok(StructureBasis { m, n, basis, alpha, kind: StructureKind::General })
    }

    /// The `mn` elementary matrices `E_ij` (column-major order), i.e. no structure.
    pub fn unstructured(a: &Matrix) -> Self {
        let (m, n) = a.shape();
        let basis = (0..n)
            .flat_map(|j| (0..m).map(move |i| SparseBasisMatrix { entries: vec![(i, j, 1.0)] }))
            .collect();
        StructureBasis { m, n, basis, alpha: kernels::vec(a), kind: StructureKind::General }
    }

    pub fn m(&self) -> usize {
        self.m
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn q(&self) -> usize {
        self.basis.len()
    }
    pub fn alpha(&self) -> &Vector {
        &self.alpha
    }
    pub fn basis(&self) -> &[SparseBasisMatrix] {
        &self.basis
    }
    pub fn kind(&self) -> StructureKind {
        self.kind
    }

    /// Same structure, different coefficients.
    pub fn with_alpha(&self, alpha: Vector) -> Result<Self> {
        if alpha.len() != self.q() {
            return Err(MtlsError::dim("alpha length does not match q"));
        }
        Ok(StructureBasis { alpha, ..self.clone() })
    }

    /// `Σ αᵢ Sᵢ`
    pub fn reconstruct(&self) -> Matrix {
        self.combine(&self.alpha)
    }

    /// `Σ cᵢ Sᵢ` for arbitrary coefficients (e.g. a structured perturbation `Δα`).
    pub fn combine(&self, coeffs: &Vector) -> Matrix {
        let mut out = Matrix::zeros(self.m, self.n);
        for (s, c) in self.basis.iter().zip(coeffs.iter()) {
            for &(i, j, v) in &s.entries {
                out[(i, j)] += c * v;
            }
        }
        out
    }

    /// `[S₁x, …, S_q x]`, `m x q`.
    pub fn times_x(&self, x: &Vector) -> Matrix {
        let mut out = Matrix::zeros(self.m, self.q());
        for (k, s) in self.basis.iter().enumerate() {
            out.set_column(k, &s.mul_vec(x, self.m));
        }
        out
    }

    /// `[S₁ᵀr, …, S_qᵀ r]`, `n x q`.
    pub fn transpose_times_r(&self, r: &Vector) -> Matrix {
        let mut out = Matrix::zeros(self.n, self.q());
        for (k, s) in self.basis.iter().enumerate() {
            out.set_column(k, &s.tr_mul_vec(r, self.n));
        }
        out
    }

    /// Dense `Φ_A = [vec(S₁), …, vec(S_q)]`, for checks on small instances.
    pub fn phi_a(&self) -> Matrix {
        let mut out = Matrix::zeros(self.m * self.n, self.q());
        for (k, s) in self.basis.iter().enumerate() {
            for &(i, j, v) in &s.entries {
                out[(j * self.m + i, k)] += v;
            }
        }
        out
    }

    /// Dense `Φ_{A,b} = diag(Φ_A, I_m)`.
    pub fn phi_ab(&self) -> Matrix {
        let (mn, q, m) = (self.m * self.n, self.q(), self.m);
        let mut out = Matrix::zeros(mn + m, q + m);
        out.view_mut((0, 0), (mn, q)).copy_from(&self.phi_a());
        out.view_mut((mn, q), (m, m)).fill_with_identity();
        out
    }

    /// Writes the text format read by [`StructureBasis::parse`].
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "%%mtls-structure");
        let _ = writeln!(s, "{} {} {}", self.m, self.n, self.q());
        let alpha: Vec<String> = self.alpha.iter().map(|a| format!("{a:e}")).collect();
        let _ = writeln!(s, "alpha {}", alpha.join(" "));
        for (k, b) in self.basis.iter().enumerate() {
            let _ = writeln!(s, "matrix {} {}", k + 1, b.entries.len());
            for &(i, j, v) in &b.entries {
                let _ = writeln!(s, "{} {} {v:e}", i + 1, j + 1);
            }
        }
        s
    }

    /// Parses the structure text format:
    ///
    /// ```text
    /// %%mtls-structure          (optional banner; '%' lines are comments)
    /// m n q
    /// alpha a_1 ... a_q
    /// matrix 1 nnz              (repeated q times, in order)
    /// i j value                 (nnz lines, 1-based indices)
    /// ```
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('%'));
        let perr = |line: usize, msg: &str| MtlsError::Parse { line, msg: msg.to_string() };

        let (ln, header) = lines.next().ok_or_else(|| perr(0, "missing header"))?;
        let dims = parse_numbers::<usize>(header, ln)?;
        let [m, n, q] = dims[..] else {
            return Err(perr(ln, "header must be `m n q`"));
        };

        let (ln, alpha_line) = lines.next().ok_or_else(|| perr(ln, "missing alpha line"))?;
        let rest = alpha_line
            .strip_prefix("alpha")
            .ok_or_else(|| perr(ln, "expected `alpha ...`"))?;
        let alpha = parse_numbers::<f64>(rest, ln)?;
        if alpha.len() != q {
            return Err(perr(ln, &format!("expected {q} alpha values, found {}", alpha.len())));
        }

        let mut basis = Vec::with_capacity(q);
        for k in 0..q {
            let (ln, head) = lines.next().ok_or_else(|| perr(0, "missing matrix block"))?;
            let rest = head.strip_prefix("matrix").ok_or_else(|| perr(ln, "expected `matrix k nnz`"))?;
            let nums = parse_numbers::<usize>(rest, ln)?;
            let [idx, nnz] = nums[..] else {
                return Err(perr(ln, "expected `matrix k nnz`"));
            };
            if idx != k + 1 {
                return Err(perr(ln, &format!("expected matrix {}, found {idx}", k + 1)));
            }
            let mut entries = Vec::with_capacity(nnz);
            for _ in 0..nnz {
                let (ln, line) = lines.next().ok_or_else(|| perr(ln, "truncated matrix block"))?;
                let parts: Vec<&str> = line.split_whitespace().collect();
                if parts.len() != 3 {
                    return Err(perr(ln, "expected `i j value`"));
                }
                let i: usize = parts[0].parse().map_err(|_| perr(ln, "bad row index"))?;
                let j: usize = parts[1].parse().map_err(|_| perr(ln, "bad column index"))?;
                let v: f64 = parts[2].parse().map_err(|_| perr(ln, "bad value"))?;
                if i == 0 || j == 0 {
                    return Err(perr(ln, "indices are 1-based"));
                }
                entries.push((i - 1, j - 1, v));
            }
            basis.push(SparseBasisMatrix { entries });
        }
        if let Some((ln, _)) = lines.next() {
            return Err(perr(ln, "trailing content after the last matrix"));
        }
        StructureBasis::new(m, n, basis, Vector::from_vec(alpha))
    }
}

fn parse_numbers<T: std::str::FromStr>(s: &str, line: usize) -> Result<Vec<T>> {
    s.split_whitespace()
        .map(|t| {
            t.parse::<T>()
                .map_err(|_| MtlsError::Parse { line, msg: format!("cannot parse `{t}`") })
        })
        .collect()
}

/// Basis for the intercept model `A = [1_m, T]`, `T` an `m x (m - 2ω)` banded
/// lower-Toeplitz matrix whose first column is `t_col` followed by zeros:
/// `S₁ = [1_m, O]`, `S_{k+2} = [0, Y₀ᵏ Ŝ₁]` with `Ŝ₁ = [I; O]` and `Y₀` the lower shift.
/// The first row of `T` is zero except at `(1, 1)`.
pub fn toeplitz_intercept_basis(m: usize, omega: usize, t_col: &[f64]) -> Result<StructureBasis> {
    if m <= 2 * omega {
        return Err(MtlsError::dim(format!("need m > 2ω, got m = {m}, ω = {omega}")));
    }
    if t_col.len() != 2 * omega + 1 {
        return Err(MtlsError::dim(format!("t_col must have {} entries", 2 * omega + 1)));
    }
    let cols = m - 2 * omega;
    let n = cols + 1;
    let mut basis = Vec::with_capacity(2 * omega + 2);
    basis.push(SparseBasisMatrix { entries: (0..m).map(|i| (i, 0, 1.0)).collect() });
    for shift in 0..=2 * omega {
        basis.push(SparseBasisMatrix {
            entries: (0..cols).map(|j| (j + shift, j + 1, 1.0)).collect(),
        });
    }
    let mut alpha = Vec::with_capacity(2 * omega + 2);
    alpha.push(1.0);
    alpha.extend_from_slice(t_col);
    let mut sb = StructureBasis::new(m, n, basis, Vector::from_vec(alpha))?;
    sb.kind = StructureKind::ToeplitzIntercept { omega };
    Ok(sb)
}

/// Closed form of `[S₁x, …, S_q x] = [x₁ 1_m, T_x]` for the intercept basis, where
/// `T_x` is `m x (2ω+1)` lower Toeplitz with first column `(x₂, …, x_n, 0, …, 0)`.
pub fn toeplitz_times_x(m: usize, omega: usize, x: &Vector) -> Matrix {
    let cols = m - 2 * omega;
    let mut out = Matrix::zeros(m, 2 * omega + 2);
    out.column_mut(0).fill(x[0]);
    for k in 0..=2 * omega {
        for i in k..(k + cols) {
            out[(i, k + 1)] = x[i - k + 1];
        }
    }
    out
}

/// Closed form of `[S₁ᵀr, …, S_qᵀ r] = diag(1_mᵀ r, H_r)` for the intercept basis,
/// `H_r` the `(m-2ω) x (2ω+1)` Hankel matrix `H[j, k] = r[j + k]`.
pub fn toeplitz_transpose_times_r(m: usize, omega: usize, r: &Vector) -> Matrix {
    let cols = m - 2 * omega;
    let mut out = Matrix::zeros(cols + 1, 2 * omega + 2);
    out[(0, 0)] = r.sum();
    for j in 0..cols {
        for k in 0..=2 * omega {
            out[(j + 1, k + 1)] = r[j + k];
        }
    }
    out
}

/// `KΦ = -P⁻¹(AᵀH₀[S₁x, …, S_q x, -I_m] + [S₁ᵀr, …, S_qᵀr, O])`, `n x (q+m)`,
/// without forming `Φ` or `K`.
pub fn k_phi_structured(sol: &MtlsSolution, basis: &StructureBasis) -> Result<Matrix> {
    let p = sol.problem();
    if basis.m() != p.m() || basis.n() != p.n() {
        return Err(MtlsError::dim("structure basis does not match the problem"));
    }
    if sol.r().norm() == 0.0 {
        return Err(MtlsError::ConsistentSystem { residual: 0.0, tol: 0.0 });
    }
    let (sx, str_) = match basis.kind() {
        StructureKind::ToeplitzIntercept { omega } => (
            toeplitz_times_x(basis.m(), omega, sol.x()),
            toeplitz_transpose_times_r(basis.m(), omega, sol.r()),
        ),
        StructureKind::General => (basis.times_x(sol.x()), basis.transpose_times_r(sol.r())),
    };
    let p_inv = sol.p_inverse()?;
    let d = p_inv * sol.at_h0();
    let q = basis.q();
    let mut out = Matrix::zeros(p.n(), q + p.m());
    out.view_mut((0, 0), (p.n(), q)).copy_from(&(-(&d * sx + p_inv * str_)));
    out.view_mut((0, q), (p.n(), p.m())).copy_from(&d);
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct StructuredReport {
    pub kappa_s: f64,
    pub mixed_s: f64,
    pub compw_s: f64,
    pub compw_s_infinite: bool,
    #[serde(skip)]
    pub k_phi: Matrix,
}

/// Structured normwise, mixed and componentwise condition numbers over `[α; b]`.
pub fn structured_condition_numbers(sol: &MtlsSolution, basis: &StructureBasis) -> Result<StructuredReport> {
    let k_phi = k_phi_structured(sol, basis)?;
    let b = sol.problem().b();
    let mut params = Vector::zeros(basis.q() + b.len());
    params.rows_mut(0, basis.q()).copy_from(basis.alpha());
    params.rows_mut(basis.q(), b.len()).copy_from(b);

    let norm = kernels::spectral_norm(&k_phi, sol.config())?;
    let kappa_s = norm * params.norm() / sol.x().norm();
    let s = kernels::abs(&k_phi) * params.abs();
    let mc = MixedComponentwise::from_sensitivity(&s, sol.x());
    Ok(StructuredReport {
        kappa_s,
        mixed_s: mc.mixed,
        compw_s: mc.compw,
        compw_s_infinite: mc.compw_infinite,
        k_phi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn banded(m: usize, omega: usize, t: &[f64]) -> Matrix {
        let cols = m - 2 * omega;
        let mut a = Matrix::zeros(m, cols + 1);
        a.column_mut(0).fill(1.0);
        for j in 0..cols {
            for (k, tk) in t.iter().enumerate() {
                a[(j + k, j + 1)] = *tk;
            }
        }
        a
    }

    #[test]
    fn reconstruct_single_and_zero() {
        let s = SparseBasisMatrix { entries: vec![(0, 0, 1.0), (1, 1, 1.0)] };
        let sb = StructureBasis::new(3, 2, vec![s], Vector::from_vec(vec![3.0])).unwrap();
        let expected = Matrix::from_row_slice(3, 2, &[3.0, 0.0, 0.0, 3.0, 0.0, 0.0]);
        assert_eq!(sb.reconstruct(), expected);
        assert_eq!(sb.combine(&Vector::zeros(1)), Matrix::zeros(3, 2));
    }

    #[test]
    fn toeplitz_basis_small() {
        let t = [1.0, 2.0, 3.0];
        let sb = toeplitz_intercept_basis(5, 1, &t).unwrap();
        assert_eq!(sb.q(), 4);
        assert_eq!(sb.n(), 4);
        let a = sb.reconstruct();
        let expected = Matrix::from_row_slice(
            5,
            4,
            &[
                1.0, 1.0, 0.0, 0.0, //
                1.0, 2.0, 1.0, 0.0, //
                1.0, 3.0, 2.0, 1.0, //
                1.0, 0.0, 3.0, 2.0, //
                1.0, 0.0, 0.0, 3.0,
            ],
        );
        assert_eq!(a, expected);
        assert_eq!(a, banded(5, 1, &t));
        // first row is zero except in the Toeplitz (1,1) slot
        assert_eq!(a.row(0).columns(2, 2).amax(), 0.0);
    }

    #[test]
    fn toeplitz_closed_forms_match_generic_loop() {
        let t: Vec<f64> = (1..=5).map(f64::from).collect();
        let sb = toeplitz_intercept_basis(9, 2, &t).unwrap();
        let x = Vector::from_fn(sb.n(), |i, _| 0.3 * i as f64 - 0.7);
        let r = Vector::from_fn(9, |i, _| (i as f64).sin());
        let gx = sb.times_x(&x);
        let cx = toeplitz_times_x(9, 2, &x);
        assert!((&gx - &cx).amax() <= 1e-12 * gx.amax());
        let gr = sb.transpose_times_r(&r);
        let cr = toeplitz_transpose_times_r(9, 2, &r);
        assert!((&gr - &cr).amax() <= 1e-12 * gr.amax());
    }

    #[test]
    fn toeplitz_dimension_error() {
        assert!(matches!(toeplitz_intercept_basis(4, 2, &[1.0; 5]), Err(MtlsError::Dimension(_))));
    }

    #[test]
    fn phi_columns_are_orthogonal_with_single_entry_rows() {
        let sb = toeplitz_intercept_basis(12, 3, &[1.0; 7]).unwrap();
        let phi = sb.phi_a();
        let gram = phi.tr_mul(&phi);
        for i in 0..gram.nrows() {
            assert!(gram[(i, i)] > 0.0);
            for j in 0..gram.ncols() {
                if i != j {
                    assert_eq!(gram[(i, j)], 0.0);
                }
            }
        }
        for row in phi.row_iter() {
            assert!(row.iter().filter(|v| **v != 0.0).count() <= 1);
        }
    }

    #[test]
    fn overlapping_basis_is_rejected() {
        let s1 = SparseBasisMatrix { entries: vec![(0, 0, 1.0)] };
        let s2 = SparseBasisMatrix { entries: vec![(0, 0, 2.0)] };
        assert!(StructureBasis::new(2, 1, vec![s1, s2], Vector::from_vec(vec![1.0, 1.0])).is_err());
        let zero = SparseBasisMatrix { entries: vec![] };
        assert!(StructureBasis::new(2, 1, vec![zero], Vector::from_vec(vec![1.0])).is_err());
    }

    #[test]
    fn text_format_round_trip() {
        let sb = toeplitz_intercept_basis(7, 1, &[1.0, -2.5, 3.0]).unwrap();
        let parsed = StructureBasis::parse(&sb.to_text()).unwrap();
        assert_eq!(parsed.reconstruct(), sb.reconstruct());
        assert_eq!(parsed.alpha(), sb.alpha());
    }

    #[test]
    fn text_format_errors_carry_line_numbers() {
        let bad = "%%mtls-structure\n2 1 1\nalpha 1.0\nmatrix 1 1\n1 x 1.0\n";
        match StructureBasis::parse(bad) {
            Err(MtlsError::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("unexpected {other:?}"),
        }
        assert!(StructureBasis::parse("2 1\n").is_err());
    }
}
