//! Seeded test-problem families.

use nalgebra::QR;

use super::rng::ExperimentRng;
use crate::kernels::{Matrix, Vector};
use crate::structured::{toeplitz_intercept_basis, StructureBasis};
use crate::{MtlsError, MtlsProblem, Result};

/// Errors-in-variables transfer-function model
/// `C(q⁻¹) y₀(t) = B(q⁻¹) u₀(t)` with noise-free input and noisy output.
///
/// Regressor rows are `φ(t) = [u(t-1), …, u(t-n1), -y(t-1), …, -y(t-n2)]` for
/// `t = k₀+1, …, k₀+m`, `k₀ = max(n1, n2)`, with `u(j) = y(j) = 0` for `j <= 0`;
/// the right-hand side is `y(t)`. The noisy `y` enters both the trailing
/// columns and `b`.
///
/// Input `u(t)` is standard normal. Coefficients: `b_i ~ U[-1, 1)` and
/// `c_i ~ U[-1, 1) / (2 n2)`, so `Σ|c_i| < 1/2` and the recursion is stable.
pub fn gen_transfer_function(m: usize, n1: usize, n2: usize, noise_var: f64, seed: u64) -> Result<MtlsProblem> {
    let n = n1 + n2;
    if n == 0 || m < n {
        return Err(MtlsError::dim(format!("need m >= n1 + n2 >= 1, got m = {m}, n = {n}")));
    }
    if !(noise_var >= 0.0) {
        return Err(MtlsError::dim("noise variance must be nonnegative"));
    }
    let mut rng = ExperimentRng::new(seed);
    let b_coef: Vec<f64> = (0..n1).map(|_| 2.0 * rng.rand() - 1.0).collect();
    let c_coef: Vec<f64> = (0..n2).map(|_| (2.0 * rng.rand() - 1.0) / (2.0 * n2 as f64)).collect();

    let k0 = n1.max(n2);
    let len = k0 + m + 1;
    // index t = 0 stands for all times <= 0
    let mut u = vec![0.0; len];
    let mut y0 = vec![0.0; len];
    for ut in u.iter_mut().skip(1) {
        *ut = rng.randn();
    }
    let at = |v: &[f64], t: isize| if t <= 0 { 0.0 } else { v[t as usize] };
    for t in 1..len {
        let ti = t as isize;
        let mut acc = 0.0;
        for (i, bi) in b_coef.iter().enumerate() {
            acc += bi * at(&u, ti - 1 - i as isize);
        }
        for (i, ci) in c_coef.iter().enumerate() {
            acc -= ci * at(&y0, ti - 1 - i as isize);
        }
        y0[t] = acc;
    }
    let sd = noise_var.sqrt();
    let y: Vec<f64> = y0.iter().enumerate().map(|(t, v)| if t == 0 { 0.0 } else { v + sd * rng.randn() }).collect();

    let mut a = Matrix::zeros(m, n);
    let mut b = Vector::zeros(m);
    for row in 0..m {
        let t = (k0 + 1 + row) as isize;
        for i in 0..n1 {
            a[(row, i)] = at(&u, t - 1 - i as isize);
        }
        for i in 0..n2 {
            a[(row, n1 + i)] = -at(&y, t - 1 - i as isize);
        }
        b[row] = y[t as usize];
    }
    MtlsProblem::new(a, b, n1)
}

/// Random problem with a prescribed distance to non-genericity.
///
/// `[A, b] = Q R̃` with `Q` orthogonal (QR of a Gaussian matrix),
/// `[R11, R12, R1b]` the triangular factor of a uniform `n1 x (n+1)` matrix,
/// and `[R22, R2b]` the triangular factor of `Y [D; O] Zᵀ`, where `Y`, `Z` are
/// Householder reflectors from random unit vectors and
/// `D = diag(n2, n2-1, …, 1, 1-e_p)`. The genericity gap lies in `[0, e_p]`.
pub fn gen_gap_controlled(m: usize, n: usize, n1: usize, e_p: f64, seed: u64) -> Result<MtlsProblem> {
    if !(e_p > 0.0 && e_p < 1.0) {
        return Err(MtlsError::dim(format!("e_p must lie in (0, 1), got {e_p}")));
    }
    if n == 0 || m <= n || n1 > n {
        return Err(MtlsError::dim(format!("need m > n >= n1, got m = {m}, n = {n}, n1 = {n1}")));
    }
    let n2 = n - n1;
    let mp = m - n1;
    let mut rng = ExperimentRng::new(seed);

    let q = QR::new(rng.randn_matrix(m, m)).q();

    let mut r_tilde = Matrix::zeros(m, n + 1);
    if n1 > 0 {
        let top = QR::new(rng.rand_matrix(n1, n + 1)).r();
        r_tilde.view_mut((0, 0), (n1, n + 1)).copy_from(&top);
    }

    let y = rng.unit_vector(mp);
    let z = rng.unit_vector(n2 + 1);
    let mut diag = Matrix::zeros(mp, n2 + 1);
    for i in 0..n2 {
        diag[(i, i)] = (n2 - i) as f64;
    }
    diag[(n2, n2)] = 1.0 - e_p;
    // Y [D; O] Zᵀ with Y = I - 2yyᵀ, Z = I - 2zzᵀ
    let mut core = diag.clone();
    let dz = &diag * &z;
    core.ger(-2.0, &dz, &z, 1.0);
    let ytc = core.tr_mul(&y);
    core.ger(-2.0, &y, &ytc, 1.0);
    let block = QR::new(core).r();
    r_tilde.view_mut((n1, n1), (n2 + 1, n2 + 1)).copy_from(&block);

    let ab = q * r_tilde;
    let a = ab.columns(0, n).into_owned();
    let b = ab.column(n).into_owned();
    MtlsProblem::new(a, b, n1)
}

/// The two intercept-model families `A = [1_m, C]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InterceptMode {
    /// Fixed `6 x 4` pattern with tiny entries `δ`; the first `n1` columns are exact.
    DeltaBlock { delta: f64, n1: usize },
    /// `C = T` banded lower Toeplitz, first column `1, 2, …, 2ω+1, 0, …`,
    /// `n1 = 1`, and `b = λ b̄`.
    Toeplitz { omega: usize, lambda: f64 },
}

/// Intercept-model problem; the Toeplitz mode also returns its structure basis.
/// `b̄` (or `b`) is uniform `[0, 1)`.
pub fn gen_intercept(m: usize, mode: InterceptMode, seed: u64) -> Result<(MtlsProblem, Option<StructureBasis>)> {
    let mut rng = ExperimentRng::new(seed);
    match mode {
        InterceptMode::DeltaBlock { delta, n1 } => {
            if m != 6 {
                return Err(MtlsError::dim(format!("the delta-block model has m = 6, got {m}")));
            }
            if n1 == 0 || n1 > 5 {
                return Err(MtlsError::dim("delta-block model needs 1 <= n1 <= 5"));
            }
            #[rustfmt::skip]
            let c = Matrix::from_row_slice(6, 4, &[
                delta, 0.0,   0.0, 0.0,
                0.0,   delta, 0.0, 0.0,
                0.0,   0.0,   0.0, 1.0,
                0.0,   0.0,   1.0, 0.0,
                0.0,   0.0,   1.0, 0.0,
                0.0,   0.0,   0.0, delta,
            ]);
            let mut a = Matrix::from_element(6, 5, 1.0);
            a.view_mut((0, 1), (6, 4)).copy_from(&c);
            let b = rng.rand_vector(6);
            Ok((MtlsProblem::new(a, b, n1)?, None))
        }
        InterceptMode::Toeplitz { omega, lambda } => {
            let t: Vec<f64> = (1..=2 * omega + 1).map(|i| i as f64).collect();
            let basis = toeplitz_intercept_basis(m, omega, &t)?;
            let a = basis.reconstruct();
            let b = rng.rand_vector(m) * lambda;
            Ok((MtlsProblem::new(a, b, 1)?, Some(basis)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::genericity_gap;
    use crate::{kernels, Config};

    #[test]
    fn transfer_function_shape_and_determinism() {
        let p = gen_transfer_function(30, 10, 10, 0.01, 3).unwrap();
        assert_eq!((p.m(), p.n(), p.n1()), (30, 20, 10));
        assert_eq!(p, gen_transfer_function(30, 10, 10, 0.01, 3).unwrap());
        // the exact input columns do not depend on the noise level
        let q = gen_transfer_function(30, 10, 10, 0.5, 3).unwrap();
        assert_eq!(p.a().columns(0, 10), q.a().columns(0, 10));
        assert_ne!(p.a().columns(10, 10), q.a().columns(10, 10));
    }

    #[test]
    fn noiseless_transfer_function_is_consistent() {
        let p = gen_transfer_function(30, 3, 2, 0.0, 8).unwrap();
        assert!(matches!(crate::solve(&p), Err(MtlsError::ConsistentSystem { .. })));
    }

    #[test]
    fn gap_controlled_block_singular_values() {
        let e_p = 0.3;
        let p = gen_gap_controlled(40, 12, 4, e_p, 1).unwrap();
        let f = kernels::qr_partition(p.a(), p.b(), p.n1(), &Config::default()).unwrap();
        let s = kernels::singular_values(&f.r2_block(), &Config::default()).unwrap();
        let n2 = p.n2();
        assert!((s[n2 - 1] - s[n2] - e_p).abs() <= 1e-10 * e_p);
        let gap = genericity_gap(&p).unwrap();
        assert!((0.0..=e_p * (1.0 + 1e-12)).contains(&gap));
    }

    #[test]
    fn gap_controlled_rejects_bad_parameters() {
        assert!(gen_gap_controlled(10, 10, 2, 0.5, 1).is_err());
        assert!(gen_gap_controlled(20, 10, 2, 1.5, 1).is_err());
    }

    #[test]
    fn delta_block_pattern() {
        let (p, basis) = gen_intercept(6, InterceptMode::DeltaBlock { delta: 1e-2, n1: 1 }, 0).unwrap();
        assert!(basis.is_none());
        assert_eq!(p.a().shape(), (6, 5));
        assert!(p.a().column(0).iter().all(|v| *v == 1.0));
        assert_eq!(p.a()[(0, 1)], 1e-2);
        assert_eq!(p.a()[(2, 4)], 1.0);
        assert_eq!(p.a()[(5, 4)], 1e-2);
        assert!(gen_intercept(7, InterceptMode::DeltaBlock { delta: 1e-2, n1: 1 }, 0).is_err());
    }

    #[test]
    fn toeplitz_intercept_scaling() {
        let (p1, basis) = gen_intercept(60, InterceptMode::Toeplitz { omega: 8, lambda: 1.0 }, 4).unwrap();
        let (p6, _) = gen_intercept(60, InterceptMode::Toeplitz { omega: 8, lambda: 1e-6 }, 4).unwrap();
        assert_eq!(p1.n(), 60 - 16 + 1);
        assert_eq!(basis.unwrap().q(), 18);
        assert!((p1.b().norm() / p6.b().norm() - 1e6).abs() < 1e-6);
    }
}
