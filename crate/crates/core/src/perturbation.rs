//! First-order perturbation maps of the MTLS solution.
//!
//! Both Jacobians act on `vec([ΔA, Δb])`, i.e. `ΔA` column-stacked followed by `Δb`,
//! so they are `n x m(n+1)` and directly comparable.

use crate::kernels::{self, Matrix, Vector, VecPermutation};
use crate::solver::MtlsSolution;
use crate::{MtlsError, Result};

/// Explicit Jacobian of the solution map `[A, b] -> x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Jacobian {
    k: Matrix,
    m: usize,
    n: usize,
}

impl Jacobian {
    pub fn matrix(&self) -> &Matrix {
        &self.k
    }
    pub fn into_matrix(self) -> Matrix {
        self.k
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn max_abs(&self) -> f64 {
        self.k.amax()
    }
}

/// The residual reflector `H₀ = I - 2 r rᵀ / ‖r‖²`, kept implicit.
#[derive(Debug, Clone)]
pub struct ResidualReflector {
    r: Vector,
    rr: f64,
}

impl ResidualReflector {
    pub fn new(r: &Vector) -> Result<Self> {
        let rr = r.norm_squared();
        if rr == 0.0 {
            return Err(MtlsError::ConsistentSystem { residual: 0.0, tol: 0.0 });
        }
        Ok(ResidualReflector { r: r.clone(), rr })
    }

    pub fn apply(&self, v: &Vector) -> Vector {
        v - &self.r * (2.0 * self.r.dot(v) / self.rr)
    }

    pub fn to_dense(&self) -> Matrix {
        let m = self.r.len();
        let c = -2.0 / self.rr;
        // c (r_i r_j) keeps the result exactly symmetric
        Matrix::from_fn(m, m, |i, j| c * (self.r[i] * self.r[j]) + if i == j { 1.0 } else { 0.0 })
    }
}

fn check_jacobian_size(sol: &MtlsSolution) -> Result<(usize, usize)> {
    let (m, n) = (sol.problem().m(), sol.problem().n());
    sol.config().check_dense(n, m * (n + 1))?;
    if sol.r().norm() == 0.0 {
        return Err(MtlsError::ConsistentSystem { residual: 0.0, tol: 0.0 });
    }
    Ok((m, n))
}

/// `K = -P⁻¹ (AᵀH₀ G(x) + [I_n ⊗ rᵀ, O_{n×m}])` with `G(x) = [xᵀ, -1] ⊗ I_m`.
pub fn jacobian_new(sol: &MtlsSolution) -> Result<Jacobian> {
    let (m, n) = check_jacobian_size(sol)?;
    let x = sol.x();
    let r = sol.r();
    let at_h0 = sol.at_h0();

    // inner = AᵀH₀ G(x) + [I_n ⊗ rᵀ, O]; block j of G(x) is x_j I_m, the last is -I_m.
    let mut inner = Matrix::zeros(n, m * (n + 1));
    for j in 0..n {
        let mut block = inner.view_mut((0, j * m), (n, m));
        block.copy_from(&(&at_h0 * x[j]));
        let mut row = block.row_mut(j);
        row += r.transpose();
    }
    inner.view_mut((0, n * m), (n, m)).copy_from(&(-&at_h0));

    let k = -(sol.p_inverse()? * inner);
    Ok(Jacobian { k, m, n })
}

/// `K_ZY = [-(xᵀ ⊗ D) - (rᵀ ⊗ P⁻¹) Π_{m,n}, D]` with `D = P⁻¹(Aᵀ - 2 W x rᵀ / γ̄)`.
pub fn jacobian_zy(sol: &MtlsSolution) -> Result<Jacobian> {
    let (m, n) = check_jacobian_size(sol)?;
    let cfg = sol.config();
    let x = sol.x();
    let r = sol.r();
    let p_inv = sol.p_inverse()?;
    let w = sol.weights();
    let gamma_bar = 1.0 + w.quad(x);

    let mut inner = sol.problem().a().transpose();
    inner.ger(-2.0 / gamma_bar, &w.apply(x), r, 1.0);
    let d = p_inv * inner;

    let xt = Matrix::from_row_slice(1, n, x.as_slice());
    let rt = Matrix::from_row_slice(1, m, r.as_slice());
    let first = kron(&xt, &d, cfg)?;
    let second = VecPermutation::new(m, n).right_multiply(&kron(&rt, p_inv, cfg)?);

    let mut k = Matrix::zeros(n, m * (n + 1));
    k.view_mut((0, 0), (n, m * n)).copy_from(&(-(first + second)));
    k.view_mut((0, m * n), (n, m)).copy_from(&d);
    Ok(Jacobian { k, m, n })
}

fn kron(a: &Matrix, b: &Matrix, cfg: &crate::Config) -> Result<Matrix> {
    kernels::kron(a, b, cfg)
}

/// `K vec([dA, db])` using the explicit Jacobian.
pub fn predict_delta_x(k: &Jacobian, da: &Matrix, db: &Vector) -> Result<Vector> {
    if da.shape() != (k.m, k.n) || db.len() != k.m {
        return Err(MtlsError::dim("perturbation does not match the Jacobian"));
    }
    Ok(&k.k * kernels::vec_augmented(da, db))
}

/// `-P⁻¹(AᵀH₀(dA x - db) + dAᵀ r)`, the same prediction without forming `K`.
pub fn predict_delta_x_compact(sol: &MtlsSolution, da: &Matrix, db: &Vector) -> Result<Vector> {
    let p = sol.problem();
    if da.shape() != p.a().shape() || db.len() != p.m() {
        return Err(MtlsError::dim("perturbation does not match the problem"));
    }
    let h0 = ResidualReflector::new(sol.r())?;
    let g = da * sol.x() - db;
    let inner = p.a().tr_mul(&h0.apply(&g)) + da.tr_mul(sol.r());
    Ok(-(sol.p_inverse()? * inner))
}

/// `max |K - K_ZY| / max |K|`.
pub fn equivalence_residual(sol: &MtlsSolution) -> Result<f64> {
    let k = jacobian_new(sol)?;
    let kzy = jacobian_zy(sol)?;
    Ok((&k.k - &kzy.k).amax() / k.max_abs())
}
