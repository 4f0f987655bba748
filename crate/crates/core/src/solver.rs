//! The MTLS problem, its genericity check, and the QR + SVD solve.

use std::sync::OnceLock;

use serde::Serialize;

use crate::kernels::{self, Matrix, PartitionedFactorization, Vector};
use crate::{Config, MtlsError, Result};

/// `A x ≈ b` where the first `n1` columns of `A` are known exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct MtlsProblem {
    a: Matrix,
    b: Vector,
    n1: usize,
}

impl MtlsProblem {
    pub fn new(a: Matrix, b: Vector, n1: usize) -> Result<Self> {
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
        Ok(MtlsProblem { a, b, n1 })
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }
    pub fn b(&self) -> &Vector {
        &self.b
    }
    pub fn m(&self) -> usize {
        self.a.nrows()
    }
    pub fn n(&self) -> usize {
        self.a.ncols()
    }
    pub fn n1(&self) -> usize {
        self.n1
    }
    pub fn n2(&self) -> usize {
        self.n() - self.n1
    }
    pub fn weights(&self) -> WeightPattern {
        WeightPattern { n1: self.n1, n2: self.n2() }
    }

    /// `[A, b]` as one `m x (n+1)` matrix.
    pub fn augmented(&self) -> Matrix {
        let mut out = Matrix::zeros(self.m(), self.n() + 1);
        out.view_mut((0, 0), self.a.shape()).copy_from(&self.a);
        out.set_column(self.n(), &self.b);
        out
    }

    /// The problem with `[A, b]` replaced by `[A + dA, b + db]`.
    pub fn perturbed(&self, da: &Matrix, db: &Vector) -> Result<Self> {
        if da.shape() != self.a.shape() || db.len() != self.b.len() {
            return Err(MtlsError::dim("perturbation shape does not match the problem"));
        }
        MtlsProblem::new(&self.a + da, &self.b + db, self.n1)
    }
}

/// `W = diag(O_{n1}, I_{n2})`, never stored densely.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct WeightPattern {
    pub n1: usize,
    pub n2: usize,
}

impl WeightPattern {
    /// `W x`: zeroes the first `n1` entries.
    pub fn apply(&self, x: &Vector) -> Vector {
        let mut out = x.clone();
        out.rows_mut(0, self.n1).fill(0.0);
        out
    }

    /// `xᵀ W x`.
    pub fn quad(&self, x: &Vector) -> f64 {
        x.rows(self.n1, self.n2).norm_squared()
    }

    pub fn to_dense(&self) -> Matrix {
        let mut d = Vector::zeros(self.n1 + self.n2);
        d.rows_mut(self.n1, self.n2).fill(1.0);
        Matrix::from_diagonal(&d)
    }
}

/// A solved MTLS problem.
#[derive(Debug)]
pub struct MtlsSolution {
    problem: MtlsProblem,
    x: Vector,
    sigma2: f64,
    r: Vector,
    gap: f64,
    fact: PartitionedFactorization,
    cfg: Config,
    p_inv: OnceLock<Matrix>,
}

impl MtlsSolution {
    pub fn problem(&self) -> &MtlsProblem {
        &self.problem
    }
    pub fn x(&self) -> &Vector {
        &self.x
    }
    /// `σ̃²_{n2+1}`; for `n2 = 0` this is `‖r‖²` (the minimum of the Rayleigh quotient with `W = 0`).
    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }
    /// Residual `r = A x - b`.
    pub fn r(&self) -> &Vector {
        &self.r
    }
    /// Genericity gap; `+∞` when `n2 = 0`.
    pub fn gap(&self) -> f64 {
        self.gap
    }
    pub fn factorization(&self) -> &PartitionedFactorization {
        &self.fact
    }
    pub fn config(&self) -> &Config {
        &self.cfg
    }
    pub fn weights(&self) -> WeightPattern {
        self.problem.weights()
    }

    /// `P⁻¹ = (AᵀA - σ̃² W)⁻¹`, assembled once from the QR blocks and cached.
    pub fn p_inverse(&self) -> Result<&Matrix> {
        if let Some(p) = self.p_inv.get() {
            return Ok(p);
        }
        let p = crate::condition::p_inverse_block(&self.fact, self.sigma2)?;
        let _ = self.p_inv.set(p);
        Ok(self.p_inv.get().expect("just set"))
    }

    /// `AᵀH₀ = Aᵀ - 2 (Aᵀr) rᵀ / ‖r‖²`, with the reflector applied as a rank-1 update.
    pub fn at_h0(&self) -> Matrix {
        let at = self.problem.a.transpose();
        let atr = &at * &self.r;
        let rr = self.r.norm_squared();
        let mut out = at;
        out.ger(-2.0 / rr, &atr, &self.r, 1.0);
        out
    }
}

/// `σ_{n2}(R22) - σ_{n2+1}([R22, R2b])`, or `+∞` when `n2 = 0`.
pub fn genericity_gap(problem: &MtlsProblem) -> Result<f64> {
    let cfg = Config::default();
    let fact = kernels::qr_partition(problem.a(), problem.b(), problem.n1(), &cfg)?;
    gap_from_factorization(&fact, &cfg)
}

fn gap_from_factorization(fact: &PartitionedFactorization, cfg: &Config) -> Result<f64> {
    let n2 = fact.n2();
    if n2 == 0 {
        return Ok(f64::INFINITY);
    }
    let s_block = kernels::singular_values(&fact.r2_block(), cfg)?;
    let s_last = s_block.get(n2).copied().unwrap_or(0.0);
    Ok(fact.r22_singular_values()[n2 - 1] - s_last)
}

/// `‖b - Ax‖² / (1 + xᵀWx)`.
pub fn rayleigh_quotient(problem: &MtlsProblem, x: &Vector) -> f64 {
    let r = problem.a() * x - problem.b();
    r.norm_squared() / (1.0 + problem.weights().quad(x))
}

pub fn solve(problem: &MtlsProblem) -> Result<MtlsSolution> {
    solve_with(problem, &Config::default())
}

pub fn solve_with(problem: &MtlsProblem, cfg: &Config) -> Result<MtlsSolution> {
    let fact = kernels::qr_partition(problem.a(), problem.b(), problem.n1(), cfg)?;
    let (n1, n2) = (problem.n1(), problem.n2());

    let (x2, sigma2, gap) = if n2 == 0 {
        (Vector::zeros(0), f64::NAN, f64::INFINITY)
    } else {
        // Square up [R22, R2b] so that V is complete even when m - n1 < n2 + 1.
        let block = fact.r2_block();
        let mut square = Matrix::zeros(block.nrows().max(n2 + 1), n2 + 1);
        square.view_mut((0, 0), block.shape()).copy_from(&block);
        let (s, v_all) = kernels::right_svd(&square, cfg)?;
        let s_last = s[n2];
        let tol_gap = cfg.gap_factor * f64::EPSILON * s[0];
        let gap = fact.r22_singular_values()[n2 - 1] - s_last;
        // A tie between the two trailing singular values of the block also lands here,
        // since σ_{n2}(R22) <= σ_{n2}([R22, R2b]).
        if !(gap > tol_gap) {
            return Err(MtlsError::NonGeneric { gap, tol: tol_gap });
        }
        let v = if block.is_square() {
            kernels::refine_smallest_right_vector(&block, &v_all.column(n2).into_owned(), cfg.refine_iter)
        } else {
            v_all.column(n2).into_owned()
        };
        let pivot = v[n2];
        let tol_pivot = cfg.gap_factor * f64::EPSILON;
        if pivot.abs() < tol_pivot {
            return Err(MtlsError::NonGeneric { gap: pivot.abs(), tol: tol_pivot });
        }
        let x2 = -v.rows(0, n2).into_owned() / pivot;
        (x2, s_last * s_last, gap)
    };

    let mut x = Vector::zeros(n1 + n2);
    if n1 > 0 {
        let rhs = fact.r1b() - fact.r12() * &x2;
        let x1 = kernels::solve_upper(&fact.r11(), &Matrix::from_column_slice(n1, 1, rhs.as_slice()))?;
        x.rows_mut(0, n1).copy_from(&x1.column(0));
    }
    x.rows_mut(n1, n2).copy_from(&x2);

    let r = problem.a() * &x - problem.b();
    let rnorm = r.norm();
    let tol = cfg.consistent_factor * f64::EPSILON * problem.b().norm();
    if rnorm <= tol {
        return Err(MtlsError::ConsistentSystem { residual: rnorm, tol });
    }
    let sigma2 = if n2 == 0 { rnorm * rnorm } else { sigma2 };

    Ok(MtlsSolution {
        problem: problem.clone(),
        x,
        sigma2,
        r,
        gap,
        fact,
        cfg: *cfg,
        p_inv: OnceLock::new(),
    })
}

/// `‖Aᵀr - σ̃² W x‖₂`, which vanishes at the solution.
pub fn stationarity_residual(sol: &MtlsSolution) -> f64 {
    let w_x = sol.weights().apply(&sol.x);
    (sol.problem.a().tr_mul(&sol.r) - w_x * sol.sigma2).norm()
}

/// Scale for [`stationarity_residual`]: `‖A‖₂‖r‖₂ + σ̃²‖x‖₂`.
pub fn stationarity_scale(sol: &MtlsSolution) -> Result<f64> {
    let a_norm = kernels::spectral_norm(sol.problem.a(), &sol.cfg)?;
    Ok(a_norm * sol.r.norm() + sol.sigma2 * sol.x.norm())
}

/// Relative residual of the generalized eigen-system
/// `[AᵀA, Aᵀb; bᵀA, bᵀb] [x; -1] = σ̃² diag(W, 1) [x; -1]`,
/// normalized by `‖[A, b]‖_F² ‖[x; -1]‖₂`.
pub fn eigen_system_residual(sol: &MtlsSolution) -> f64 {
    let n = sol.problem.n();
    let aug = sol.problem.augmented();
    let mut z = Vector::zeros(n + 1);
    z.rows_mut(0, n).copy_from(&sol.x);
    z[n] = -1.0;
    let lhs = aug.tr_mul(&(&aug * &z));
    let mut wz = sol.weights().apply(&sol.x).insert_row(n, -1.0);
    wz *= sol.sigma2;
    let scale = aug.norm_squared() * z.norm();
    (lhs - wz).norm() / scale
}
