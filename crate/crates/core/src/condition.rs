//! Normwise, mixed and componentwise condition numbers of the MTLS solution.
//!
//! Every compact form below equals `‖K‖₂` in exact arithmetic; the Kronecker-
//! structured `K` itself is only formed on request (`kappa_full`, exact mixed /
//! componentwise values) and only below the dense cap.

use std::collections::BTreeMap;

use nalgebra::Cholesky;
use serde::Serialize;

use crate::kernels::{self, Matrix, PartitionedFactorization, Vector};
use crate::perturbation::jacobian_new;
use crate::solver::MtlsSolution;
use crate::{MtlsError, Result};

/// `P⁻¹ = (AᵀA - σ̃²W)⁻¹` from the QR blocks:
///
/// ```text
/// P⁻¹ = [ (R11ᵀR11)⁻¹ + E S⁻¹ Eᵀ   -E S⁻¹ ]     E = R11⁻¹ R12
///       [ -S⁻¹ Eᵀ                  S⁻¹   ]     S = R22ᵀR22 - σ̃² I
/// ```
pub fn p_inverse_block(fact: &PartitionedFactorization, sigma2: f64) -> Result<Matrix> {
    let (n1, n2) = (fact.n1(), fact.n2());
    let n = n1 + n2;

    let s_inv = if n2 > 0 {
        let r22 = fact.r22();
        let mut s = r22.tr_mul(&r22);
        for i in 0..n2 {
            s[(i, i)] -= sigma2;
        }
        let chol = Cholesky::new(s).ok_or(MtlsError::NonGeneric { gap: 0.0, tol: 0.0 })?;
        let mut s_inv = chol.inverse();
        symmetrize(&mut s_inv);
        s_inv
    } else {
        Matrix::zeros(0, 0)
    };
    if n1 == 0 {
        return Ok(s_inv);
    }

    let r11 = fact.r11();
    let r11_inv = kernels::solve_upper(&r11, &Matrix::identity(n1, n1))?;
    let e = &r11_inv * fact.r12();
    let e_s = &e * &s_inv;

    let mut out = Matrix::zeros(n, n);
    let top_left = &r11_inv * r11_inv.transpose() + &e_s * e.transpose();
    out.view_mut((0, 0), (n1, n1)).copy_from(&top_left);
    out.view_mut((0, n1), (n1, n2)).copy_from(&(-&e_s));
    out.view_mut((n1, 0), (n2, n1)).copy_from(&(-e_s.transpose()));
    out.view_mut((n1, n1), (n2, n2)).copy_from(&s_inv);
    symmetrize(&mut out);
    Ok(out)
}

fn symmetrize(m: &mut Matrix) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

/// Scalars shared by the compact formulas.
struct Parts<'a> {
    sol: &'a MtlsSolution,
    p_inv: &'a Matrix,
    x_norm: f64,
    r_norm: f64,
    rr: f64,
    gamma: f64,
    gamma_bar: f64,
    s2: f64,
    wx: Vector,
}

impl<'a> Parts<'a> {
    fn new(sol: &'a MtlsSolution) -> Result<Self> {
        let r_norm = sol.r().norm();
        if r_norm == 0.0 {
            return Err(MtlsError::ConsistentSystem { residual: 0.0, tol: 0.0 });
        }
        let x = sol.x();
        let w = sol.weights();
        Ok(Parts {
            sol,
            p_inv: sol.p_inverse()?,
            x_norm: x.norm(),
            r_norm,
            rr: r_norm * r_norm,
            gamma: 1.0 + x.norm_squared(),
            gamma_bar: 1.0 + w.quad(x),
            // with n2 = 0, Wx = 0 and σ̃² = ‖r‖², so ‖r‖² = σ̃²γ̄ still holds
            s2: sol.sigma2(),
            wx: w.apply(x),
        })
    }

    fn ata(&self) -> Matrix {
        let a = self.sol.problem().a();
        a.tr_mul(a)
    }

    /// `sqrt(‖P⁻¹ M P⁻¹‖₂)` for symmetric `M`.
    fn sandwich_norm(&self, m: &Matrix) -> Result<f64> {
        let inner = self.p_inv * m * self.p_inv;
        Ok(kernels::spectral_norm(&inner, self.sol.config())?.sqrt())
    }

    /// `‖r‖ I - σ̃² W x xᵀ / ‖r‖`, the trailing block of the factored forms.
    fn trailing_block(&self) -> Matrix {
        let n = self.wx.len();
        let mut out = Matrix::identity(n, n) * self.r_norm;
        out.ger(-self.s2 / self.r_norm, &self.wx, self.sol.x(), 1.0);
        out
    }

    fn rect_norm(&self, blocks: &[Matrix]) -> Result<f64> {
        let n = self.wx.len();
        let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
        let mut z = Matrix::zeros(n, cols);
        let mut at = 0;
        for b in blocks {
            z.view_mut((0, at), b.shape()).copy_from(b);
            at += b.ncols();
        }
        kernels::spectral_norm(&(self.p_inv * z), self.sol.config())
    }
}

/// `κ₁ = ‖P⁻¹(γAᵀA - Aᵀr xᵀ - x rᵀA + ‖r‖² I)P⁻¹‖₂^{1/2}`.
pub fn kappa1(sol: &MtlsSolution) -> Result<f64> {
    let p = Parts::new(sol)?;
    let atr = sol.problem().a().tr_mul(sol.r());
    let n = atr.len();
    let mut m = p.ata() * p.gamma + Matrix::identity(n, n) * p.rr;
    m.ger(-1.0, &atr, sol.x(), 1.0);
    m.ger(-1.0, sol.x(), &atr, 1.0);
    p.sandwich_norm(&m)
}

/// `κ₂ = γ^{1/2} ‖P⁻¹(AᵀA + γ⁻¹σ̃²γ̄(I - (Wxxᵀ + xxᵀW)/γ̄))P⁻¹‖₂^{1/2}`.
pub fn kappa2(sol: &MtlsSolution) -> Result<f64> {
    let p = Parts::new(sol)?;
    let n = p.wx.len();
    let mut corr = Matrix::identity(n, n);
    corr.ger(-1.0 / p.gamma_bar, &p.wx, sol.x(), 1.0);
    corr.ger(-1.0 / p.gamma_bar, sol.x(), &p.wx, 1.0);
    let m = p.ata() + corr * (p.s2 * p.gamma_bar / p.gamma);
    Ok(p.gamma.sqrt() * p.sandwich_norm(&m)?)
}

/// `κ₃ = ‖P⁻¹[Aᵀ, ‖x‖(Aᵀ - σ̃² W x rᵀ/‖r‖²), ‖r‖I - σ̃² W x xᵀ/‖r‖]‖₂`.
pub fn kappa3(sol: &MtlsSolution) -> Result<f64> {
    let p = Parts::new(sol)?;
    let at = sol.problem().a().transpose();
    let mut mid = &at * p.x_norm;
    mid.ger(-p.x_norm * p.s2 / p.rr, &p.wx, sol.r(), 1.0);
    p.rect_norm(&[at, mid, p.trailing_block()])
}

/// `κ₄` with the branch `β = -1 + sqrt(1 + ‖x‖²)`.
pub fn kappa4(sol: &MtlsSolution) -> Result<f64> {
    let beta = -1.0 + (1.0 + sol.x().norm_squared()).sqrt();
    kappa4_with_beta(sol, beta)
}

/// `κ₄ = ‖P⁻¹[(1+β)Aᵀ - β σ̃² W x rᵀ/‖r‖², ‖r‖I - σ̃² W x xᵀ/‖r‖]‖₂`
/// for either root `β = -1 ± sqrt(1 + ‖x‖²)`.
pub fn kappa4_with_beta(sol: &MtlsSolution, beta: f64) -> Result<f64> {
    let p = Parts::new(sol)?;
    let mut first = sol.problem().a().transpose() * (1.0 + beta);
    first.ger(-beta * p.s2 / p.rr, &p.wx, sol.r(), 1.0);
    p.rect_norm(&[first, p.trailing_block()])
}

/// The closed form of `‖K_ZY‖₂` with the `2 W x xᵀ W` correction term.
/// Reported for comparison; it is not an identity for `‖K‖₂`.
pub fn kappa_zy28(sol: &MtlsSolution) -> Result<f64> {
    let p = Parts::new(sol)?;
    let n = p.wx.len();
    let mut corr = Matrix::identity(n, n);
    corr.ger(-2.0 / p.gamma_bar, &p.wx, &p.wx, 1.0);
    let m = p.ata() + corr * (p.s2 * p.gamma_bar / p.gamma);
    Ok(p.gamma.sqrt() * p.sandwich_norm(&m)?)
}

/// `‖P⁻¹(γAᵀA - σ̃²Wxxᵀ - σ̃²xxᵀW + ‖r‖²I)P⁻¹‖₂^{1/2}`, re-derived from `K_ZY`.
pub fn kappa_zy_new(sol: &MtlsSolution) -> Result<f64> {
    let p = Parts::new(sol)?;
    let n = p.wx.len();
    let mut m = p.ata() * p.gamma + Matrix::identity(n, n) * p.rr;
    m.ger(-p.s2, &p.wx, sol.x(), 1.0);
    m.ger(-p.s2, sol.x(), &p.wx, 1.0);
    p.sandwich_norm(&m)
}

/// `‖K‖₂ ‖[A, b]‖_F / ‖x‖₂` from the explicit Jacobian.
pub fn kappa_full(sol: &MtlsSolution) -> Result<f64> {
    Ok(kappa_full_abs(sol)? * relative_scale(sol))
}

/// `‖K‖₂` from the explicit Jacobian.
pub fn kappa_full_abs(sol: &MtlsSolution) -> Result<f64> {
    let k = jacobian_new(sol)?;
    // ‖K‖₂ = ‖K Kᵀ‖₂^{1/2}; the Gram matrix is n x n instead of n x m(n+1).
    let gram = k.matrix() * k.matrix().transpose();
    Ok(kernels::spectral_norm(&gram, sol.config())?.sqrt())
}

/// `‖[A, b]‖_F / ‖x‖₂`, turning an absolute normwise condition number into a relative one.
pub fn relative_scale(sol: &MtlsSolution) -> f64 {
    let p = sol.problem();
    (p.a().norm_squared() + p.b().norm_squared()).sqrt() / sol.x().norm()
}

/// Coefficients of the first-order bound
/// `‖Δx‖/‖x‖ ≲ κ_b ‖Δb‖/‖b‖ + κ_A ‖ΔA‖₂/‖A‖₂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerturbationBound {
    pub kappa_a: f64,
    pub kappa_b: f64,
    pub a_norm: f64,
    pub b_norm: f64,
}

impl PerturbationBound {
    pub fn new(sol: &MtlsSolution) -> Result<Self> {
        let cfg = sol.config();
        let p_inv = sol.p_inverse()?;
        let a = sol.problem().a();
        let p_inv_at = p_inv * a.transpose();
        let p_inv_at_norm = kernels::spectral_norm(&p_inv_at, cfg)?;
        let p_inv_norm = kernels::spectral_norm(p_inv, cfg)?;
        let a_norm = kernels::spectral_norm(a, cfg)?;
        let b_norm = sol.problem().b().norm();
        let x_norm = sol.x().norm();
        let r_norm = sol.r().norm();
        Ok(PerturbationBound {
            kappa_b: b_norm / x_norm * p_inv_at_norm,
            kappa_a: a_norm / x_norm * (r_norm * p_inv_norm + x_norm * p_inv_at_norm),
            a_norm,
            b_norm,
        })
    }

    /// Bound for perturbations with `‖ΔA‖₂ = da_norm`, `‖Δb‖₂ = db_norm`.
    pub fn bound(&self, da_norm: f64, db_norm: f64) -> f64 {
        self.kappa_b * db_norm / self.b_norm + self.kappa_a * da_norm / self.a_norm
    }
}

pub fn perturbation_bound(sol: &MtlsSolution, da_norm: f64, db_norm: f64) -> Result<f64> {
    Ok(PerturbationBound::new(sol)?.bound(da_norm, db_norm))
}

/// Mixed and componentwise values derived from one sensitivity vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MixedComponentwise {
    pub mixed: f64,
    /// Largest finite ratio; see `compw_infinite`.
    pub compw: f64,
    /// Some `x_i = 0` with a nonzero numerator, so `c = ∞`.
    pub compw_infinite: bool,
}

impl MixedComponentwise {
    /// `m = ‖s‖_∞/‖x‖_∞` and `c = ‖s / |x|‖_∞` with `ξ/0 = 0` if `ξ = 0`, else `∞`.
    pub fn from_sensitivity(s: &Vector, x: &Vector) -> Self {
        let mixed = kernels::inf_norm(s) / kernels::inf_norm(x);
        let mut compw = 0.0_f64;
        let mut compw_infinite = false;
        for (si, xi) in s.iter().zip(x.iter()) {
            if *xi == 0.0 {
                if *si != 0.0 {
                    compw_infinite = true;
                }
            } else {
                compw = compw.max(si.abs() / xi.abs());
            }
        }
        MixedComponentwise { mixed, compw, compw_infinite }
    }

    /// `c` as a float, `∞` when flagged.
    pub fn compw_value(&self) -> f64 {
        if self.compw_infinite {
            f64::INFINITY
        } else {
            self.compw
        }
    }
}

/// Exact `m(A, b)` and `c(A, b)` from `|K| vec([|A|, |b|])`.
pub fn mixed_compw_exact(sol: &MtlsSolution) -> Result<MixedComponentwise> {
    let k = jacobian_new(sol)?;
    let p = sol.problem();
    let data = kernels::vec_augmented(&kernels::abs(p.a()), &p.b().abs());
    let s = kernels::abs(k.matrix()) * data;
    Ok(MixedComponentwise::from_sensitivity(&s, sol.x()))
}

/// Kronecker-free upper bounds `mᵘ`, `cᵘ` built from
/// `|P⁻¹AᵀH₀|(|A||x| + |b|) + |P⁻¹||Aᵀ||r|`.
pub fn mixed_compw_upper(sol: &MtlsSolution) -> Result<MixedComponentwise> {
    let p = sol.problem();
    let p_inv = sol.p_inverse()?;
    let d = p_inv * sol.at_h0();
    let abs_a = kernels::abs(p.a());
    let lhs = kernels::abs(&d) * (&abs_a * sol.x().abs() + p.b().abs());
    let rhs = kernels::abs(p_inv) * (abs_a.tr_mul(&sol.r().abs()));
    Ok(MixedComponentwise::from_sensitivity(&(lhs + rhs), sol.x()))
}

/// Which optional (and more expensive) quantities to compute.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConditionOptions {
    /// Form the explicit `K` for `kappa_full` and the exact mixed/componentwise values.
    pub explicit_k: bool,
    /// Evaluate the forms that build the cross product `AᵀA` (κ₁, κ₂, and the two `K_ZY` norms).
    pub cross_product: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionFlags {
    pub used_explicit_k: bool,
    pub cross_product: bool,
    pub compw_infinite: bool,
    /// `n2 = 0`: `sigma2` is reported as `‖r‖²` by convention.
    pub sigma2_ls_convention: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    /// `‖K‖₂` via κ₄.
    pub kappa_abs: f64,
    /// `kappa_abs ‖[A, b]‖_F / ‖x‖₂`.
    pub kappa_rel: f64,
    pub kappa_variants: BTreeMap<String, f64>,
    #[serde(rename = "kappa_A")]
    pub kappa_a: f64,
    pub kappa_b: f64,
    pub mixed: Option<f64>,
    pub compw: Option<f64>,
    pub mixed_upper: f64,
    pub compw_upper: f64,
    pub flags: ConditionFlags,
}

pub fn condition_report(sol: &MtlsSolution, opts: ConditionOptions) -> Result<ConditionReport> {
    let mut variants = BTreeMap::new();
    let k4 = kappa4(sol)?;
    variants.insert("k4".to_string(), k4);
    variants.insert("k3".to_string(), kappa3(sol)?);
    if opts.cross_product {
        variants.insert("k1".to_string(), kappa1(sol)?);
        variants.insert("k2".to_string(), kappa2(sol)?);
        variants.insert("k_zy28".to_string(), kappa_zy28(sol)?);
        variants.insert("k_zy_new".to_string(), kappa_zy_new(sol)?);
    }
    let bound = PerturbationBound::new(sol)?;
    let upper = mixed_compw_upper(sol)?;
    let mut compw_infinite = upper.compw_infinite;

    let (mixed, compw) = if opts.explicit_k {
        variants.insert("k_full".to_string(), kappa_full_abs(sol)?);
        let exact = mixed_compw_exact(sol)?;
        compw_infinite |= exact.compw_infinite;
        (Some(exact.mixed), Some(exact.compw))
    } else {
        (None, None)
    };

    Ok(ConditionReport {
        kappa_abs: k4,
        kappa_rel: k4 * relative_scale(sol),
        kappa_variants: variants,
        kappa_a: bound.kappa_a,
        kappa_b: bound.kappa_b,
        mixed,
        compw,
        mixed_upper: upper.mixed,
        compw_upper: upper.compw,
        flags: ConditionFlags {
            used_explicit_k: opts.explicit_k,
            cross_product: opts.cross_product,
            compw_infinite,
            sigma2_ls_convention: sol.problem().n2() == 0,
        },
    })
}
