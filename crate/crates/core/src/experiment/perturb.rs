//! Random entrywise perturbations and the measures `ε₁`, `ε₂` (and their structured variants).

use serde::Serialize;

use super::rng::ExperimentRng;
use crate::kernels::{Matrix, Vector};
use crate::structured::StructureBasis;
use crate::MtlsProblem;

/// `dA = ε U ⊙ A`, `db = ε u ⊙ b` with `U`, `u` uniform `[0, 1)`.
/// Columns flagged in `exact_cols` are left unperturbed.
pub fn perturb_entrywise(problem: &MtlsProblem, epsilon: f64, seed: u64, exact_cols: &[usize]) -> (Matrix, Vector) {
    let mut rng = ExperimentRng::new(seed);
    let (m, n) = (problem.m(), problem.n());
    let u = rng.rand_matrix(m, n + 1);
    let mut da = u.columns(0, n).component_mul(problem.a()) * epsilon;
    let db = u.column(n).component_mul(problem.b()) * epsilon;
    for &j in exact_cols {
        if j < n {
            da.column_mut(j).fill(0.0);
        }
    }
    (da, db)
}

/// Structured perturbation `Δα = ε g ⊙ α`, `Δb = ε h ⊙ b` with standard normal
/// `g`, `h`; parameters listed in `exact_params` stay fixed.
pub fn perturb_structured(
    basis: &StructureBasis,
    b: &Vector,
    epsilon: f64,
    seed: u64,
    exact_params: &[usize],
) -> (Vector, Vector) {
    let mut rng = ExperimentRng::new(seed);
    let mut dalpha = rng.randn_vector(basis.q()).component_mul(basis.alpha()) * epsilon;
    let db = rng.randn_vector(b.len()).component_mul(b) * epsilon;
    for &k in exact_params {
        if k < dalpha.len() {
            dalpha[k] = 0.0;
        }
    }
    (dalpha, db)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpsMeasures {
    /// `‖[dA, db]‖_F / ‖[A, b]‖_F`
    pub eps1: f64,
    /// `min{ε : |dA| <= ε|A|, |db| <= ε|b|}`, over finite ratios.
    pub eps2: f64,
    /// Some perturbed entry sits on a zero of the data, so `ε₂ = ∞`.
    pub eps2_infinite: bool,
    pub eps1_s: Option<f64>,
    pub eps2_s: Option<f64>,
}

/// Largest `|d_i| / |v_i|`, with `0/0 = 0`; the flag reports a nonzero `d_i` over a zero `v_i`.
fn max_ratio<'a>(pairs: impl Iterator<Item = (&'a f64, &'a f64)>) -> (f64, bool) {
    let mut best = 0.0_f64;
    let mut infinite = false;
    for (d, v) in pairs {
        if *v == 0.0 {
            infinite |= *d != 0.0;
        } else {
            best = best.max(d.abs() / v.abs());
        }
    }
    (best, infinite)
}

/// `ε₁`, `ε₂` for `[dA, db]`, and `ε₁ˢ`, `ε₂ˢ` over `[α; b]` when `structured = Some((α, dα))`.
pub fn eps_measures(
    a: &Matrix,
    b: &Vector,
    da: &Matrix,
    db: &Vector,
    structured: Option<(&Vector, &Vector)>,
) -> EpsMeasures {
    let eps1 = ((da.norm_squared() + db.norm_squared()) / (a.norm_squared() + b.norm_squared())).sqrt();
    let (ra, ia) = max_ratio(da.iter().zip(a.iter()));
    let (rb, ib) = max_ratio(db.iter().zip(b.iter()));
    let (eps1_s, eps2_s) = match structured {
        Some((alpha, dalpha)) => {
            let e1 = ((dalpha.norm_squared() + db.norm_squared()) / (alpha.norm_squared() + b.norm_squared())).sqrt();
            let (r_alpha, _) = max_ratio(dalpha.iter().zip(alpha.iter()));
            (Some(e1), Some(r_alpha.max(rb)))
        }
        None => (None, None),
    };
    EpsMeasures { eps1, eps2: ra.max(rb), eps2_infinite: ia || ib, eps1_s, eps2_s }
}
