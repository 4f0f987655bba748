//! Single perturbation trials: re-solve a perturbed problem and compare the
//! observed change with first-order predictions and condition-number bounds.

use std::collections::BTreeMap;

use serde::Serialize;

use super::perturb::{eps_measures, perturb_entrywise, perturb_structured};
use crate::condition::{self, MixedComponentwise, PerturbationBound};
use crate::kernels::{self, Vector};
use crate::perturbation::{jacobian_new, jacobian_zy};
use crate::structured::{structured_condition_numbers, StructureBasis, StructuredReport};
use crate::{solve_with, Config, MtlsError, MtlsProblem, MtlsSolution, Result};

/// Which observed error a bound column is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// `‖Δx‖₂ / ‖x‖₂`
    Normwise,
    /// `‖Δx‖_∞ / ‖x‖_∞`
    Mixed,
    /// `‖Δx / x‖_∞`
    Componentwise,
}

/// Every bound column the harness can emit, with the error it must dominate.
pub const BOUND_COLUMNS: &[(&str, ErrorKind)] = &[
    ("eps1_kappa0", ErrorKind::Normwise),
    ("eps1_kappa4", ErrorKind::Normwise),
    ("bound_perturbation", ErrorKind::Normwise),
    ("eps1s_kappas", ErrorKind::Normwise),
    ("eps2_m", ErrorKind::Mixed),
    ("eps2_mu", ErrorKind::Mixed),
    ("eps2s_ms", ErrorKind::Mixed),
    ("eps2_c", ErrorKind::Componentwise),
    ("eps2_cu", ErrorKind::Componentwise),
    ("eps2s_cs", ErrorKind::Componentwise),
];

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct TrialRecord {
    pub seed: u64,
    pub epsilon: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub eps1_s: Option<f64>,
    pub eps2_s: Option<f64>,
    pub dx_norm: f64,
    pub dx_rel_2: f64,
    pub dx_rel_inf: f64,
    pub dx_compw: f64,
    pub eta_new: Option<f64>,
    pub eta_zy: Option<f64>,
    /// Absolute normwise condition numbers by formula.
    pub kappas: BTreeMap<String, f64>,
    /// Finite bound values keyed by the names in [`BOUND_COLUMNS`].
    pub bounds: BTreeMap<String, f64>,
    /// Bounds that were infinite (zero data entries) and therefore omitted.
    pub infinite_bounds: Vec<String>,
}

impl TrialRecord {
    pub fn error(&self, kind: ErrorKind) -> f64 {
        match kind {
            ErrorKind::Normwise => self.dx_rel_2,
            ErrorKind::Mixed => self.dx_rel_inf,
            ErrorKind::Componentwise => self.dx_compw,
        }
    }

    /// Bound columns that fall below their paired observed error.
    pub fn violations(&self) -> Vec<String> {
        BOUND_COLUMNS
            .iter()
            .filter_map(|(name, kind)| {
                let bound = *self.bounds.get(*name)?;
                let err = self.error(*kind);
                (bound < err).then(|| format!("{name}: bound {bound:.3e} < error {err:.3e}"))
            })
            .collect()
    }
}

/// `‖Δx / x‖_∞` with `0/0 = 0` and `ξ/0 = ∞`.
fn componentwise_error(dx: &Vector, x: &Vector) -> f64 {
    let mut out = 0.0_f64;
    for (d, xi) in dx.iter().zip(x.iter()) {
        if *xi == 0.0 {
            if *d != 0.0 {
                return f64::INFINITY;
            }
        } else {
            out = out.max(d.abs() / xi.abs());
        }
    }
    out
}

struct Observed {
    dx: Vector,
    dx_rel_2: f64,
    dx_rel_inf: f64,
    dx_compw: f64,
}

fn observe(base: &MtlsSolution, perturbed: &MtlsSolution) -> Observed {
    let x = base.x();
    let dx = perturbed.x() - x;
    Observed {
        dx_rel_2: dx.norm() / x.norm(),
        dx_rel_inf: kernels::inf_norm(&dx) / kernels::inf_norm(x),
        dx_compw: componentwise_error(&dx, x),
        dx,
    }
}

/// One first-order trial: entrywise perturbation `ε U ⊙ [A, b]` of every entry,
/// the residuals `η = ‖Δx - K vec([ΔA, Δb])‖₂` for both Jacobians, and the five
/// normwise columns (`‖K_ZY‖₂`, the `K_ZY` closed form, `‖K‖₂`, κ₂, κ₄).
pub fn run_first_order_trial(problem: &MtlsProblem, epsilon: f64, seed: u64, cfg: &Config) -> Result<TrialRecord> {
    let base = solve_with(problem, cfg)?;
    let (da, db) = perturb_entrywise(problem, epsilon, seed, &[]);
    let hat = solve_with(&problem.perturbed(&da, &db)?, cfg)?;
    let obs = observe(&base, &hat);

    let k = jacobian_new(&base)?;
    let kzy = jacobian_zy(&base)?;
    let v = kernels::vec_augmented(&da, &db);
    let eta_new = (&obs.dx - k.matrix() * &v).norm();
    let eta_zy = (&obs.dx - kzy.matrix() * &v).norm();

    let gram_norm = |m: &crate::Matrix| -> Result<f64> {
        Ok(kernels::spectral_norm(&(m * m.transpose()), cfg)?.sqrt())
    };
    let mut kappas = BTreeMap::new();
    kappas.insert("kzy_explicit".into(), gram_norm(kzy.matrix())?);
    kappas.insert("k_zy28".into(), condition::kappa_zy28(&base)?);
    kappas.insert("k_full".into(), gram_norm(k.matrix())?);
    kappas.insert("k2".into(), condition::kappa2(&base)?);
    kappas.insert("k4".into(), condition::kappa4(&base)?);

    let e = eps_measures(problem.a(), problem.b(), &da, &db, None);
    Ok(TrialRecord {
        seed,
        epsilon,
        eps1: e.eps1,
        eps2: e.eps2,
        eps1_s: None,
        eps2_s: None,
        dx_norm: obs.dx.norm(),
        dx_rel_2: obs.dx_rel_2,
        dx_rel_inf: obs.dx_rel_inf,
        dx_compw: obs.dx_compw,
        eta_new: Some(eta_new),
        eta_zy: Some(eta_zy),
        kappas,
        bounds: BTreeMap::new(),
        infinite_bounds: Vec::new(),
    })
}

/// How a bound trial perturbs the data.
#[derive(Debug, Clone, Default)]
pub struct BoundTrialSpec {
    /// Columns of `A` left unperturbed (unstructured mode).
    pub exact_cols: Vec<usize>,
    /// Structured mode: perturb `[α; b]` through this basis instead.
    pub structure: Option<StructureBasis>,
    /// Structure parameters left unperturbed.
    pub exact_params: Vec<usize>,
}

/// Base-point quantities shared by all trials on one problem.
pub struct BoundAnalysis {
    pub solution: MtlsSolution,
    pub kappa4_rel: f64,
    pub kappa0_rel: Option<f64>,
    pub perturbation_bound: PerturbationBound,
    pub upper: MixedComponentwise,
    pub exact: Option<MixedComponentwise>,
    pub structured: Option<StructuredReport>,
    spec: BoundTrialSpec,
}

impl BoundAnalysis {
    /// Solves the base problem and evaluates every bound; the explicit-`K`
    /// quantities are included only when `K` fits the dense cap.
    pub fn new(problem: &MtlsProblem, spec: BoundTrialSpec, cfg: &Config) -> Result<Self> {
        let solution = solve_with(problem, cfg)?;
        let scale = condition::relative_scale(&solution);
        let kappa4_rel = condition::kappa4(&solution)? * scale;
        let perturbation_bound = PerturbationBound::new(&solution)?;
        let upper = condition::mixed_compw_upper(&solution)?;
        let (m, n) = (problem.m(), problem.n());
        let fits = n.saturating_mul(m * (n + 1)) <= cfg.dense_cap;
        let (kappa0_rel, exact) = if fits {
            (
                Some(condition::kappa_full_abs(&solution)? * scale),
                Some(condition::mixed_compw_exact(&solution)?),
            )
        } else {
            (None, None)
        };
        let structured = match &spec.structure {
            Some(basis) => Some(structured_condition_numbers(&solution, basis)?),
            None => None,
        };
        Ok(BoundAnalysis { solution, kappa4_rel, kappa0_rel, perturbation_bound, upper, exact, structured, spec })
    }

    pub fn trial(&self, epsilon: f64, seed: u64) -> Result<TrialRecord> {
        let problem = self.solution.problem();
        let cfg = self.solution.config();
        let (da, db, dalpha) = match &self.spec.structure {
            Some(basis) => {
                let (dalpha, db) = perturb_structured(basis, problem.b(), epsilon, seed, &self.spec.exact_params);
                (basis.combine(&dalpha), db, Some(dalpha))
            }
            None => {
                let (da, db) = perturb_entrywise(problem, epsilon, seed, &self.spec.exact_cols);
                (da, db, None)
            }
        };
        let hat = solve_with(&problem.perturbed(&da, &db)?, cfg)?;
        let obs = observe(&self.solution, &hat);

        let structured_pair = match (&self.spec.structure, &dalpha) {
            (Some(basis), Some(d)) => Some((basis.alpha(), d)),
            _ => None,
        };
        let e = eps_measures(problem.a(), problem.b(), &da, &db, structured_pair);

        let mut bounds = BTreeMap::new();
        let mut infinite = Vec::new();
        let mut put = |name: &str, value: f64| {
            if value.is_finite() {
                bounds.insert(name.to_string(), value);
            } else {
                infinite.push(name.to_string());
            }
        };
        put("eps1_kappa4", e.eps1 * self.kappa4_rel);
        if let Some(k0) = self.kappa0_rel {
            put("eps1_kappa0", e.eps1 * k0);
        }
        let da_norm = kernels::spectral_norm(&da, cfg)?;
        put("bound_perturbation", self.perturbation_bound.bound(da_norm, db.norm()));
        let eps2 = if e.eps2_infinite { f64::INFINITY } else { e.eps2 };
        put("eps2_mu", eps2 * self.upper.mixed);
        put("eps2_cu", eps2 * self.upper.compw_value());
        if let Some(exact) = &self.exact {
            put("eps2_m", eps2 * exact.mixed);
            put("eps2_c", eps2 * exact.compw_value());
        }
        if let (Some(s), Some(e1s), Some(e2s)) = (&self.structured, e.eps1_s, e.eps2_s) {
            put("eps1s_kappas", e1s * s.kappa_s);
            put("eps2s_ms", e2s * s.mixed_s);
            let cs = if s.compw_s_infinite { f64::INFINITY } else { s.compw_s };
            put("eps2s_cs", e2s * cs);
        }

        let mut kappas = BTreeMap::new();
        kappas.insert("k4_rel".into(), self.kappa4_rel);
        if let Some(k0) = self.kappa0_rel {
            kappas.insert("k0_rel".into(), k0);
        }
        if let Some(s) = &self.structured {
            kappas.insert("ks_rel".into(), s.kappa_s);
        }

        Ok(TrialRecord {
            seed,
            epsilon,
            eps1: e.eps1,
            eps2: e.eps2,
            eps1_s: e.eps1_s,
            eps2_s: e.eps2_s,
            dx_norm: obs.dx.norm(),
            dx_rel_2: obs.dx_rel_2,
            dx_rel_inf: obs.dx_rel_inf,
            dx_compw: obs.dx_compw,
            eta_new: None,
            eta_zy: None,
            kappas,
            bounds,
            infinite_bounds: infinite,
        })
    }
}

/// One bound trial: perturb, re-solve, and record every bound next to its
/// observed error.
pub fn run_bound_trial(
    problem: &MtlsProblem,
    epsilon: f64,
    seed: u64,
    spec: BoundTrialSpec,
    cfg: &Config,
) -> Result<TrialRecord> {
    let rec = BoundAnalysis::new(problem, spec, cfg)?.trial(epsilon, seed)?;
    debug_assert!(rec.violations().is_empty(), "bound violated: {:?}", rec.violations());
    Ok(rec)
}

/// True for the failures a table run counts as skipped trials.
pub fn is_skippable(err: &MtlsError) -> bool {
    matches!(err, MtlsError::NonGeneric { .. } | MtlsError::ConsistentSystem { .. })
}
