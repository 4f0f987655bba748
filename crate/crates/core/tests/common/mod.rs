#![allow(dead_code)]

use mtls_core::experiment::ExperimentRng;
use mtls_core::solver::genericity_gap;
use mtls_core::{Matrix, MtlsProblem, Vector};

/// Gaussian `[A, b]` with the requested shape; redraws until the genericity gap is at least `min_gap`.
pub fn random_problem(seed: u64, m: usize, n: usize, n1: usize, min_gap: f64) -> MtlsProblem {
    for stream in 0.. {
        let mut rng = ExperimentRng::derived(seed, stream);
        let a = rng.randn_matrix(m, n);
        let b = rng.randn_vector(m);
        let p = MtlsProblem::new(a, b, n1).unwrap();
        if genericity_gap(&p).map(|g| g >= min_gap).unwrap_or(false) {
            return p;
        }
    }
    unreachable!()
}

/// Shape drawn from the seed: `1 <= n <= max_n`, `n < m <= max_m`, `0 <= n1 <= n`.
pub fn random_shape(seed: u64, max_m: usize, max_n: usize) -> (usize, usize, usize) {
    assert!(max_m > max_n);
    let mut rng = ExperimentRng::derived(seed, 1 << 40);
    let mut pick = |k: usize| ((rng.rand() * k as f64) as usize).min(k - 1);
    let n = 1 + pick(max_n);
    let m = n + 1 + pick(max_m - n);
    let n1 = pick(n + 1);
    (m, n, n1)
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

pub fn rel_diff_vec(a: &Vector, b: &Vector) -> f64 {
    (a - b).norm() / a.norm().max(b.norm())
}

pub fn rel_diff_mat(a: &Matrix, b: &Matrix) -> f64 {
    (a - b).norm() / a.norm().max(b.norm())
}
