//! Finite-difference reference for the solution Jacobian.

use crate::kernels::Matrix;
use crate::{solve_with, Config, MtlsError, MtlsProblem, Result};

/// Central differences of `vec([A, b]) ↦ x`, one column per data entry, with
/// step `h · max(1, |entry|)`. Columns follow the `vec([A, b])` layout.
pub fn finite_difference_jacobian(problem: &MtlsProblem, h: f64, cfg: &Config) -> Result<Matrix> {
    if !(h > 0.0) {
        return Err(MtlsError::dim("finite-difference step must be positive"));
    }
    let (m, n) = (problem.m(), problem.n());
    let cols = m * (n + 1);
    cfg.check_dense(n, cols)?;
    let mut out = Matrix::zeros(n, cols);
    let mut a = problem.a().clone();
    let mut b = problem.b().clone();
    for col in 0..cols {
        let (j, i) = (col / m, col % m);
        let entry = if j < n { a[(i, j)] } else { b[i] };
        let step = h * entry.abs().max(1.0);
        let mut eval = |value: f64| -> Result<_> {
            set_entry(&mut a, &mut b, i, j, value);
            let p = MtlsProblem::new(a.clone(), b.clone(), problem.n1())?;
            Ok(solve_with(&p, cfg)?.x().clone())
        };
        let plus = eval(entry + step)?;
        let minus = eval(entry - step)?;
        set_entry(&mut a, &mut b, i, j, entry);
        out.set_column(col, &((plus - minus) / (2.0 * step)));
    }
    Ok(out)
}

fn set_entry(a: &mut Matrix, b: &mut crate::Vector, i: usize, j: usize, value: f64) {
    if j < a.ncols() {
        a[(i, j)] = value;
    } else {
        b[i] = value;
    }
}
