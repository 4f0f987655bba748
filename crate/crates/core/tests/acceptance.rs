//! Acceptance criteria 1-6, one PASS/FAIL line each. Runs with `harness = false`.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use mtls_core::condition::{
    kappa1, kappa2, kappa3, kappa4, kappa_full_abs, kappa_zy_new, mixed_compw_exact, mixed_compw_upper,
    p_inverse_block,
};
use mtls_core::experiment::tables::{
    table3_label, TableReport, TABLE3_DELTA, TABLE3_N1, TABLE4_LAMBDA, TABLE4_M,
};
use mtls_core::experiment::{
    finite_difference_jacobian, gen_intercept, table1, table2, table3, table4, InterceptMode, TableConfig,
};
use mtls_core::perturbation::{jacobian_new, jacobian_zy};
use mtls_core::structured::k_phi_structured;
use mtls_core::{solve, Config, Matrix, MtlsProblem, Result, Vector};

struct Outcome {
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Outcome { failures: Vec::new(), notes: Vec::new() }
    }
    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(what());
        }
    }
    fn note(&mut self, s: String) {
        self.notes.push(s);
    }
    fn within(&mut self, elapsed: Duration, limit: Duration) {
        self.note(format!("{:.1}s", elapsed.as_secs_f64()));
        self.check(elapsed <= limit, || format!("took {elapsed:?}, limit {limit:?}"));
    }
}

fn rel(a: f64, b: f64) -> f64 {
    common::rel_diff(a, b)
}

fn criterion1(out: &mut Outcome) -> Result<()> {
    let start = Instant::now();
    let mut worst_kappa = 0.0_f64;
    let mut worst_k = 0.0_f64;
    for seed in 0..100 {
        let (m, n, n1) = common::random_shape(seed, 60, 30);
        let sol = solve(&common::random_problem(seed, m, n, n1, 1e-3))?;
        let k4 = kappa4(&sol)?;
        let others = [kappa1(&sol)?, kappa2(&sol)?, kappa3(&sol)?, kappa_full_abs(&sol)?, kappa_zy_new(&sol)?];
        let spread = others.iter().map(|k| rel(*k, k4)).fold(0.0, f64::max);
        worst_kappa = worst_kappa.max(spread);
        out.check(spread <= 1e-8, || format!("seed {seed} ({m}x{n}, n1={n1}): kappa spread {spread:.2e}"));

        let k = jacobian_new(&sol)?;
        let kzy = jacobian_zy(&sol)?;
        let diff = (k.matrix() - kzy.matrix()).amax() / k.max_abs();
        worst_k = worst_k.max(diff);
        out.check(diff <= 1e-12, || format!("seed {seed}: max|K - K_ZY| / max|K| = {diff:.2e}"));
    }
    out.note(format!("max kappa rtol {worst_kappa:.1e}, max K diff {worst_k:.1e}"));
    out.within(start.elapsed(), Duration::from_secs(60));
    Ok(())
}

fn criterion2(out: &mut Outcome) -> Result<()> {
    let report = table1(&TableConfig::default())?;
    let slope = report.slope.unwrap_or(f64::NAN);
    out.note(format!("slope {slope:.3}"));
    out.check((1.8..=2.2).contains(&slope), || format!("slope {slope}"));
    out.check(report.passed(), || format!("{} of {} trials skipped", report.skipped, report.total));
    let mut worst = 0.0_f64;
    for lr in &report.records {
        match (lr.record.eta_new, lr.record.eta_zy) {
            (Some(a), Some(b)) => worst = worst.max(rel(a, b)),
            _ => out.check(false, || format!("{} seed {}: missing eta", lr.row, lr.record.seed)),
        }
    }
    out.note(format!("eta rtol {worst:.1e}"));
    out.check(worst <= 1e-8, || format!("eta_new vs eta_zy rtol {worst:.2e}"));
    Ok(())
}

fn criterion3(out: &mut Outcome) -> Result<()> {
    let cfg = Config::default();
    let mut worst_fd = 0.0_f64;
    let mut worst_p = 0.0_f64;
    for seed in 0..10 {
        let (m, n, n1) = common::random_shape(1000 + seed, 20, 8);
        let p = common::random_problem(1000 + seed, m, n, n1, 1e-2);
        let sol = solve(&p)?;
        let k = jacobian_new(&sol)?;
        let fd = finite_difference_jacobian(&p, 1e-6, &cfg)?;
        let e = (&fd - k.matrix()).norm() / k.matrix().norm();
        worst_fd = worst_fd.max(e);
        out.check(e <= 1e-5, || format!("seed {seed}: finite-difference error {e:.2e}"));

        let block = p_inverse_block(sol.factorization(), sol.sigma2())?;
        let dense = (p.a().tr_mul(p.a()) - sol.weights().to_dense() * sol.sigma2())
            .try_inverse()
            .expect("P is invertible on generic problems");
        let e = common::rel_diff_mat(&block, &dense);
        worst_p = worst_p.max(e);
        out.check(e <= 1e-9, || format!("seed {seed}: block P inverse rtol {e:.2e}"));
    }
    let mut worst_phi = 0.0_f64;
    for (m, omega, seed) in [(6, 1, 0), (11, 2, 1), (16, 3, 2), (40, 8, 3)] {
        let (p, basis) = gen_intercept(m, InterceptMode::Toeplitz { omega, lambda: 1e-2 }, seed)?;
        let basis = basis.expect("Toeplitz mode returns a basis");
        let sol = solve(&p)?;
        let explicit = jacobian_new(&sol)?.matrix() * basis.phi_ab();
        let e = common::rel_diff_mat(&k_phi_structured(&sol, &basis)?, &explicit);
        worst_phi = worst_phi.max(e);
        out.check(e <= 1e-11, || format!("m={m}: K Phi rtol {e:.2e}"));
    }
    out.note(format!("fd {worst_fd:.1e}, P^-1 {worst_p:.1e}, K Phi {worst_phi:.1e}"));
    Ok(())
}

fn table_summary(out: &mut Outcome, report: &TableReport, tag: &str) {
    out.note(format!("{tag}: {} trials, {} skipped", report.total, report.skipped));
    out.check(report.skipped * 20 <= report.total, || format!("{tag}: {} of {} skipped", report.skipped, report.total));
    for v in &report.violations {
        out.check(false, || format!("{tag}: {v}"));
    }
}

fn criterion4(out: &mut Outcome, t3: &TableReport, t4: &TableReport, shared_time: Duration) -> Result<()> {
    let start = Instant::now();
    let t2 = table2(&TableConfig::default())?;
    table_summary(out, &t2, "table2");
    table_summary(out, t3, "table3");
    table_summary(out, t4, "table4");
    for lr in t2.records.iter().chain(&t3.records).chain(&t4.records) {
        let b = &lr.record.bounds;
        for (exact, upper) in [("eps2_m", "eps2_mu"), ("eps2_c", "eps2_cu")] {
            if let (Some(e), Some(u)) = (b.get(exact), b.get(upper)) {
                out.check(*e <= *u * (1.0 + 1e-12), || format!("{}: {exact} {e:.3e} > {upper} {u:.3e}", lr.row));
            }
        }
    }
    // m <= mᵘ and c <= cᵘ on small instances where K fits
    for seed in 0..20 {
        let (m, n, n1) = common::random_shape(2000 + seed, 40, 15);
        let sol = solve(&common::random_problem(2000 + seed, m, n, n1, 1e-3))?;
        let (e, u) = (mixed_compw_exact(&sol)?, mixed_compw_upper(&sol)?);
        out.check(e.mixed <= u.mixed * (1.0 + 1e-12), || format!("seed {seed}: m > mu"));
        out.check(e.compw_value() <= u.compw_value() * (1.0 + 1e-12), || format!("seed {seed}: c > cu"));
    }
    out.within(start.elapsed() + shared_time, Duration::from_secs(600));
    Ok(())
}

fn criterion5(out: &mut Outcome) -> Result<()> {
    let tls = solve(&MtlsProblem::new(
        Matrix::from_column_slice(2, 1, &[2.0, 0.0]),
        Vector::from_vec(vec![1.0, 1.0]),
        0,
    )?)?;
    let x_tls = tls.x()[0];
    out.check((x_tls - (5f64.sqrt() - 1.0) / 2.0).abs() <= 1e-12, || format!("TLS x = {x_tls:.17e}"));
    out.check((tls.sigma2() - (3.0 - 5f64.sqrt())).abs() <= 1e-12, || format!("TLS sigma2 = {:.17e}", tls.sigma2()));

    let ls = solve(&MtlsProblem::new(
        Matrix::from_column_slice(2, 1, &[1.0, 1.0]),
        Vector::from_vec(vec![1.0, 3.0]),
        1,
    )?)?;
    out.check((ls.x()[0] - 2.0).abs() <= 1e-12, || format!("LS x = {:.17e}", ls.x()[0]));

    let dec = solve(&MtlsProblem::new(
        Matrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]),
        Vector::from_vec(vec![1.0, 0.0, 0.5]),
        1,
    )?)?;
    let dx = (dec.x() - Vector::from_vec(vec![1.0, 0.0])).amax();
    out.check(dx <= 1e-12, || format!("decoupled x = {:?}", dec.x().as_slice()));
    out.check((dec.sigma2().sqrt() - 0.5).abs() <= 1e-12, || format!("decoupled sigma = {:.17e}", dec.sigma2().sqrt()));
    Ok(())
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len() / 2;
    if v.len() % 2 == 1 { v[k] } else { 0.5 * (v[k - 1] + v[k]) }
}

fn row_ratio(report: &TableReport, label: &str, bound: &str, err: impl Fn(&mtls_core::experiment::TrialRecord) -> f64) -> f64 {
    median(report.row_records(label).filter_map(|r| Some(r.bounds.get(bound)? / err(r))).collect())
}

fn criterion6(out: &mut Outcome, t3: &TableReport, t4: &TableReport) -> Result<()> {
    for n1 in TABLE3_N1 {
        let normwise: Vec<f64> =
            TABLE3_DELTA.iter().map(|&d| row_ratio(t3, &table3_label(d, n1), "eps1_kappa4", |r| r.dx_rel_2)).collect();
        let mixed: Vec<f64> =
            TABLE3_DELTA.iter().map(|&d| row_ratio(t3, &table3_label(d, n1), "eps2_mu", |r| r.dx_rel_inf)).collect();
        let growth = normwise[normwise.len() - 1] / normwise[0];
        let spread = mixed.iter().cloned().fold(0.0, f64::max) / mixed.iter().cloned().fold(f64::INFINITY, f64::min);
        out.note(format!("n1={n1}: normwise growth {growth:.1e}, mixed spread {spread:.1}"));
        out.check(growth >= 1e3, || format!("n1={n1}: normwise ratio grows only {growth:.2e}"));
        out.check(spread <= 1e2, || format!("n1={n1}: mixed ratio spread {spread:.2e}"));
    }
    let mut rows = 0;
    for lr in &t4.records {
        let b = &lr.record.bounds;
        match (b.get("eps1s_kappas"), b.get("eps1_kappa4")) {
            (Some(s), Some(k)) => {
                rows += 1;
                out.check(s <= k, || format!("{} seed {}: eps1s_kappas {s:.3e} > eps1_kappa4 {k:.3e}", lr.row, lr.record.seed));
            }
            _ => out.check(false, || format!("{}: missing structured bound", lr.row)),
        }
    }
    let expected = TABLE4_M.len() * TABLE4_LAMBDA.len();
    out.check(t4.rows.len() == expected, || format!("table4 has {} rows, expected {expected}", t4.rows.len()));
    out.note(format!("{rows} table4 trials"));
    Ok(())
}

fn report(id: usize, name: &str, result: std::result::Result<Outcome, String>) -> bool {
    match result {
        Ok(o) if o.failures.is_empty() => {
            println!("criterion {id} ({name}): PASS [{}]", o.notes.join("; "));
            true
        }
        Ok(o) => {
            println!("criterion {id} ({name}): FAIL [{}]", o.notes.join("; "));
            for f in o.failures.iter().take(20) {
                println!("    {f}");
            }
            false
        }
        Err(e) => {
            println!("criterion {id} ({name}): FAIL [error: {e}]");
            false
        }
    }
}

fn run(f: impl FnOnce(&mut Outcome) -> Result<()>) -> std::result::Result<Outcome, String> {
    let mut o = Outcome::new();
    f(&mut o).map_err(|e| e.to_string())?;
    Ok(o)
}

fn main() -> ExitCode {
    let mut ok = true;
    ok &= report(1, "formula equivalence", run(criterion1));
    ok &= report(2, "first-order law", run(criterion2));
    ok &= report(3, "oracles", run(criterion3));

    let tc3 = TableConfig::default();
    let tc4 = TableConfig { trials: 3, ..TableConfig::default() };
    // tables 3 and 4 feed both criterion 4 and criterion 6
    let start = Instant::now();
    let tables = table3(&tc3).and_then(|t3| Ok((t3, table4(&tc4)?)));
    let shared_time = start.elapsed();
    match &tables {
        Ok((t3, t4)) => ok &= report(4, "bound domination", run(|o| criterion4(o, t3, t4, shared_time))),
        Err(e) => ok &= report(4, "bound domination", Err(e.to_string())),
    }
    ok &= report(5, "reduction goldens", run(criterion5));
    match &tables {
        Ok((t3, t4)) => ok &= report(6, "qualitative tables 3 and 4", run(|o| criterion6(o, t3, t4))),
        Err(e) => ok &= report(6, "qualitative tables 3 and 4", Err(e.to_string())),
    }
    if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
