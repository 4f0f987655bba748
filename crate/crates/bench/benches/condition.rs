use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use mtls_core::condition::{kappa4, kappa_full_abs, mixed_compw_upper, perturbation_bound};
use mtls_core::experiment::{gen_gap_controlled, gen_intercept, InterceptMode};
use mtls_core::structured::structured_condition_numbers;
use mtls_core::{solve, MtlsProblem};

fn problems() -> Vec<(String, MtlsProblem)> {
    [(60, 30, 10), (150, 100, 40)]
        .into_iter()
        .map(|(m, n, n1)| (format!("{m}x{n}"), gen_gap_controlled(m, n, n1, 0.9, 7).unwrap()))
        .collect()
}

fn bench_solve(c: &mut Criterion) {
    let mut g = c.benchmark_group("solve");
    for (name, p) in problems() {
        g.bench_with_input(BenchmarkId::from_parameter(&name), &p, |b, p| b.iter(|| solve(p).unwrap()));
    }
    g.finish();
}

fn bench_condition(c: &mut Criterion) {
    let mut g = c.benchmark_group("condition");
    g.sample_size(20);
    for (name, p) in problems() {
        // P⁻¹ is cached per solution, so each iteration starts from a fresh solve
        g.bench_with_input(BenchmarkId::new("kappa4", &name), &p, |b, p| b.iter(|| kappa4(&solve(p).unwrap()).unwrap()));
        g.bench_with_input(BenchmarkId::new("perturbation_bound", &name), &p, |b, p| {
            b.iter(|| perturbation_bound(&solve(p).unwrap(), 1.0, 1.0).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("mixed_upper", &name), &p, |b, p| {
            b.iter(|| mixed_compw_upper(&solve(p).unwrap()).unwrap())
        });
    }
    // the explicit Jacobian only at the small size
    let (name, p) = &problems()[0];
    g.bench_with_input(BenchmarkId::new("kappa_full", name), p, |b, p| b.iter(|| kappa_full_abs(&solve(p).unwrap()).unwrap()));
    g.finish();
}

fn bench_structured(c: &mut Criterion) {
    let (p, basis) = gen_intercept(200, InterceptMode::Toeplitz { omega: 8, lambda: 1e-2 }, 3).unwrap();
    let basis = basis.unwrap();
    let mut g = c.benchmark_group("structured");
    g.sample_size(10);
    g.bench_function("toeplitz_m200", |b| b.iter(|| structured_condition_numbers(&solve(&p).unwrap(), &basis).unwrap()));
    g.finish();
}

criterion_group!(benches, bench_solve, bench_condition, bench_structured);
criterion_main!(benches);
