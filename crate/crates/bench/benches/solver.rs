//! Path-solver benchmarks: full regularization paths on a fixed
//! Gaussian design at the shapes the experiments actually run.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use lassopt::{
    evaluate_path, fit_path, gen_gaussian_design, EvalTarget, FitConfig, GeneratingModel,
    LambdaGrid, RngStream,
};
use std::hint::black_box;

fn fit_inputs(n: usize, p: usize) -> (lassopt::Design, Vec<f64>, Vec<f64>) {
    let design = gen_gaussian_design(n, p, 42).expect("design");
    let model = GeneratingModel::from_dense(&[6.0, 5.0, 4.0, 3.0, 2.0, 1.0], 9.0).expect("model");
    let mu = model.mu(&design).expect("mean");
    let mut noise = RngStream::new(42, 1);
    let y: Vec<f64> = mu
        .iter()
        .map(|&m| m + 3.0 * noise.standard_normal())
        .collect();
    (design, y, mu)
}

fn config() -> FitConfig {
    FitConfig {
        intercept: true,
        standardize: true,
        grid: LambdaGrid::Log {
            count: 100,
            min_ratio: 1e-4,
        },
        tol: 1e-8,
        max_sweeps: 100_000,
    }
}

fn bench_fit_path(c: &mut Criterion) {
    let mut group = c.benchmark_group("fit_path");
    for &(n, p) in &[(100usize, 100usize), (100, 500), (100, 1000)] {
        let (design, y, _) = fit_inputs(n, p);
        let cfg = config();
        group.bench_function(format!("n{n}_p{p}"), |b| {
            b.iter(|| fit_path(black_box(&design), black_box(&y), &cfg).expect("fit"))
        });
    }
    group.finish();
}

fn bench_evaluate_path(c: &mut Criterion) {
    let (design, y, mu) = fit_inputs(100, 500);
    let cfg = config();
    let path = fit_path(&design, &y, &cfg).expect("fit");
    c.bench_function("evaluate_path/n100_p500_mu", |b| {
        b.iter_batched(
            || path.clone(),
            |p| evaluate_path(&p, &design, &y, &EvalTarget::Mu(&mu), false).expect("eval"),
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, bench_fit_path, bench_evaluate_path);
criterion_main!(benches);
