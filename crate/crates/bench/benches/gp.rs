use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;
use uhe_core::gp::{covariance_matrix, log_objective_with_gradient, GammaPriors, GpPosterior, Hyperparams};

fn data(n: usize, d: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
    let pts: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random()).collect()).collect();
    let ys = pts.iter().map(|p| p.iter().map(|v| (5.0 * v).sin()).sum()).collect();
    (pts, ys)
}

fn gp(c: &mut Criterion) {
    let theta = Hyperparams::isotropic(2, 0.2, 1.0, 1e-3).unwrap();
    let priors = GammaPriors::default();
    let mut group = c.benchmark_group("gp");
    for n in [50, 100, 200, 400] {
        let (pts, ys) = data(n, 2);
        group.bench_with_input(BenchmarkId::new("covariance", n), &n, |b, _| {
            b.iter(|| covariance_matrix(black_box(&pts), &theta))
        });
        group.bench_with_input(BenchmarkId::new("fit", n), &n, |b, _| {
            b.iter(|| GpPosterior::fit(black_box(&pts), &ys, &theta).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("objective_and_gradient", n), &n, |b, _| {
            b.iter(|| log_objective_with_gradient(black_box(&pts), &ys, &theta, Some(&priors)).unwrap())
        });
        let posterior = GpPosterior::fit(&pts, &ys, &theta).unwrap();
        let (probes, _) = data(2000, 2);
        group.bench_with_input(BenchmarkId::new("predict_2000", n), &n, |b, _| {
            b.iter(|| posterior.predict_many(black_box(&probes)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, gp);
criterion_main!(benches);
