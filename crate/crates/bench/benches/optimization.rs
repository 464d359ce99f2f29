use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uhe_core::acquisition::{maximize, AcquisitionConfig};
use uhe_core::estimation::{estimate_consistent, estimate_map, EstimatorConfig};
use uhe_core::gp::{Dataset, GammaPriors, GpPosterior, Hyperparams};
use uhe_core::space::Bounds;

fn dataset(n: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pts: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random(), rng.random()]).collect();
    let ys = pts.iter().map(|p| (6.0 * p[0]).sin() * (4.0 * p[1]).cos()).collect();
    Dataset::from_parts(Bounds::unit(2), pts, ys).unwrap()
}

fn estimation(c: &mut Criterion) {
    let cfg = EstimatorConfig::default();
    let priors = GammaPriors::default();
    let mut group = c.benchmark_group("estimation");
    group.sample_size(10);
    for n in [25, 50, 100] {
        let data = dataset(n);
        group.bench_with_input(BenchmarkId::new("map", n), &n, |b, _| {
            b.iter(|| {
                let mut rng = ChaCha8Rng::seed_from_u64(0);
                estimate_map(data.points(), data.values(), data.bounds(), &cfg, &priors, None, &mut rng).unwrap()
            })
        });
        group.bench_with_input(BenchmarkId::new("consistent", n), &n, |b, _| {
            b.iter(|| {
                let mut rng = ChaCha8Rng::seed_from_u64(0);
                estimate_consistent(&data, &cfg, &priors, None, &mut rng).unwrap()
            })
        });
    }
    group.finish();
}

fn acquisition(c: &mut Criterion) {
    let theta = Hyperparams::isotropic(2, 0.2, 1.0, 1e-3).unwrap();
    let cfg = AcquisitionConfig::default();
    let mut group = c.benchmark_group("acquisition");
    for n in [25, 100] {
        let data = dataset(n);
        let gp = GpPosterior::fit(data.points(), data.values(), &theta).unwrap();
        group.bench_with_input(BenchmarkId::new("maximize", n), &n, |b, _| {
            b.iter(|| maximize(&gp, &Bounds::unit(2), &cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, estimation, acquisition);
criterion_main!(benches);
