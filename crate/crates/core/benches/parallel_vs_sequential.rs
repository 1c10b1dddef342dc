//! Batch gradients and split evaluation on a one-thread pool against the
//! full rayon pool. Build with `--no-default-features` to time the plain
//! sequential loops instead.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rayon::ThreadPoolBuilder;
use sve_core::numerics::{Matrix, Rng};
use sve_core::predictor::{batch_gradients, PredictorConfig, PredictorParams};
use sve_core::task_data::{generate_synthetic, Split, SyntheticConfig};
use sve_core::trainer::{evaluate, Model, TrainConfig};

fn pools() -> Vec<(String, rayon::ThreadPool)> {
    let all = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut sizes = vec![1];
    if all > 1 {
        sizes.push(all);
    }
    sizes
        .into_iter()
        .map(|n| {
            let label = if n == 1 { "1 thread".to_string() } else { format!("{n} threads") };
            (label, ThreadPoolBuilder::new().num_threads(n).build().unwrap())
        })
        .collect()
}

fn gradients(c: &mut Criterion) {
    let mut rng = Rng::new(0);
    let cfg = PredictorConfig {
        latent: 64,
        layers: 4,
        dropout: 0.0,
    };
    let params = PredictorParams::init(&cfg, 32, &mut rng).unwrap();
    let processed = Matrix::from_fn(8, 32, |_, _| rng.normal());
    let targets = Matrix::from_fn(3, 32, |_, _| rng.normal());
    let xs: Vec<Vec<f64>> = (0..64).map(|_| (0..8).map(|_| rng.normal()).collect()).collect();
    let inputs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();

    let mut group = c.benchmark_group("batch_gradients_64x");
    for (label, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(&label), |b| {
            b.iter(|| {
                pool.install(|| {
                    batch_gradients(&params, &processed, &targets, &inputs, None, |_, s| {
                        Ok((s.iter().sum(), vec![1.0; s.len()]))
                    })
                    .unwrap()
                })
            })
        });
    }
    group.finish();
}

fn evaluation(c: &mut Criterion) {
    let bundle = generate_synthetic(&SyntheticConfig::new(12, 3), &mut Rng::new(1)).unwrap();
    let model = Model::init(&bundle, &TrainConfig::desk()).unwrap();
    let mut group = c.benchmark_group("evaluate_test_split");
    group.sample_size(20);
    for (label, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(&label), |b| {
            b.iter(|| pool.install(|| evaluate(&bundle, &model, Split::Test, 0).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, gradients, evaluation);
criterion_main!(benches);
