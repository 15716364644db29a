//! End-to-end benchmarks: corruption, dataset assembly, denoising, a short
//! training epoch, and the evaluator's covariance/PCA analyses.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rand::Rng;
use rand_distr::StandardNormal;

use face_manifold_core::autoencoder::{build, denoise_batch, init_weights};
use face_manifold_core::dataset::{build_dataset, corrupt, CorruptionConfig};
use face_manifold_core::evaluator::{covariance_trace, pca_project_2d};
use face_manifold_core::morphable::ParamGroup;
use face_manifold_core::rng::stream;
use face_manifold_core::trainer::{train, TrainConfig};

fn gaussian_set(count: usize, dim: usize, tag: &str) -> Vec<Vec<f64>> {
    let mut rng = stream(21, tag, &[count as u64, dim as u64]);
    (0..count)
        .map(|_| (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect()
}

fn bench_corruption(c: &mut Criterion) {
    let clean = vec![0.5; 199];
    c.bench_function("corrupt P=199", |b| {
        let mut rng = stream(3, "bench-corrupt", &[]);
        b.iter(|| corrupt(black_box(&clean), 2.0, &mut rng))
    });

    let cleans = gaussian_set(50, 29, "bench-build");
    let config = CorruptionConfig { sigma: 2.0, copies: 10, seed: 9 };
    c.bench_function("build_dataset 50x10 P=29", |b| {
        b.iter(|| build_dataset(ParamGroup::Expression, black_box(&cleans), &config).unwrap())
    });
}

fn bench_denoise(c: &mut Criterion) {
    let spec = build(29).unwrap();
    let weights = init_weights(&spec, 4);
    let inputs = gaussian_set(64, 29, "bench-denoise");
    c.bench_function("denoise_batch 64x29", |b| {
        b.iter(|| denoise_batch(black_box(&weights), black_box(&inputs)).unwrap())
    });
}

fn bench_train_epoch(c: &mut Criterion) {
    let cleans = gaussian_set(32, 29, "bench-train");
    let config = CorruptionConfig { sigma: 1.0, copies: 8, seed: 17 };
    let pairs = build_dataset(ParamGroup::Expression, &cleans, &config).unwrap();
    let spec = build(29).unwrap();
    let train_config = TrainConfig { epochs: 1, batch_size: 128, ..TrainConfig::default() };
    c.bench_function("train 1 epoch, 256 pairs L=29", |b| {
        b.iter(|| train(&spec, black_box(&pairs), &pairs, &train_config).unwrap())
    });
}

fn bench_analysis(c: &mut Criterion) {
    let samples = gaussian_set(2000, 29, "bench-cov");
    c.bench_function("covariance_trace 2000x29", |b| {
        b.iter(|| covariance_trace(black_box(&samples)).unwrap())
    });

    let small = gaussian_set(500, 29, "bench-pca");
    c.bench_function("pca_project_2d 500x29", |b| {
        b.iter(|| pca_project_2d(black_box(&small)).unwrap())
    });
}

criterion_group!(benches, bench_corruption, bench_denoise, bench_train_epoch, bench_analysis);
criterion_main!(benches);
