use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use imbalab_core::dataset::make_gaussian_imbalanced;
use imbalab_core::models::{train_svm, MlpModel, SvmConfig, TrainConfig};
use imbalab_core::resampling::{knn_same_set, smote, AugmentedDataset};
use imbalab_core::ndarray::Array1;

fn knn(c: &mut Criterion) {
    let mut group = c.benchmark_group("knn_same_set");
    for n in [250usize, 1000] {
        let data = make_gaussian_imbalanced(n - n / 10, n / 10, 72, 2.0, 1).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &data, |b, d| {
            b.iter(|| knn_same_set(black_box(d.features()), 5, true).unwrap())
        });
    }
    group.finish();
}

fn smote_fixture(c: &mut Criterion) {
    let data = make_gaussian_imbalanced(1700, 50, 72, 2.0, 2).unwrap();
    c.bench_function("smote_1750x72", |b| {
        b.iter(|| smote(black_box(&data), 5, 7).unwrap())
    });
}

fn svm(c: &mut Criterion) {
    let mut group = c.benchmark_group("svm_rbf");
    group.sample_size(10);
    for n in [300usize, 1000] {
        let data = AugmentedDataset::natural(
            make_gaussian_imbalanced(n - n / 5, n / 5, 20, 2.0, 3).unwrap(),
        );
        group.bench_with_input(BenchmarkId::from_parameter(n), &data, |b, d| {
            b.iter(|| train_svm(black_box(d), &SvmConfig::default(), None).unwrap())
        });
    }
    group.finish();
}

fn mlp_gradients(c: &mut Criterion) {
    let data = AugmentedDataset::natural(make_gaussian_imbalanced(28, 4, 72, 2.0, 4).unwrap());
    let model = MlpModel::init(72, 2, &TrainConfig::mlp());
    let targets = data.targets();
    let sw = Array1::<f64>::ones(data.len());
    c.bench_function("mlp_batch32_gradients", |b| {
        b.iter(|| {
            model.loss_and_gradients(
                black_box(data.data.features()),
                targets.view(),
                sw.view(),
                1e-4,
            )
        })
    });
}

criterion_group!(benches, knn, smote_fixture, svm, mlp_gradients);
criterion_main!(benches);
