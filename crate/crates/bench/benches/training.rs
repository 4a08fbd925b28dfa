use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use fedsim_bench::fixture;
use fedsim_core::model::mean_loss;
use fedsim_core::{aggregate, grad, run_federated, train_centralized, Algorithm, ModelParams};
use std::hint::black_box;

fn bench_gradient(c: &mut Criterion) {
    let f = fixture(300, 1);
    let data = &f.clients[0].split.train;
    let w = ModelParams::zeros(data.dim());
    c.bench_function("grad_full_batch", |b| b.iter(|| grad(black_box(&w), data.iter())));
    c.bench_function("mean_loss_full_batch", |b| {
        b.iter(|| mean_loss(black_box(&w), data.iter()))
    });
}

fn bench_aggregate(c: &mut Criterion) {
    let updates: Vec<(ModelParams, usize)> = (0..4)
        .map(|k| {
            let mut p = ModelParams::zeros(13);
            p.weights
                .iter_mut()
                .enumerate()
                .for_each(|(i, w)| *w = (i * k) as f64 * 0.01);
            (p, 40 + k * 10)
        })
        .collect();
    c.bench_function("aggregate_4_clients", |b| {
        b.iter(|| aggregate(black_box(&updates)).unwrap())
    });
}

fn bench_training(c: &mut Criterion) {
    let f = fixture(300, 30);
    let mut group = c.benchmark_group("training_30_rounds");
    for (name, algorithm) in [("fedavg", Algorithm::FedAvg), ("fedprox", Algorithm::FedProx)] {
        group.bench_function(name, |b| {
            b.iter_batched(
                || f.cfg.clone(),
                |cfg| run_federated(&f.clients, &cfg, algorithm).unwrap(),
                BatchSize::SmallInput,
            )
        });
    }
    group.bench_function("centralized", |b| {
        b.iter(|| train_centralized(&f.clients, &f.cfg, 0.01, false).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_gradient, bench_aggregate, bench_training);
criterion_main!(benches);
