use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use poshan_bench::desk_model;
use poshan_core::embeddings::QueryMode;
use poshan_core::train::Trainer;
use poshan_core::{Graph, ModelKind, TrainConfig};

fn forward(c: &mut Criterion) {
    let mut group = c.benchmark_group("forward");
    for kind in [ModelKind::Poshan, ModelKind::Lstm, ModelKind::Posat] {
        let (net, store, docs) = desk_model(kind, 1);
        group.bench_function(kind.to_string(), |b| {
            b.iter(|| net.probabilities(&store, &docs[0], QueryMode::MeanPool).unwrap())
        });
    }
    group.finish();
}

fn backward(c: &mut Criterion) {
    let mut group = c.benchmark_group("forward_backward");
    for kind in [ModelKind::Poshan, ModelKind::Lstm, ModelKind::Posat] {
        let (net, store, docs) = desk_model(kind, 1);
        let mode = if kind == ModelKind::Poshan { QueryMode::Active } else { QueryMode::MeanPool };
        let mut doc = docs[0].clone();
        doc.active = Some(0);
        group.bench_function(kind.to_string(), |b| {
            b.iter(|| {
                let mut g = Graph::new();
                let loss = net.loss(&store, &mut g, &doc, mode).unwrap();
                g.backward(loss).unwrap()
            })
        });
    }
    group.finish();
}

fn train_step(c: &mut Criterion) {
    let (net, store, mut docs) = desk_model(ModelKind::Poshan, 32);
    for d in &mut docs {
        d.active = Some(0);
    }
    let config = TrainConfig::default();
    c.bench_function("train_step/poshan_batch32", |b| {
        b.iter_batched(
            || Trainer::new(&net, store.clone(), &config),
            |mut t| t.step(&docs).unwrap(),
            BatchSize::LargeInput,
        )
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = forward, backward, train_step
}
criterion_main!(benches);
