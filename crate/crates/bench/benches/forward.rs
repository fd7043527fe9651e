use std::hint::black_box;

use coat_bench::mazes;
use coat_core::{build_model, encode_pair, DomainTag, Model, ModelConfig};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn forward(c: &mut Criterion) {
    let model: Model = build_model(&ModelConfig::desk(DomainTag::Maze), 0).unwrap();
    let mut group = c.benchmark_group("desk_forward");
    for size in [6usize, 10, 20] {
        let inst = &mazes(size, 1)[0];
        let enc = encode_pair::<f32>(&inst.initial, &inst.goal()).unwrap();
        let agents = enc.agent_tuples();
        group.bench_with_input(BenchmarkId::from_parameter(size), &enc.tensor, |b, x| {
            b.iter(|| model.forward(black_box(x), &agents).unwrap())
        });
    }
    group.finish();
}

fn heuristic(c: &mut Criterion) {
    let model: Model = build_model(&ModelConfig::desk(DomainTag::Maze), 0).unwrap();
    let inst = &mazes(10, 1)[0];
    c.bench_function("heuristic_value_10x10", |b| {
        b.iter(|| model.heuristic_value(black_box(&inst.initial)).unwrap())
    });
}

criterion_group!(benches, forward, heuristic);
criterion_main!(benches);
