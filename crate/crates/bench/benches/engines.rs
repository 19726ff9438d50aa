use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use habitminer_core::{
    benchmark_patterns, cluster_quality, composite, generate, pca3, random_walk, MembershipMatrix,
    ParameterConfig, ProclusConfig, WeightedGraph,
};

fn bench_composite(c: &mut Criterion) {
    let data = generate(&benchmark_patterns(), 100, 1).unwrap().dataset;
    let pc = ParameterConfig::parse("111111").unwrap();
    c.bench_function("composite_dissimilarity", |b| {
        let mut i = 0usize;
        b.iter(|| {
            let a = &data.vectors[i % data.len()];
            let v = &data.vectors[(i * 7 + 13) % data.len()];
            i += 1;
            black_box(composite(a, v, &pc, &data.schema).unwrap())
        })
    });
}

fn bench_graph_build(c: &mut Criterion) {
    let data = generate(&benchmark_patterns(), 100, 1).unwrap().dataset;
    let pc = ParameterConfig::parse("111000").unwrap();
    c.bench_function("graph_build_n500", |b| {
        b.iter(|| black_box(WeightedGraph::build(&data, pc, 20.0).unwrap()))
    });
}

fn bench_cluster_quality(c: &mut Criterion) {
    let data = generate(&benchmark_patterns(), 100, 1).unwrap().dataset;
    let pc = ParameterConfig::parse("111000").unwrap();
    let graph = WeightedGraph::build(&data, pc, 20.0).unwrap();
    let members: Vec<usize> = (0..100).collect();
    c.bench_function("cluster_quality_100_of_500", |b| {
        b.iter(|| black_box(cluster_quality(&members, &graph).unwrap()))
    });
}

fn bench_random_walk(c: &mut Criterion) {
    let data = generate(&benchmark_patterns(), 100, 1).unwrap().dataset;
    let pc = ParameterConfig::parse("111000").unwrap();
    let graph = WeightedGraph::build(&data, pc, 20.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    c.bench_function("random_walk_l125", |b| {
        b.iter(|| {
            let start = rng.random_range(0..graph.node_count());
            black_box(random_walk(&graph, start, 125, 0.8, 5, &mut rng))
        })
    });
}

fn bench_proclus(c: &mut Criterion) {
    let data = generate(&benchmark_patterns(), 100, 1).unwrap().dataset;
    c.bench_function("proclus_run_k4_l5", |b| {
        let mut seed = 0u64;
        b.iter(|| {
            let mut config = ProclusConfig::new(4, 5);
            config.seed = seed;
            seed += 1;
            black_box(habitminer_core::proclus::run(&data, &config).unwrap())
        })
    });
}

fn bench_pca(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let rows: Vec<Vec<bool>> = (0..40)
        .map(|_| (0..200).map(|_| rng.random_bool(0.3)).collect())
        .collect();
    let matrix = MembershipMatrix { rows, n: 200 };
    let cq = vec![0.9; 40];
    c.bench_function("pca3_40x200", |b| {
        b.iter(|| black_box(pca3(&matrix, &cq).unwrap()))
    });
}

criterion_group!(
    benches,
    bench_composite,
    bench_graph_build,
    bench_cluster_quality,
    bench_random_walk,
    bench_proclus,
    bench_pca
);
criterion_main!(benches);
