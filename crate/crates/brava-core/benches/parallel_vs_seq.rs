//! Compares the rayon-backed kernels against their sequential twins on the
//! hot paths: Brandes betweenness, degree-mass features, hyperbolic edge
//! generation, and the model forward pass (ambient pool vs a 1-thread pool).

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use brava_core::centrality::{degree_mass, degree_mass_seq};
use brava_core::graph::Graph;
use brava_core::model::{forward_with_masses, init_params, Hyperparams, Mode};
use brava_core::synth::{
    generate_hyperbolic, generate_hyperbolic_seq, generate_scale_free, HyperbolicConfig,
};

fn bench_brandes(c: &mut Criterion) {
    let mut group = c.benchmark_group("brandes");
    group.sample_size(10);
    for n in [500usize, 2000] {
        let g = generate_scale_free(n, 4, 7).unwrap();
        group.bench_with_input(BenchmarkId::new("seq", n), &g, |b, g| {
            b.iter(|| brava_core::centrality::brandes_betweenness_seq(g))
        });
        #[cfg(feature = "parallel")]
        group.bench_with_input(BenchmarkId::new("par", n), &g, |b, g| {
            b.iter(|| brava_core::centrality::brandes_betweenness_par(g))
        });
    }
    group.finish();
}

fn bench_degree_mass(c: &mut Criterion) {
    let mut group = c.benchmark_group("degree_mass_m6");
    group.sample_size(20);
    let g = generate_scale_free(10_000, 4, 11).unwrap();
    group.bench_function("seq", |b| b.iter(|| degree_mass_seq(&g, 6)));
    group.bench_function("par", |b| b.iter(|| degree_mass(&g, 6)));
    group.finish();
}

fn bench_hyperbolic(c: &mut Criterion) {
    let mut group = c.benchmark_group("hyperbolic_n3000");
    group.sample_size(10);
    let cfg = HyperbolicConfig {
        n: 3000,
        gamma: 2.5,
        avg_degree: 8.0,
        temperature: 0.1,
        seed: 3,
    };
    group.bench_function("seq", |b| b.iter(|| generate_hyperbolic_seq(&cfg).unwrap()));
    group.bench_function("par", |b| b.iter(|| generate_hyperbolic(&cfg).unwrap()));
    group.finish();
}

fn bench_forward(c: &mut Criterion) {
    let mut group = c.benchmark_group("forward_n10000");
    group.sample_size(20);
    let hp = Hyperparams::default();
    let params = init_params(&hp, 0).unwrap();
    let g: Graph = generate_scale_free(10_000, 4, 5).unwrap();
    let masses_in = degree_mass(&g, hp.hop_order);
    let masses_out = degree_mass(g.transpose(), hp.hop_order);
    let run = || {
        forward_with_masses(&g, &masses_in, &masses_out, &params, &hp, Mode::Eval).unwrap()
    };
    // The forward's parallelism lives inside the row-parallel linalg, so the
    // single-thread comparison comes from a dedicated pool.
    #[cfg(feature = "parallel")]
    {
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        group.bench_function("pool1", |b| b.iter(|| single.install(run)));
    }
    group.bench_function("ambient", |b| b.iter(run));
    group.finish();
}

criterion_group!(
    benches,
    bench_brandes,
    bench_degree_mass,
    bench_hyperbolic,
    bench_forward
);
criterion_main!(benches);
