//! Sequential against parallel execution on the three data-parallel hot
//! spots: the single-linkage tree of a ring, the density-of-states solve and
//! a ladder of independent chains. `LANDSCAPE_THREADS` sizes the pool.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use landtree::landscape::{estimate_dos, DosOptions};
use landtree::metric::euclidean;
use landtree::model::{build_energy_grid, seeded_rng, GridStrategy};
use landtree::samplers::{metropolis_chain, ChainSpec};
use landtree::slc::single_linkage;
use landtree::testbeds::{seven_mode_energy, SevenMode};
use landtree::{Exec, Sample, State};
use rand::Rng;

const POLICIES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn configure_pool() {
    if let Some(n) = std::env::var("LANDSCAPE_THREADS").ok().and_then(|v| v.parse().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn slc(c: &mut Criterion) {
    configure_pool();
    let mut rng = seeded_rng(1, 0);
    let mut group = c.benchmark_group("single_linkage");
    for n in [1000usize, 4000] {
        let pts: Vec<[f64; 4]> = (0..n).map(|_| std::array::from_fn(|_| rng.random::<f64>())).collect();
        for (name, exec) in POLICIES {
            group.bench_with_input(BenchmarkId::new(name, n), &pts, |b, pts| {
                b.iter(|| single_linkage(pts.len(), |i, j| euclidean(&pts[i], &pts[j]), exec))
            });
        }
    }
    group.finish();
}

fn dos(c: &mut Criterion) {
    let mut rng = seeded_rng(2, 0);
    let mut samples = Vec::new();
    for (chain, t) in [0.3, 0.6, 1.2, 2.4, 4.8].into_iter().enumerate() {
        let norm = 1.0 - (-1.0f64 / t).exp();
        samples.extend((0..40_000).map(|_| {
            let e = -t * (1.0 - rng.random::<f64>() * norm).ln();
            Sample {
                chain_id: chain as u32,
                temperature: t,
                truncation: None,
                energy: e,
                state: State::Continuous(vec![e]),
            }
        }));
    }
    let energies: Vec<f64> = samples.iter().map(|s| s.energy).collect();
    let grid = build_energy_grid(&energies, 50, GridStrategy::EqualCount).unwrap();
    let mut group = c.benchmark_group("density_of_states");
    group.sample_size(10);
    for (name, exec) in POLICIES {
        group.bench_function(name, |b| {
            b.iter(|| estimate_dos(&samples, &grid, &DosOptions { exec, ..DosOptions::default() }).unwrap())
        });
    }
    group.finish();
}

fn chains(c: &mut Criterion) {
    let space = SevenMode::space();
    let specs: Vec<ChainSpec> = (0..8u32)
        .map(|k| ChainSpec {
            chain_id: k,
            temperature: 1.0 + f64::from(k),
            truncation: None,
            steps: 20_000,
            burn_in: 0.1,
            sigma: 0.8,
            seed: 3,
            init: vec![0.0, 0.0],
        })
        .collect();
    let mut group = c.benchmark_group("chains");
    group.sample_size(10);
    for (name, exec) in POLICIES {
        group.bench_function(name, |b| {
            b.iter(|| exec.map(&specs, |s| metropolis_chain(&seven_mode_energy, &space, s).unwrap().samples.len()))
        });
    }
    group.finish();
}

criterion_group!(benches, slc, dos, chains);
criterion_main!(benches);
