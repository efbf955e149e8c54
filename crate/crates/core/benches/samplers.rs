//! Sequential against data-parallel execution for the Pólya-Gamma draws and a
//! short Gibbs run. Both paths produce identical output.

use std::hint::black_box;

use btties_core::exec::Execution;
use btties_core::gibbs::{sample_z, ObservedPairs, SamplerState};
use btties_core::polya_gamma::{sample_pg_batch, PgParams};
use btties_core::sim::bench::simulate_replicate;
use btties_core::sim::{PriorSource, SimulationScenario};
use btties_core::{run_gibbs, SamplerConfig, WardGraph};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const EXECUTIONS: [Execution; 2] = [Execution::Sequential, Execution::Parallel];

fn name(exec: Execution) -> &'static str {
    match exec {
        Execution::Sequential => "sequential",
        Execution::Parallel => "parallel",
    }
}

fn pg_batch(c: &mut Criterion) {
    let mut group = c.benchmark_group("pg_batch_100k");
    let params = PgParams::new(1, 1.0).unwrap();
    for exec in EXECUTIONS {
        group.bench_function(name(exec), |b| b.iter(|| black_box(sample_pg_batch(&params, 100_000, 1, exec))));
    }
    group.finish();
}

fn county_replicate(n_comparisons: usize) -> btties_core::sim::bench::Replicate {
    simulate_replicate(&SimulationScenario {
        n_wards: 95,
        n_comparisons,
        true_delta: 0.5,
        alpha2: 1.0,
        prior: PriorSource::Graph(WardGraph::surrogate_county().0),
        seed: 3,
    })
    .unwrap()
}

fn latent_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("latent_step");
    for comparisons in [800, 8000] {
        let rep = county_replicate(comparisons);
        let pairs = ObservedPairs::from_dataset(&rep.dataset);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let state = SamplerState::initial(&pairs, &rep.prior, &SamplerConfig::default(), &mut rng).unwrap();
        for exec in EXECUTIONS {
            group.bench_with_input(BenchmarkId::new(name(exec), comparisons), &comparisons, |b, _| {
                let mut s = state.clone();
                let mut key = 0;
                b.iter(|| {
                    key += 1;
                    sample_z(&mut s, &pairs, key, exec).unwrap();
                })
            });
        }
    }
    group.finish();
}

fn short_run(c: &mut Criterion) {
    let mut group = c.benchmark_group("gibbs_200_iterations");
    group.sample_size(10);
    let rep = county_replicate(800);
    for exec in EXECUTIONS {
        let config = SamplerConfig {
            n_iterations: 200,
            burn_in: 20,
            execution: exec,
            ..Default::default()
        };
        group.bench_function(name(exec), |b| b.iter(|| black_box(run_gibbs(&rep.dataset, &rep.prior, &config).unwrap())));
    }
    group.finish();
}

criterion_group!(benches, pg_batch, latent_step, short_run);
criterion_main!(benches);
