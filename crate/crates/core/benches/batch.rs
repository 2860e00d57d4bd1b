//! Batch throughput on one worker versus the whole machine. Built without
//! the `parallel` feature both arms run on the calling thread.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use longact::session::{run_batch, ReasonerKind, RunConfig};
use longact::sim::generate_layout;
use longact::task::{generate_episode, Episode, Scenario};

fn corpus(n: u64) -> Vec<Episode> {
    (0..n).map(|s| generate_episode(&generate_layout(500 + s), Scenario::ALL[(s % 4) as usize], 500 + s).unwrap()).collect()
}

fn oracle_batch(c: &mut Criterion) {
    let episodes = corpus(16);
    let config = RunConfig::default();
    let kind = ReasonerKind::Oracle;
    let cores = std::thread::available_parallelism().map_or(1, std::num::NonZeroUsize::get);

    let mut group = c.benchmark_group("oracle_batch_16");
    group.sample_size(10);
    for (label, slots) in [("sequential", 1), ("parallel", cores)] {
        group.bench_with_input(BenchmarkId::new(label, slots), &slots, |b, &slots| {
            b.iter(|| run_batch(&episodes, kind.name(), |e| kind.build(e), &config, slots))
        });
    }
    group.finish();
}

fn witness_replay(c: &mut Criterion) {
    let episodes = corpus(64);
    let config = longact::session::SessionConfig::default();
    let cores = std::thread::available_parallelism().map_or(1, std::num::NonZeroUsize::get);
    let replay_all = |slots: usize| {
        longact::par::map_slots(&episodes, slots, |ep| {
            let mut s = longact::session::Session::new(ep.clone(), config.clone(), "witness");
            for a in &ep.witness_plan {
                s.step(a).unwrap();
            }
            s.end().sr
        })
    };

    let mut group = c.benchmark_group("witness_replay_64");
    group.sample_size(10);
    for (label, slots) in [("sequential", 1), ("parallel", cores)] {
        group.bench_with_input(BenchmarkId::new(label, slots), &slots, |b, &slots| b.iter(|| replay_all(slots)));
    }
    group.finish();
}

criterion_group!(benches, oracle_batch, witness_replay);
criterion_main!(benches);
