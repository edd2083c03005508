use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ctc_align::lattice::{viterbi, StatePath};
use ctc_align::pipeline::{align_batch, align_batch_sequential, AlignJob};
use ctc_align::synth::{generate, random_scenario, RandomSpec};
use ctc_align::{AlignConfig, PhonemeInventory};

fn timit_like(inv: &PhonemeInventory, seed: u64) -> AlignJob {
    let spec = RandomSpec {
        phonemes: 40,
        phoneme_frames: (4, 6),
        gap_frames: (1, 2),
        total_frames: Some(310),
        seed,
        ..RandomSpec::default()
    };
    let s = generate(&random_scenario(&spec, inv).unwrap(), inv).unwrap();
    AlignJob { posteriorgram: s.posteriorgram, targets: s.targets }
}

fn batch(c: &mut Criterion) {
    let inv = PhonemeInventory::builtin();
    let cfg = AlignConfig::default();
    let mut group = c.benchmark_group("align_batch");
    for n in [16usize, 128] {
        let jobs: Vec<AlignJob> = (0..n as u64).map(|s| timit_like(&inv, s)).collect();
        group.bench_with_input(BenchmarkId::new("parallel", n), &jobs, |b, jobs| {
            b.iter(|| align_batch(black_box(jobs), &inv, &cfg))
        });
        group.bench_with_input(BenchmarkId::new("sequential", n), &jobs, |b, jobs| {
            b.iter(|| align_batch_sequential(black_box(jobs), &inv, &cfg))
        });
    }
    group.finish();
}

fn single(c: &mut Criterion) {
    let inv = PhonemeInventory::builtin();
    let job = timit_like(&inv, 0);
    let path = StatePath::new(&job.targets.phonemes(), inv.blank_id()).unwrap();
    c.bench_function("viterbi_t310_s40", |b| b.iter(|| viterbi(black_box(&job.posteriorgram), &path)));
}

criterion_group!(benches, batch, single);
criterion_main!(benches);
