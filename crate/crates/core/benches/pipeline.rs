use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use noteem_core::descriptor::{build_descriptors_with, DescriptorWeights};
use noteem_core::em::{e_step, EmState, Piece};
use noteem_core::metrics::{evaluate_corpus, EvalOptions, MetricFamily};
use noteem_core::par::Parallelism;
use noteem_core::pipeline::LabelingConfig;
use noteem_core::roll::ClassLayout;
use noteem_core::synth::{oracle_predict, synth_piece, CorpusSpec, OracleNoise, OracleTranscriber};
use noteem_core::{FrameClock, NoteSequence};

const MODES: [Parallelism; 2] = [Parallelism::Sequential, Parallelism::Parallel];

fn corpus(n: u64) -> Vec<Piece<NoteSequence>> {
    (0..n)
        .map(|i| {
            let p = synth_piece(&CorpusSpec::default(), 900 + i).unwrap();
            Piece {
                id: format!("b{i}"),
                input: p.performance,
                score: p.score,
            }
        })
        .collect()
}

fn descriptors(c: &mut Criterion) {
    let clock = FrameClock::default();
    let piece = synth_piece(
        &CorpusSpec {
            notes: 2000,
            ..CorpusSpec::default()
        },
        1,
    )
    .unwrap();
    let stack = oracle_predict(&piece.performance, &clock, ClassLayout::pitch_only(), &OracleNoise::default()).unwrap();
    let weights = DescriptorWeights::onset_weighted();
    let mut g = c.benchmark_group("descriptors");
    for mode in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(format!("{mode:?}")), &mode, |b, &mode| {
            b.iter(|| build_descriptors_with(black_box(&stack), &weights, mode))
        });
    }
    g.finish();
}

fn relabel(c: &mut Criterion) {
    let pieces = corpus(8);
    let t = OracleTranscriber::new(FrameClock::default(), ClassLayout::pitch_only(), OracleNoise::default(), vec![0.8]);
    let cfg = LabelingConfig::default();
    let mut g = c.benchmark_group("e_step");
    g.sample_size(10);
    for mode in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(format!("{mode:?}")), &mode, |b, &mode| {
            b.iter(|| {
                let mut state = EmState::new(pieces.len(), vec![0], 0);
                e_step(&mut state, black_box(&pieces), &t, &cfg, mode).unwrap()
            })
        });
    }
    g.finish();
}

fn scoring(c: &mut Criterion) {
    let clock = FrameClock::default();
    let pairs: Vec<(NoteSequence, NoteSequence)> = corpus(32).into_iter().map(|p| (p.score, p.input)).collect();
    let opts = EvalOptions {
        families: vec![MetricFamily::Note, MetricFamily::Frame, MetricFamily::NoteWithOffset],
        ..EvalOptions::default()
    };
    let mut g = c.benchmark_group("evaluate_corpus");
    for mode in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(format!("{mode:?}")), &mode, |b, &mode| {
            b.iter(|| evaluate_corpus(black_box(&pairs), &clock, &opts, mode).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, descriptors, relabel, scoring);
criterion_main!(benches);
