use noteem_core::em::{e_step, m_step, run, EmConfig, EmState, FixedPredictions, MStepConfig, Piece, Transcriber, TrainingExample};
use noteem_core::labeler::{
    apply_pseudo_labels, local_max_adjust, shift_grid, LabelGrid, LocalMaxConfig, Provenance, PseudoLabelConfig,
};
use noteem_core::matrix::Matrix;
use noteem_core::metrics::frame_metrics;
use noteem_core::par::Parallelism;
use noteem_core::pipeline::LabelingConfig;
use noteem_core::roll::{rasterize, rasterize_fit, shift_stack, ActivationStack, ClassLayout, Head};
use noteem_core::synth::{
    oracle_predict, synth_piece, CorpusSpec, OracleNoise, OracleTranscriber, ToyInput, ToyRender, ToyTrainConfig,
    ToyTranscriber,
};
use noteem_core::{FrameClock, NoteEvent, NoteSequence};
use proptest::prelude::*;

fn clock() -> FrameClock {
    FrameClock::default()
}

fn stack_strategy() -> impl Strategy<Value = (LabelGrid, ActivationStack)> {
    (1usize..30).prop_flat_map(|frames| {
        let cells = frames * 88;
        (
            prop::collection::vec(0u8..2, cells * 3),
            prop::collection::vec(0.0f32..=1.0, cells * 3),
        )
            .prop_map(move |(t, p)| {
                let layout = ClassLayout::pitch_only();
                let mut grid = LabelGrid::new_aligned(frames, clock(), layout);
                let m = |v: &[f32]| Matrix::from_vec(frames, 88, v.to_vec()).unwrap();
                for (k, h) in Head::ALL.into_iter().enumerate() {
                    grid.head_mut(h).target = Matrix::from_vec(frames, 88, t[k * cells..(k + 1) * cells].to_vec()).unwrap();
                }
                let stack = ActivationStack::new(
                    m(&p[..cells]),
                    m(&p[cells..2 * cells]),
                    m(&p[2 * cells..]),
                    clock(),
                    layout,
                )
                .unwrap();
                (grid, stack)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn pseudo_labels_follow_thresholds((grid, stack) in stack_strategy()) {
        let cfg = PseudoLabelConfig::default();
        let out = apply_pseudo_labels(&grid, &stack, &cfg).unwrap();
        for h in Head::ALL {
            let (before, after, probs) = (grid.head(h), out.head(h), stack.head(h));
            for t in 0..grid.frames() {
                for c in 0..88 {
                    let p = probs.get(t, c);
                    let prov = after.provenance.get(t, c);
                    if p > cfg.t_pos {
                        prop_assert_eq!((after.target.get(t, c), prov), (1, Provenance::PseudoPos));
                    } else if p < cfg.t_neg {
                        if before.target.get(t, c) == 1 {
                            prop_assert_eq!((after.target.get(t, c), prov), (1, Provenance::Aligned));
                        } else {
                            prop_assert_eq!((after.target.get(t, c), prov), (0, Provenance::PseudoNeg));
                        }
                    } else if h == Head::Onset && p > 0.5 && before.target.get(t, c) == 0 {
                        prop_assert_eq!(prov, Provenance::UnknownMasked);
                    } else {
                        prop_assert_eq!(prov, Provenance::Aligned);
                        prop_assert_eq!(after.target.get(t, c), before.target.get(t, c));
                    }
                }
            }
        }
    }

    #[test]
    fn shifting_labels_is_invertible_away_from_the_edges(k in -5i32..=5) {
        let notes = NoteSequence::new(
            (0..20).map(|i| NoteEvent::new(40 + (i % 30) as u8, i as f64 * 0.1, i as f64 * 0.1 + 0.3)).collect(),
            1,
        )
        .unwrap();
        let grid = LabelGrid::from_roll(&rasterize_fit(&notes, &clock(), ClassLayout::pitch_only()));
        prop_assert_eq!(shift_grid(&shift_grid(&grid, k), -k), grid);
    }
}

#[test]
fn local_max_moves_onsets_to_nearby_peaks() {
    let notes = NoteSequence::new(vec![NoteEvent::new(60, 0.32, 1.0)], 1).unwrap();
    let roll = rasterize(&notes, &clock(), ClassLayout::pitch_only(), 40).unwrap();
    let grid = LabelGrid::from_roll(&roll);
    let on = roll.onset.as_slice().iter().position(|&v| v == 1).unwrap() / 88;
    let mut stack = ActivationStack::zeros(40, clock(), ClassLayout::pitch_only());
    stack.onset.set(on + 2, 39, 0.9);
    stack.onset.set(on, 39, 0.2);
    let out = local_max_adjust(&grid, &stack, &LocalMaxConfig::default()).unwrap();
    assert_eq!(out.onset.target.get(on + 2, 39), 1);
    assert_eq!(out.onset.target.get(on, 39), 0);
    // a peak beyond half the window stays out of reach
    let mut far = ActivationStack::zeros(40, clock(), ClassLayout::pitch_only());
    far.onset.set(on + 10, 39, 0.9);
    let cfg = LocalMaxConfig {
        sweeps: 1,
        ..LocalMaxConfig::default()
    };
    let out = local_max_adjust(&grid, &far, &cfg).unwrap();
    assert_eq!(out.onset.target.get(on, 39), 1);
}

fn oracle_corpus(n: u64, transpose: i32) -> Vec<Piece<NoteSequence>> {
    (0..n)
        .map(|i| {
            let spec = CorpusSpec {
                notes: 120,
                pitch_lo: 40,
                pitch_hi: 80,
                ..CorpusSpec::default()
            };
            let p = synth_piece(&spec, 60 + i).unwrap();
            Piece {
                id: format!("p{i}"),
                input: p.performance.transposed(transpose),
                score: p.score.transposed(transpose),
            }
        })
        .collect()
}

#[test]
fn transposed_corpus_gives_shifted_labels_and_equal_costs() {
    let noise = OracleNoise {
        equivariant: true,
        fp_rate: 0.1,
        seed: 3,
        ..OracleNoise::default()
    };
    let cfg = EmConfig {
        labeling: LabelingConfig {
            pseudo: PseudoLabelConfig::disabled(),
            ..LabelingConfig::default()
        },
        m_step: MStepConfig {
            steps_per_piece: 1,
            ..MStepConfig::default()
        },
        ..EmConfig::default()
    };
    let run_on = |k: i32| {
        let mut t = OracleTranscriber::new(clock(), ClassLayout::pitch_only(), noise.clone(), vec![0.8]);
        run(&oracle_corpus(3, k), &mut t, &cfg).unwrap()
    };
    let base = run_on(0);
    for k in [-3, 4] {
        let moved = run_on(k);
        // rotating the chroma reorders the distance sums, so costs agree to rounding
        for (a, b) in moved.state.costs().iter().zip(base.state.costs()) {
            assert!((a - b).abs() <= 1e-12 * b, "k = {k}: {a} vs {b}");
        }
        for (a, b) in moved.state.pieces.iter().zip(&base.state.pieces) {
            assert_eq!(a.labels.as_ref().unwrap(), &shift_grid(b.labels.as_ref().unwrap(), k));
        }
    }
}

/// Records every example it is trained on.
#[derive(Default)]
struct Recorder {
    seen: Vec<(i32, LabelGrid)>,
}

impl Transcriber for Recorder {
    type Input = NoteSequence;

    fn predict(&self, perf: &NoteSequence, pitch_shift: i32) -> noteem_core::Result<ActivationStack> {
        let noise = OracleNoise {
            equivariant: true,
            ..OracleNoise::exact()
        };
        oracle_predict(&perf.transposed(pitch_shift), &clock(), ClassLayout::pitch_only(), &noise)
    }

    fn train(
        &mut self,
        examples: &[TrainingExample<'_, NoteSequence>],
        steps: usize,
    ) -> noteem_core::Result<noteem_core::em::TrainReport> {
        for e in examples {
            self.seen.push((e.pitch_shift, e.labels.clone()));
        }
        Ok(noteem_core::em::TrainReport {
            steps,
            ..Default::default()
        })
    }
}

#[test]
fn m_step_feeds_shifted_labels_matching_shifted_inputs() {
    let pieces = oracle_corpus(2, 0);
    let mut t = Recorder::default();
    let mut state = EmState::new(pieces.len(), vec![0], 0);
    e_step(&mut state, &pieces, &t, &LabelingConfig::alignment_only(), Parallelism::Sequential).unwrap();
    let cfg = MStepConfig {
        steps_per_piece: 11,
        shift_rounds: 1,
        ..MStepConfig::default()
    };
    m_step(&state, &pieces, &mut t, &cfg, Parallelism::Sequential).unwrap();
    assert_eq!(t.seen.len(), 2 * 11);
    for (i, (k, labels)) in t.seen.iter().enumerate() {
        let base = state.pieces[i % 2].labels.as_ref().unwrap();
        assert_eq!(labels, &shift_grid(base, *k));
        // the shifted prediction of a perfect oracle is the shifted base prediction
        let stack = t.predict(&pieces[i % 2].input, *k).unwrap();
        assert_eq!(stack, shift_stack(&t.predict(&pieces[i % 2].input, 0).unwrap(), *k));
    }
}

#[test]
fn keep_best_ignores_worse_relabelings() {
    let pieces = oracle_corpus(2, 0);
    let stacks: Vec<Piece<ActivationStack>> = pieces
        .iter()
        .map(|p| Piece {
            id: p.id.clone(),
            input: oracle_predict(&p.input, &clock(), ClassLayout::pitch_only(), &OracleNoise::exact()).unwrap(),
            score: p.score.clone(),
        })
        .collect();
    let cfg = LabelingConfig::alignment_only();
    let mut state = EmState::new(2, vec![0, 1], 0);
    e_step(&mut state, &stacks, &FixedPredictions, &cfg, Parallelism::Sequential).unwrap();
    let first = state.costs();
    let noisy: Vec<Piece<ActivationStack>> = pieces
        .iter()
        .map(|p| Piece {
            id: p.id.clone(),
            input: oracle_predict(&p.input, &clock(), ClassLayout::pitch_only(), &OracleNoise { fidelity: 0.3, ..OracleNoise::default() })
                .unwrap(),
            score: p.score.clone(),
        })
        .collect();
    let report = e_step(&mut state, &noisy, &FixedPredictions, &cfg, Parallelism::Sequential).unwrap();
    assert_eq!(report.replaced, 0);
    assert_eq!(state.costs(), first);
}

/// Oracle that refuses pieces shorter than ten notes.
struct Picky(OracleTranscriber);

impl Transcriber for Picky {
    type Input = NoteSequence;

    fn predict(&self, perf: &NoteSequence, pitch_shift: i32) -> noteem_core::Result<ActivationStack> {
        if perf.len() < 10 {
            return Err(noteem_core::Error::InvalidConfig("too short".into()));
        }
        self.0.predict(perf, pitch_shift)
    }

    fn train(
        &mut self,
        examples: &[TrainingExample<'_, NoteSequence>],
        steps: usize,
    ) -> noteem_core::Result<noteem_core::em::TrainReport> {
        self.0.train(examples, steps)
    }
}

#[test]
fn failed_pieces_keep_their_labels_and_are_reported() {
    let mut pieces = oracle_corpus(2, 0);
    pieces[1].input = NoteSequence::new(pieces[1].input.notes()[..5].to_vec(), 1).unwrap();
    let mut t = Picky(OracleTranscriber::new(clock(), ClassLayout::pitch_only(), OracleNoise::default(), vec![1.0]));
    let cfg = EmConfig {
        max_iterations: 1,
        ..EmConfig::default()
    };
    let out = run(&pieces, &mut t, &cfg).unwrap();
    assert_eq!(out.history[0].failed.len(), 1);
    assert_eq!(out.history[0].failed[0].0, "p1");
    assert!(out.state.pieces[1].labels.is_none());
    assert!(out.state.pieces[1].last_error.is_some());
    assert!(out.state.pieces[0].labels.is_some());
    assert_eq!(out.training[0].steps, cfg.m_step.steps_per_piece);
}

#[test]
fn toy_transcriber_learns_exact_labels() {
    let clock = clock();
    let spec = CorpusSpec {
        notes: 130,
        ..CorpusSpec::default()
    };
    let make = |seed: u64| {
        let p = synth_piece(&spec, seed).unwrap();
        let input = ToyInput::new(p.performance, &clock, ToyRender::synthetic(seed));
        let roll = rasterize(&input.performance, &clock, ClassLayout::pitch_only(), input.frames).unwrap();
        (input, LabelGrid::from_roll(&roll), roll)
    };
    let train: Vec<_> = (0..6).map(|i| make(800 + i)).collect();
    let examples: Vec<TrainingExample<'_, ToyInput>> = train
        .iter()
        .map(|(input, labels, _)| TrainingExample {
            input,
            pitch_shift: 0,
            labels,
        })
        .collect();
    let mut model = ToyTranscriber::new(
        clock,
        ToyTrainConfig {
            seed: 1,
            ..ToyTrainConfig::default()
        },
    );
    let report = model.train(&examples, 2500).unwrap();
    assert!(report.final_loss.is_finite());
    let (input, _, roll) = make(900);
    let est = model.predict(&input, 0).unwrap().threshold(0.5);
    let f1 = frame_metrics(&roll, &est).unwrap().f1;
    assert!(f1 > 0.9, "held-out frame F1 {f1:.4}");
}
