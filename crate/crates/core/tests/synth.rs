use noteem_core::midi::{read_notes, write_smf, InstrumentMap};
use noteem_core::synth::{
    gen_score, simulate_performance, stream_rng, synth_piece, CorpusSpec, PerformanceSim, TimeMap, STREAM_DELETE,
};
use noteem_core::{NoteEvent, NoteSequence};
use proptest::prelude::*;
use rand::Rng;

/// Largest number of notes sounding at once, scanning every onset.
fn max_overlap(seq: &NoteSequence) -> usize {
    seq.notes()
        .iter()
        .map(|a| {
            seq.notes()
                .iter()
                .filter(|b| b.onset_s <= a.onset_s && b.offset_s > a.onset_s)
                .count()
        })
        .max()
        .unwrap_or(0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scores_respect_polyphony_and_range(n in 1usize..200, poly in 1usize..6, seed in any::<u64>()) {
        let s = gen_score(n, 40..=70, poly, seed).unwrap();
        prop_assert_eq!(s.len(), n);
        prop_assert!(max_overlap(&s) <= poly);
        prop_assert!(s.notes().iter().all(|x| (40..=70).contains(&x.pitch)));
        prop_assert_eq!(s, gen_score(n, 40..=70, poly, seed).unwrap());
    }

    #[test]
    fn deletions_replay_from_their_stream(seed in any::<u64>(), rate in 0.0f64..0.9) {
        let score = gen_score(120, 30..=90, 3, seed).unwrap();
        let sim = PerformanceSim {
            delete_rate: rate,
            ..PerformanceSim::exact(seed)
        };
        let (perf, _) = simulate_performance(&score, &sim).unwrap();
        let mut rng = stream_rng(seed, STREAM_DELETE);
        let kept: Vec<NoteEvent> = score
            .notes()
            .iter()
            .filter(|_| rng.random::<f64>() >= rate)
            .cloned()
            .collect();
        prop_assert_eq!(perf.notes(), kept.as_slice());
    }

    #[test]
    fn tempo_map_moves_notes_monotonically(seed in any::<u64>()) {
        let spec = CorpusSpec::warp_only();
        let p = synth_piece(&spec, seed).unwrap();
        prop_assert_eq!(p.performance.len(), p.score.len());
        for s in p.warp.slopes() {
            prop_assert!((spec.slope_lo..=spec.slope_hi).contains(&s));
        }
        let mut xs: Vec<f64> = p.score.notes().iter().map(|n| n.onset_s).collect();
        xs.dedup();
        for w in xs.windows(2) {
            prop_assert!(p.warp.apply(w[0]) < p.warp.apply(w[1]));
        }
    }

    #[test]
    fn smf_round_trip_preserves_notes_to_the_tick(seed in any::<u64>(), instruments in 0usize..4) {
        let imap = if instruments == 0 {
            InstrumentMap::pitch_only()
        } else {
            InstrumentMap::identity(instruments).unwrap()
        };
        let base = gen_score(60, 21..=108, 4, seed).unwrap();
        let seq = if instruments == 0 {
            base
        } else {
            let notes = base
                .notes()
                .iter()
                .enumerate()
                .map(|(i, n)| n.clone().with_instrument((i % instruments) as u16))
                .collect();
            NoteSequence::new(notes, instruments).unwrap()
        };
        let (back, report) = read_notes(&write_smf(&seq, &imap).unwrap(), &imap).unwrap();
        prop_assert_eq!(report.dropped_empty + report.dropped_ignored + report.dangling_closed, 0);
        prop_assert_eq!(back.len(), seq.len());
        // 480 ticks per quarter at 120 bpm: one tick is 1/960 s
        let tick = 1.0 / 960.0;
        for (a, b) in seq.notes().iter().zip(back.notes()) {
            prop_assert_eq!(a.pitch, b.pitch);
            prop_assert_eq!(a.instrument, b.instrument);
            prop_assert!((a.onset_s - b.onset_s).abs() <= tick / 2.0 + 1e-9);
            prop_assert!((a.offset_s - b.offset_s).abs() <= tick / 2.0 + 1e-9);
        }
    }
}

#[test]
fn same_seed_same_piece() {
    let spec = CorpusSpec::default();
    assert_eq!(synth_piece(&spec, 7).unwrap(), synth_piece(&spec, 7).unwrap());
    assert_ne!(synth_piece(&spec, 7).unwrap().performance, synth_piece(&spec, 8).unwrap().performance);
}

#[test]
fn insertions_add_neighbouring_pitches() {
    let score = gen_score(200, 40..=80, 3, 3).unwrap();
    let sim = PerformanceSim {
        insert_rate: 0.5,
        ..PerformanceSim::exact(3)
    };
    let (perf, _) = simulate_performance(&score, &sim).unwrap();
    assert!(perf.len() > score.len());
    assert!(perf.notes().iter().all(|n| (38..=82).contains(&n.pitch)));
}

#[test]
fn time_map_inverse_round_trips() {
    let m = TimeMap::random(60.0, 5.0, 0.8..=1.25, 4).unwrap();
    for i in 0..120 {
        let t = i as f64 * 0.5;
        assert!((m.inverse(m.apply(t)) - t).abs() < 1e-9);
    }
}
