use noteem_core::metrics::{
    evaluate, frame_metrics, match_notes, note_metrics, note_with_offset_metrics, EvalOptions, MatchCriteria,
    MetricFamily, DEFAULT_ONSET_TOL, OFFSET_SWEEP,
};
use noteem_core::roll::{rasterize, rasterize_fit, required_frames, ClassLayout, Head};
use noteem_core::{FrameClock, NoteEvent, NoteSequence};
use proptest::prelude::*;

fn notes(max: usize) -> impl Strategy<Value = NoteSequence> {
    prop::collection::vec((60u8..64, 0u32..300, 1u32..120), 0..max).prop_map(|v| {
        let events = v
            .into_iter()
            .map(|(p, on, dur)| {
                let on = on as f64 / 100.0;
                NoteEvent::new(p, on, on + dur as f64 / 100.0)
            })
            .collect();
        NoteSequence::new(events, 1).unwrap()
    })
}

fn is_matching(pairs: &[(usize, usize)], r: &NoteSequence, e: &NoteSequence, c: &MatchCriteria) -> bool {
    let mut rs: Vec<usize> = pairs.iter().map(|p| p.0).collect();
    let mut es: Vec<usize> = pairs.iter().map(|p| p.1).collect();
    rs.sort_unstable();
    es.sort_unstable();
    rs.dedup();
    es.dedup();
    rs.len() == pairs.len()
        && es.len() == pairs.len()
        && pairs.iter().all(|&(i, j)| c.accepts(&r.notes()[i], &e.notes()[j]))
}

proptest! {
    #[test]
    fn matching_is_valid_and_symmetric(r in notes(20), e in notes(20)) {
        let c = MatchCriteria::onset(DEFAULT_ONSET_TOL);
        let pairs = match_notes(r.notes(), e.notes(), &c);
        prop_assert!(is_matching(&pairs, &r, &e, &c));
        let a = note_metrics(&r, &e, DEFAULT_ONSET_TOL);
        let b = note_metrics(&e, &r, DEFAULT_ONSET_TOL);
        prop_assert_eq!(a.tp, b.tp);
        prop_assert_eq!(a.precision, b.recall);
        prop_assert_eq!(a.recall, b.precision);
        prop_assert_eq!(a.f1, b.f1);
    }

    #[test]
    fn translation_leaves_scores_unchanged(r in notes(20), e in notes(20), shift in 1u32..500) {
        let dt = shift as f64 / 4.0;
        let a = note_metrics(&r, &e, DEFAULT_ONSET_TOL);
        let b = note_metrics(&r.translated(dt).unwrap(), &e.translated(dt).unwrap(), DEFAULT_ONSET_TOL);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn looser_offset_tolerance_never_lowers_f1(r in notes(15), e in notes(15)) {
        let f1 = |(s, p): (f64, f64)| note_with_offset_metrics(&r, &e, DEFAULT_ONSET_TOL, s, p).f1;
        for &a in &OFFSET_SWEEP {
            for &b in &OFFSET_SWEEP {
                if b.0 >= a.0 && b.1 >= a.1 {
                    prop_assert!(f1(b) >= f1(a), "{a:?} -> {b:?}");
                }
            }
        }
        prop_assert!(note_metrics(&r, &e, DEFAULT_ONSET_TOL).f1 >= f1(OFFSET_SWEEP[OFFSET_SWEEP.len() - 1]));
    }

    #[test]
    fn frame_scores_count_cells(r in notes(15), e in notes(15)) {
        let clock = FrameClock::default();
        let n = required_frames(&r, &clock).max(required_frames(&e, &clock)).max(1);
        let rr = rasterize(&r, &clock, ClassLayout::pitch_only(), n).unwrap();
        let er = rasterize(&e, &clock, ClassLayout::pitch_only(), n).unwrap();
        let (a, b) = (rr.head(Head::Frame).as_slice(), er.head(Head::Frame).as_slice());
        let tp = a.iter().zip(b).filter(|(x, y)| **x == 1 && **y == 1).count();
        let fp = a.iter().zip(b).filter(|(x, y)| **x == 0 && **y == 1).count();
        let fn_ = a.iter().zip(b).filter(|(x, y)| **x == 1 && **y == 0).count();
        let prf = frame_metrics(&rr, &er).unwrap();
        prop_assert_eq!((prf.tp, prf.fp, prf.fn_), (tp, fp, fn_));
    }

    #[test]
    fn rasterized_frames_follow_note_spans(r in notes(12)) {
        let clock = FrameClock::default();
        let roll = rasterize_fit(&r, &clock, ClassLayout::pitch_only());
        prop_assert_eq!(roll.frames(), required_frames(&r, &clock).max(1));
        // every frame cell lies inside some note's [onset, offset) frame range
        for c in 0..roll.classes() {
            for t in 0..roll.frames() {
                let covered = r.notes().iter().any(|n| {
                    let (on, off) = noteem_core::roll::note_frames(n, &clock);
                    ClassLayout::pitch_only().class_index(n.pitch, None) == c && (on..off).contains(&t)
                });
                prop_assert_eq!(roll.frame.get(t, c) == 1, covered);
            }
        }
    }
}

#[test]
fn identical_sequences_score_perfectly() {
    let clock = FrameClock::default();
    let seq = NoteSequence::new(vec![NoteEvent::new(60, 0.5, 1.0), NoteEvent::new(64, 0.5, 0.75)], 1).unwrap();
    let opts = EvalOptions {
        families: vec![MetricFamily::Note, MetricFamily::Frame, MetricFamily::NoteWithOffset],
        offset_sweep: true,
        ..EvalOptions::default()
    };
    let rep = evaluate(&seq, &seq, &clock, &opts).unwrap();
    assert_eq!(rep.note.unwrap().f1, 1.0);
    assert_eq!(rep.frame.unwrap().f1, 1.0);
    assert_eq!(rep.note_with_offset.unwrap().f1, 1.0);
    assert_eq!(rep.offset_sweep.len(), OFFSET_SWEEP.len());
}

#[test]
fn onset_boundary_is_inclusive() {
    let r = NoteSequence::new(vec![NoteEvent::new(60, 0.1, 0.5)], 1).unwrap();
    let at = NoteSequence::new(vec![NoteEvent::new(60, 0.15, 0.5)], 1).unwrap();
    let past = NoteSequence::new(vec![NoteEvent::new(60, 0.1501, 0.5)], 1).unwrap();
    assert_eq!(note_metrics(&r, &at, 0.05).tp, 1);
    assert_eq!(note_metrics(&r, &past, 0.05).tp, 0);
}

#[test]
fn empty_sequences_score_zero_without_nan() {
    let empty = NoteSequence::empty(1);
    let prf = note_metrics(&empty, &empty, DEFAULT_ONSET_TOL);
    assert_eq!((prf.precision, prf.recall, prf.f1), (0.0, 0.0, 0.0));
}
