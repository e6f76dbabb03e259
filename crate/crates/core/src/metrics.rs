//! Note-, frame-, offset- and instrument-level transcription scores.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::notes::{NoteEvent, NoteSequence};
use crate::par::Parallelism;
use crate::roll::TargetRoll;

pub const DEFAULT_ONSET_TOL: f64 = 0.05;
pub const DEFAULT_OFFSET_TOL_S: f64 = 0.05;
pub const DEFAULT_OFFSET_TOL_PCT: f64 = 0.20;

/// Tolerance grid of the offset sweep: `(seconds, fraction of reference duration)`.
pub const OFFSET_SWEEP: [(f64, f64); 10] = [
    (0.05, 0.20),
    (0.25, 0.20),
    (0.5, 0.20),
    (1.0, 0.20),
    (2.0, 0.20),
    (0.05, 0.40),
    (0.05, 0.50),
    (0.05, 1.00),
    (0.05, 2.00),
    (0.05, 3.00),
];

// Distances are compared after rounding so that frame-quantized times sitting
// exactly on a tolerance boundary match regardless of float noise.
const DECIMALS: f64 = 1e7;

#[inline]
pub fn rounded_distance(a: f64, b: f64) -> f64 {
    ((a - b).abs() * DECIMALS).round() / DECIMALS
}

/// Precision/recall/F1 with the counts behind them.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Prf {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
        let recall = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Prf {
            precision,
            recall,
            f1,
            tp,
            fp,
            fn_,
        }
    }

    /// Count-summed combination of two results.
    pub fn merge(&self, other: &Prf) -> Prf {
        Prf::from_counts(self.tp + other.tp, self.fp + other.fp, self.fn_ + other.fn_)
    }
}

/// What a reference/estimate pair must share to count as a hit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatchCriteria {
    pub onset_tol: f64,
    /// `(seconds, fraction)`: offsets must agree within `max(seconds, fraction · ref duration)`.
    pub offset_tol: Option<(f64, f64)>,
    pub instrument: bool,
}

impl MatchCriteria {
    pub fn onset(onset_tol: f64) -> Self {
        MatchCriteria {
            onset_tol,
            offset_tol: None,
            instrument: false,
        }
    }

    pub fn accepts(&self, r: &NoteEvent, e: &NoteEvent) -> bool {
        if r.pitch != e.pitch || rounded_distance(r.onset_s, e.onset_s) > self.onset_tol {
            return false;
        }
        if self.instrument && r.instrument != e.instrument {
            return false;
        }
        if let Some((secs, frac)) = self.offset_tol {
            let tol = (secs.max(frac * r.duration()) * DECIMALS).round() / DECIMALS;
            if rounded_distance(r.offset_s, e.offset_s) > tol {
                return false;
            }
        }
        true
    }
}

/// Maximum-cardinality one-to-one matching under `criteria`, as `(ref, est)` index pairs.
///
/// Candidates are tried nearest-onset first (then lowest pitch, then index),
/// so the chosen pairs are deterministic.
pub fn match_notes(reference: &[NoteEvent], estimate: &[NoteEvent], criteria: &MatchCriteria) -> Vec<(usize, usize)> {
    // estimates sorted by onset for windowed candidate lookup
    let mut by_onset: Vec<usize> = (0..estimate.len()).collect();
    by_onset.sort_by(|&a, &b| estimate[a].onset_s.total_cmp(&estimate[b].onset_s).then(a.cmp(&b)));
    let onsets: Vec<f64> = by_onset.iter().map(|&i| estimate[i].onset_s).collect();

    let slack = criteria.onset_tol + 1.0 / DECIMALS;
    let adjacency: Vec<Vec<usize>> = reference
        .iter()
        .map(|r| {
            let lo = onsets.partition_point(|&o| o < r.onset_s - slack);
            let hi = onsets.partition_point(|&o| o <= r.onset_s + slack);
            let mut cands: Vec<usize> = by_onset[lo..hi]
                .iter()
                .copied()
                .filter(|&e| criteria.accepts(r, &estimate[e]))
                .collect();
            cands.sort_by(|&a, &b| {
                let (ea, eb) = (&estimate[a], &estimate[b]);
                (ea.onset_s - r.onset_s)
                    .abs()
                    .total_cmp(&(eb.onset_s - r.onset_s).abs())
                    .then(ea.pitch.cmp(&eb.pitch))
                    .then(a.cmp(&b))
            });
            cands
        })
        .collect();

    let mut est_owner: Vec<Option<usize>> = vec![None; estimate.len()];
    let mut seen = vec![usize::MAX; estimate.len()];
    for r in 0..reference.len() {
        augment(r, r, &adjacency, &mut est_owner, &mut seen);
    }
    let mut pairs: Vec<(usize, usize)> = est_owner
        .iter()
        .enumerate()
        .filter_map(|(e, owner)| owner.map(|r| (r, e)))
        .collect();
    pairs.sort_unstable();
    pairs
}

/// Kuhn's augmenting path search from reference `r`.
fn augment(
    r: usize,
    round: usize,
    adjacency: &[Vec<usize>],
    owner: &mut [Option<usize>],
    seen: &mut [usize],
) -> bool {
    for &e in &adjacency[r] {
        if seen[e] == round {
            continue;
        }
        seen[e] = round;
        if owner[e].is_none_or(|other| augment(other, round, adjacency, owner, seen)) {
            owner[e] = Some(r);
            return true;
        }
    }
    false
}

fn score_matching(reference: &NoteSequence, estimate: &NoteSequence, criteria: &MatchCriteria) -> Prf {
    let tp = match_notes(reference.notes(), estimate.notes(), criteria).len();
    Prf::from_counts(tp, estimate.len() - tp, reference.len() - tp)
}

pub fn note_metrics(reference: &NoteSequence, estimate: &NoteSequence, onset_tol: f64) -> Prf {
    score_matching(reference, estimate, &MatchCriteria::onset(onset_tol))
}

pub fn note_with_offset_metrics(
    reference: &NoteSequence,
    estimate: &NoteSequence,
    onset_tol: f64,
    offset_tol_s: f64,
    offset_tol_pct: f64,
) -> Prf {
    let criteria = MatchCriteria {
        offset_tol: Some((offset_tol_s, offset_tol_pct)),
        ..MatchCriteria::onset(onset_tol)
    };
    score_matching(reference, estimate, &criteria)
}

pub fn note_with_instrument_metrics(reference: &NoteSequence, estimate: &NoteSequence, onset_tol: f64) -> Result<Prf> {
    for seq in [reference, estimate] {
        if let Some(i) = seq.notes().iter().position(|n| n.instrument.is_none()) {
            return Err(Error::MissingInstrument(i));
        }
    }
    let criteria = MatchCriteria {
        instrument: true,
        ..MatchCriteria::onset(onset_tol)
    };
    Ok(score_matching(reference, estimate, &criteria))
}

/// Cell-wise scores on the frame head.
pub fn frame_metrics(reference: &TargetRoll, estimate: &TargetRoll) -> Result<Prf> {
    if reference.frame.shape() != estimate.frame.shape() || reference.clock != estimate.clock {
        return Err(Error::shape(
            "frame metrics",
            format!("{:?}", reference.frame.shape()),
            format!("{:?}", estimate.frame.shape()),
        ));
    }
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (&r, &e) in reference.frame.as_slice().iter().zip(estimate.frame.as_slice()) {
        match (r != 0, e != 0) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fn_ += 1,
            _ => {}
        }
    }
    Ok(Prf::from_counts(tp, fp, fn_))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricFamily {
    Note,
    Frame,
    NoteWithOffset,
    NoteWithInstrument,
}

impl MetricFamily {
    pub fn parse(name: &str) -> Option<Self> {
        match name.trim() {
            "note" => Some(MetricFamily::Note),
            "frame" => Some(MetricFamily::Frame),
            "offset" | "note_with_offset" => Some(MetricFamily::NoteWithOffset),
            "instrument" | "note_with_instrument" => Some(MetricFamily::NoteWithInstrument),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub offset_tol_s: f64,
    pub offset_tol_pct: f64,
    pub scores: Prf,
}

/// Scores for one reference/estimate pair.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<Prf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frame: Option<Prf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note_with_offset: Option<Prf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note_with_instrument: Option<Prf>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub offset_sweep: Vec<SweepEntry>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalOptions {
    pub families: Vec<MetricFamily>,
    pub onset_tol: f64,
    pub offset_tol_s: f64,
    pub offset_tol_pct: f64,
    pub offset_sweep: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            families: vec![MetricFamily::Note, MetricFamily::Frame, MetricFamily::NoteWithOffset],
            onset_tol: DEFAULT_ONSET_TOL,
            offset_tol_s: DEFAULT_OFFSET_TOL_S,
            offset_tol_pct: DEFAULT_OFFSET_TOL_PCT,
            offset_sweep: false,
        }
    }
}

/// Evaluates the requested families; frame scores use rolls rasterized on `clock`.
pub fn evaluate(
    reference: &NoteSequence,
    estimate: &NoteSequence,
    clock: &crate::clock::FrameClock,
    opts: &EvalOptions,
) -> Result<MetricsReport> {
    let mut report = MetricsReport::default();
    for family in &opts.families {
        match family {
            MetricFamily::Note => report.note = Some(note_metrics(reference, estimate, opts.onset_tol)),
            MetricFamily::NoteWithOffset => {
                report.note_with_offset = Some(note_with_offset_metrics(
                    reference,
                    estimate,
                    opts.onset_tol,
                    opts.offset_tol_s,
                    opts.offset_tol_pct,
                ))
            }
            MetricFamily::NoteWithInstrument => {
                report.note_with_instrument = Some(note_with_instrument_metrics(reference, estimate, opts.onset_tol)?)
            }
            MetricFamily::Frame => {
                let layout = crate::roll::ClassLayout::pitch_only();
                let frames = crate::roll::required_frames(reference, clock)
                    .max(crate::roll::required_frames(estimate, clock))
                    .max(1);
                let r = crate::roll::rasterize(&strip_instruments(reference), clock, layout, frames)?;
                let e = crate::roll::rasterize(&strip_instruments(estimate), clock, layout, frames)?;
                report.frame = Some(frame_metrics(&r, &e)?);
            }
        }
    }
    if opts.offset_sweep {
        report.offset_sweep = OFFSET_SWEEP
            .iter()
            .map(|&(s, p)| SweepEntry {
                offset_tol_s: s,
                offset_tol_pct: p,
                scores: note_with_offset_metrics(reference, estimate, opts.onset_tol, s, p),
            })
            .collect();
    }
    Ok(report)
}

fn strip_instruments(seq: &NoteSequence) -> NoteSequence {
    let notes = seq
        .notes()
        .iter()
        .map(|n| NoteEvent {
            instrument: None,
            ..n.clone()
        })
        .collect();
    NoteSequence::new(notes, 1).expect("stripping instruments keeps notes valid")
}

/// Micro (count-summed) and macro (per-piece mean) aggregates of one family.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub micro: Prf,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub pieces: usize,
}

impl Aggregate {
    pub fn from_pieces<'a>(items: impl IntoIterator<Item = &'a Prf>) -> Self {
        let mut agg = Aggregate::default();
        for p in items {
            agg.micro = agg.micro.merge(p);
            agg.macro_precision += p.precision;
            agg.macro_recall += p.recall;
            agg.macro_f1 += p.f1;
            agg.pieces += 1;
        }
        if agg.pieces > 0 {
            let n = agg.pieces as f64;
            agg.macro_precision /= n;
            agg.macro_recall /= n;
            agg.macro_f1 /= n;
        }
        agg
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusReport {
    pub pieces: Vec<MetricsReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<Aggregate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frame: Option<Aggregate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note_with_offset: Option<Aggregate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note_with_instrument: Option<Aggregate>,
}

/// Scores many pieces (in parallel when enabled) and aggregates them both ways.
pub fn evaluate_corpus(
    pairs: &[(NoteSequence, NoteSequence)],
    clock: &crate::clock::FrameClock,
    opts: &EvalOptions,
    par: Parallelism,
) -> Result<CorpusReport> {
    let pieces = par
        .map(pairs, |(r, e)| evaluate(r, e, clock, opts))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let agg = |f: fn(&MetricsReport) -> Option<Prf>| {
        let v: Vec<Prf> = pieces.iter().filter_map(f).collect();
        (!v.is_empty()).then(|| Aggregate::from_pieces(&v))
    };
    Ok(CorpusReport {
        note: agg(|r| r.note),
        frame: agg(|r| r.frame),
        note_with_offset: agg(|r| r.note_with_offset),
        note_with_instrument: agg(|r| r.note_with_instrument),
        pieces,
    })
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<22} {:>9} {:>9} {:>9} {:>7} {:>7} {:>7}", "metric", "precision", "recall", "f1", "tp", "fp", "fn")?;
        let rows = [
            ("note", self.note),
            ("frame", self.frame),
            ("note_with_offset", self.note_with_offset),
            ("note_with_instrument", self.note_with_instrument),
        ];
        for (name, p) in rows {
            if let Some(p) = p {
                write_row(f, name, &p)?;
            }
        }
        for s in &self.offset_sweep {
            let name = format!("offset {:.2}s/{:.0}%", s.offset_tol_s, s.offset_tol_pct * 100.0);
            write_row(f, &name, &s.scores)?;
        }
        Ok(())
    }
}

fn write_row(f: &mut fmt::Formatter<'_>, name: &str, p: &Prf) -> fmt::Result {
    writeln!(
        f,
        "{:<22} {:>9.4} {:>9.4} {:>9.4} {:>7} {:>7} {:>7}",
        name, p.precision, p.recall, p.f1, p.tp, p.fp, p.fn_
    )
}
