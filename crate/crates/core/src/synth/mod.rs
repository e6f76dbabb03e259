//! Seeded ground-truth factory: scores, simulated performances, oracle
//! predictions, and a small trainable transcriber.

mod toy;

pub use toy::{ToyInput, ToyRender, ToyTrainConfig, ToyTranscriber, TEMPLATE_OFFSETS};

use std::ops::RangeInclusive;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::clock::FrameClock;
use crate::em::{TrainReport, Transcriber, TrainingExample};
use crate::error::{Error, Result};
use crate::notes::{NoteEvent, NoteSequence, HIGHEST_PITCH, LOWEST_PITCH};
use crate::roll::{note_frames, required_frames, ActivationStack, ClassLayout, Head};

/// A generator seeded on `seed` and positioned on an independent `stream`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const SCORE_GAPS: [f64; 4] = [0.125, 0.25, 0.375, 0.5];
const CHORD_PROB: f64 = 0.3;

/// Random score: grid-aligned onsets, chords, at most `polyphony` sounding notes.
pub fn gen_score(n_notes: usize, pitch_range: RangeInclusive<u8>, polyphony: usize, seed: u64) -> Result<NoteSequence> {
    let (lo, hi) = (*pitch_range.start(), *pitch_range.end());
    if n_notes == 0 || polyphony == 0 {
        return Err(Error::InvalidConfig("gen_score needs at least one note and polyphony ≥ 1".into()));
    }
    if lo < LOWEST_PITCH || hi > HIGHEST_PITCH || lo > hi {
        return Err(Error::InvalidConfig(format!("pitch range {lo}..={hi} outside the keyboard")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = 0.25;
    let mut active: Vec<(f64, u8)> = Vec::new();
    let mut notes = Vec::with_capacity(n_notes);
    for i in 0..n_notes {
        if i > 0 && rng.random::<f64>() >= CHORD_PROB {
            t += SCORE_GAPS[rng.random_range(0..SCORE_GAPS.len())];
        }
        let pitch = loop {
            active.retain(|&(off, _)| off > t);
            if active.len() < polyphony {
                let free: Vec<u8> = (lo..=hi).filter(|p| active.iter().all(|&(_, q)| q != *p)).collect();
                if !free.is_empty() {
                    break free[rng.random_range(0..free.len())];
                }
            }
            t = active.iter().map(|&(off, _)| off).fold(f64::INFINITY, f64::min);
        };
        // durations on a 1/16 s grid, 0.25 s to 1.25 s
        let dur = rng.random_range(4..=20) as f64 / 16.0;
        active.push((t + dur, pitch));
        notes.push(NoteEvent::new(pitch, t, t + dur));
    }
    NoteSequence::new(notes, 1)
}

/// Strictly increasing piecewise-linear map, extrapolated with the end slopes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeMap {
    points: Vec<(f64, f64)>,
}

impl TimeMap {
    pub fn identity() -> Self {
        TimeMap {
            points: vec![(0.0, 0.0), (1.0, 1.0)],
        }
    }

    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidConfig("time map needs at least two points".into()));
        }
        for w in points.windows(2) {
            let ((x0, y0), (x1, y1)) = (w[0], w[1]);
            if !(x1 > x0 && y1 > y0) || !x1.is_finite() || !y1.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "time map not strictly increasing at ({x0}, {y0}) → ({x1}, {y1})"
                )));
            }
        }
        Ok(TimeMap { points })
    }

    /// Consecutive segments of `segment_s` seconds with the given slopes, anchored at 0 → 0.
    pub fn from_slopes(segment_s: f64, slopes: &[f64]) -> Result<Self> {
        if !(segment_s > 0.0) || slopes.is_empty() {
            return Err(Error::InvalidConfig("need a positive segment length and at least one slope".into()));
        }
        let mut points = vec![(0.0, 0.0)];
        for (i, &s) in slopes.iter().enumerate() {
            let (_, y) = points[i];
            points.push(((i + 1) as f64 * segment_s, y + s * segment_s));
        }
        Self::new(points)
    }

    /// Random tempo curve covering `duration_s` with slopes drawn from `slopes`.
    pub fn random(duration_s: f64, segment_s: f64, slopes: RangeInclusive<f64>, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = ((duration_s / segment_s).ceil() as usize).max(1);
        let s: Vec<f64> = (0..n).map(|_| rng.random_range(slopes.clone())).collect();
        Self::from_slopes(segment_s, &s)
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn slopes(&self) -> Vec<f64> {
        self.points.windows(2).map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0)).collect()
    }

    pub fn apply(&self, t: f64) -> f64 {
        interpolate(&self.points, t, |p| p)
    }

    pub fn inverse(&self, y: f64) -> f64 {
        interpolate(&self.points, y, |(a, b)| (b, a))
    }
}

fn interpolate(points: &[(f64, f64)], t: f64, view: impl Fn((f64, f64)) -> (f64, f64)) -> f64 {
    let n = points.len();
    let i = points.partition_point(|&p| view(p).0 <= t);
    let seg = i.clamp(1, n - 1) - 1;
    let (x0, y0) = view(points[seg]);
    let (x1, y1) = view(points[seg + 1]);
    y0 + (t - x0) * (y1 - y0) / (x1 - x0)
}

pub const MIN_TEMPO_SLOPE: f64 = 0.7;
pub const MAX_TEMPO_SLOPE: f64 = 1.3;

/// Performance simulation parameters. Rates are per note.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerformanceSim {
    pub tempo_curve: TimeMap,
    pub onset_jitter_std: f64,
    /// Relative duration noise: durations scale by `1 + U(-d, d)`.
    pub duration_jitter: f64,
    pub insert_rate: f64,
    pub delete_rate: f64,
    pub trill_swap_rate: f64,
    /// Probability that a note is followed by an inserted passage that pauses the score.
    pub burst_rate: f64,
    pub burst_notes: usize,
    pub seed: u64,
}

impl PerformanceSim {
    /// Exact playback of the score: identity tempo, no perturbations.
    pub fn exact(seed: u64) -> Self {
        PerformanceSim {
            tempo_curve: TimeMap::identity(),
            onset_jitter_std: 0.0,
            duration_jitter: 0.0,
            insert_rate: 0.0,
            delete_rate: 0.0,
            trill_swap_rate: 0.0,
            burst_rate: 0.0,
            burst_notes: 8,
            seed,
        }
    }

    pub fn new(tempo_curve: TimeMap, seed: u64) -> Result<Self> {
        let sim = PerformanceSim {
            tempo_curve,
            ..Self::exact(seed)
        };
        sim.validate()?;
        Ok(sim)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(s) = self
            .tempo_curve
            .slopes()
            .into_iter()
            .find(|s| !(MIN_TEMPO_SLOPE - 1e-12..=MAX_TEMPO_SLOPE + 1e-12).contains(s))
        {
            return Err(Error::InvalidConfig(format!(
                "tempo slope {s} outside [{MIN_TEMPO_SLOPE}, {MAX_TEMPO_SLOPE}]"
            )));
        }
        for (name, r) in [
            ("insert_rate", self.insert_rate),
            ("delete_rate", self.delete_rate),
            ("trill_swap_rate", self.trill_swap_rate),
            ("burst_rate", self.burst_rate),
        ] {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::InvalidConfig(format!("{name} = {r} is not a probability")));
            }
        }
        if !(self.onset_jitter_std >= 0.0) || !(0.0..=0.5).contains(&self.duration_jitter) {
            return Err(Error::InvalidConfig("jitter must be ≥ 0 and duration jitter ≤ 0.5".into()));
        }
        Ok(())
    }
}

// RNG streams, one per perturbation so each can be replayed on its own.
pub const STREAM_DELETE: u64 = 1;
pub const STREAM_JITTER: u64 = 2;
pub const STREAM_DURATION: u64 = 3;
pub const STREAM_SWAP: u64 = 4;
pub const STREAM_INSERT: u64 = 5;
pub const STREAM_BURST: u64 = 6;

const MIN_DURATION: f64 = 0.03;
const TRILL_WINDOW: f64 = 0.25;
const BURST_STEP: f64 = 0.125;

/// Plays `score` through the simulator; returns the performance and the exact score→performance time map.
///
/// Deletion draws one `f64` per score note from [`STREAM_DELETE`]; a note is
/// dropped when the draw is below `delete_rate`.
pub fn simulate_performance(score: &NoteSequence, sim: &PerformanceSim) -> Result<(NoteSequence, TimeMap)> {
    sim.validate()?;
    let mut del = stream_rng(sim.seed, STREAM_DELETE);
    let mut jit = stream_rng(sim.seed, STREAM_JITTER);
    let mut dur = stream_rng(sim.seed, STREAM_DURATION);
    let curve = &sim.tempo_curve;

    let mut notes: Vec<NoteEvent> = Vec::with_capacity(score.len());
    for n in score.notes() {
        if del.random::<f64>() < sim.delete_rate {
            continue;
        }
        let j = sim.onset_jitter_std * jit.sample::<f64, _>(StandardNormal);
        let u = dur.random_range(-1.0..=1.0) * sim.duration_jitter;
        let (on, off) = (curve.apply(n.onset_s), curve.apply(n.offset_s));
        let onset = (on + j).max(0.0);
        let offset = (off + j + (off - on) * u).max(onset + MIN_DURATION);
        notes.push(NoteEvent { onset_s: onset, offset_s: offset, ..n.clone() });
    }
    notes.sort_by(|a, b| a.onset_s.total_cmp(&b.onset_s).then(a.pitch.cmp(&b.pitch)));

    let mut swap = stream_rng(sim.seed, STREAM_SWAP);
    let mut i = 0;
    while i + 1 < notes.len() {
        let (a, b) = (&notes[i], &notes[i + 1]);
        if a.pitch != b.pitch && a.instrument == b.instrument && b.onset_s - a.onset_s <= TRILL_WINDOW {
            if swap.random::<f64>() < sim.trill_swap_rate {
                let p = notes[i].pitch;
                notes[i].pitch = notes[i + 1].pitch;
                notes[i + 1].pitch = p;
                i += 2;
                continue;
            }
        }
        i += 1;
    }

    let mut ins = stream_rng(sim.seed, STREAM_INSERT);
    let mut extra = Vec::new();
    for n in &notes {
        if ins.random::<f64>() < sim.insert_rate {
            let step: i32 = [-2, -1, 1, 2][ins.random_range(0..4)];
            let pitch = (n.pitch as i32 + step).clamp(LOWEST_PITCH as i32, HIGHEST_PITCH as i32) as u8;
            let onset = n.onset_s + ins.random_range(0.05..0.2);
            let len = ins.random_range(0.08..0.2);
            extra.push(NoteEvent {
                pitch,
                onset_s: onset,
                offset_s: onset + len,
                ..n.clone()
            });
        }
    }
    notes.extend(extra);
    notes.sort_by(|a, b| a.onset_s.total_cmp(&b.onset_s).then(a.pitch.cmp(&b.pitch)));

    let mut warp = curve.clone();
    if sim.burst_rate > 0.0 && sim.burst_notes > 0 {
        let mut rng = stream_rng(sim.seed, STREAM_BURST);
        let mut bursts: Vec<(f64, f64, u8)> = Vec::new(); // (performance time, inserted length, anchor pitch)
        for n in &notes {
            if rng.random::<f64>() < sim.burst_rate {
                bursts.push((n.onset_s + 0.01, sim.burst_notes as f64 * BURST_STEP, n.pitch));
            }
        }
        bursts.dedup_by(|b, a| b.0 == a.0);
        let mut out = Vec::with_capacity(notes.len() + bursts.len() * sim.burst_notes);
        for n in &notes {
            let shift: f64 = bursts.iter().filter(|b| b.0 < n.onset_s).map(|b| b.1).sum();
            out.push(NoteEvent {
                onset_s: n.onset_s + shift,
                offset_s: n.offset_s + shift,
                ..n.clone()
            });
        }
        let mut shift = 0.0;
        for &(at, len, anchor) in &bursts {
            let start = at + shift;
            let mut p = anchor as i32;
            for k in 0..sim.burst_notes {
                p = (p + rng.random_range(-3..=3)).clamp(LOWEST_PITCH as i32, HIGHEST_PITCH as i32);
                let on = start + k as f64 * BURST_STEP;
                out.push(NoteEvent::new(p as u8, on, on + BURST_STEP * 0.9));
            }
            shift += len;
        }
        let jumps: Vec<(f64, f64)> = bursts.iter().map(|b| (curve.inverse(b.0), b.1)).collect();
        warp = with_jumps(curve, &jumps)?;
        notes = out;
    }
    let count = score.instrument_count();
    Ok((NoteSequence::new(notes, count)?, warp))
}

/// `curve` plus a near-vertical rise of `len` seconds at each score time in `jumps`.
fn with_jumps(curve: &TimeMap, jumps: &[(f64, f64)]) -> Result<TimeMap> {
    const EPS: f64 = 1e-6;
    let f = |x: f64| curve.apply(x) + jumps.iter().filter(|j| j.0 < x).map(|j| j.1).sum::<f64>();
    let mut xs: Vec<f64> = curve.points().iter().map(|p| p.0).collect();
    for &(s, _) in jumps {
        xs.extend([s, s + EPS]);
    }
    let last = xs.iter().copied().fold(0.0, f64::max);
    xs.push(last + 1.0);
    xs.sort_by(f64::total_cmp);
    xs.dedup_by(|b, a| *b - *a < EPS / 2.0);
    TimeMap::new(xs.into_iter().map(|x| (x, f(x))).collect())
}

/// Mixes a base seed with an index (splitmix64 finalizer).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Everything needed to generate one score/performance pair from a seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusSpec {
    pub notes: usize,
    pub pitch_lo: u8,
    pub pitch_hi: u8,
    pub polyphony: usize,
    pub slope_lo: f64,
    pub slope_hi: f64,
    pub segment_s: f64,
    pub onset_jitter_std: f64,
    pub duration_jitter: f64,
    pub insert_rate: f64,
    pub delete_rate: f64,
    pub trill_swap_rate: f64,
    pub burst_rate: f64,
}

impl Default for CorpusSpec {
    /// About a minute of four-voice music played from a different edition of the score.
    fn default() -> Self {
        CorpusSpec {
            notes: 260,
            pitch_lo: 33,
            pitch_hi: 96,
            polyphony: 4,
            slope_lo: 0.8,
            slope_hi: 1.25,
            segment_s: 5.0,
            onset_jitter_std: 0.01,
            duration_jitter: 0.0,
            insert_rate: 0.1,
            delete_rate: 0.05,
            trill_swap_rate: 0.02,
            burst_rate: 0.0,
        }
    }
}

impl CorpusSpec {
    /// Tempo warp and onset jitter only; the performance plays exactly the score's notes.
    pub fn warp_only() -> Self {
        CorpusSpec {
            insert_rate: 0.0,
            delete_rate: 0.0,
            trill_swap_rate: 0.0,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthPiece {
    pub score: NoteSequence,
    pub performance: NoteSequence,
    pub warp: TimeMap,
}

pub fn synth_piece(spec: &CorpusSpec, seed: u64) -> Result<SynthPiece> {
    let score = gen_score(spec.notes, spec.pitch_lo..=spec.pitch_hi, spec.polyphony, derive_seed(seed, 1))?;
    let curve = TimeMap::random(
        score.end_time() + spec.segment_s,
        spec.segment_s,
        spec.slope_lo..=spec.slope_hi,
        derive_seed(seed, 2),
    )?;
    let sim = PerformanceSim {
        onset_jitter_std: spec.onset_jitter_std,
        duration_jitter: spec.duration_jitter,
        insert_rate: spec.insert_rate,
        delete_rate: spec.delete_rate,
        trill_swap_rate: spec.trill_swap_rate,
        burst_rate: spec.burst_rate,
        ..PerformanceSim::new(curve, derive_seed(seed, 3))?
    };
    let (performance, warp) = simulate_performance(&score, &sim)?;
    Ok(SynthPiece {
        score,
        performance,
        warp,
    })
}

/// Prediction noise of the oracle transcriber.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleNoise {
    pub miss_rate: f64,
    /// Per frame-cell in the default mode; per note (octave ghost) in equivariant mode.
    pub fp_rate: f64,
    pub prob_noise_std: f64,
    /// Weight of the truth against uniform background noise.
    pub fidelity: f64,
    pub seed: u64,
    /// Noise tied to notes only, so transposing the input transposes the output.
    pub equivariant: bool,
}

impl Default for OracleNoise {
    fn default() -> Self {
        OracleNoise {
            miss_rate: 0.1,
            fp_rate: 1e-5,
            prob_noise_std: 0.05,
            fidelity: 0.8,
            seed: 0,
            equivariant: false,
        }
    }
}

impl OracleNoise {
    pub fn exact() -> Self {
        OracleNoise {
            miss_rate: 0.0,
            fp_rate: 0.0,
            prob_noise_std: 0.0,
            fidelity: 1.0,
            seed: 0,
            equivariant: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("miss_rate", self.miss_rate), ("fp_rate", self.fp_rate), ("fidelity", self.fidelity)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidConfig(format!("{name} = {v} outside [0, 1]")));
            }
        }
        if !(self.prob_noise_std >= 0.0) {
            return Err(Error::InvalidConfig("prob_noise_std must be ≥ 0".into()));
        }
        Ok(())
    }
}

const STREAM_BACKGROUND: u64 = u64::MAX;
const STREAM_FALSE_POSITIVE: u64 = u64::MAX - 1;

/// Transcriber-like probabilities for a known performance, `required_frames` long.
pub fn oracle_predict(
    performance: &NoteSequence,
    clock: &FrameClock,
    layout: ClassLayout,
    noise: &OracleNoise,
) -> Result<ActivationStack> {
    let frames = required_frames(performance, clock).max(1);
    oracle_predict_frames(performance, clock, layout, noise, frames)
}

pub fn oracle_predict_frames(
    performance: &NoteSequence,
    clock: &FrameClock,
    layout: ClassLayout,
    noise: &OracleNoise,
    frames: usize,
) -> Result<ActivationStack> {
    noise.validate()?;
    let f = noise.fidelity as f32;
    let mut stack = ActivationStack::zeros(frames, *clock, layout);
    if !noise.equivariant && f < 1.0 {
        let mut bg = stream_rng(noise.seed, STREAM_BACKGROUND);
        for head in Head::ALL {
            for v in stack.head_mut(head).as_mut_slice() {
                *v = (1.0 - f) * bg.random::<f32>();
            }
        }
    }
    let background = stack.clone();
    let std = noise.prob_noise_std;
    let paint = |stack: &mut ActivationStack, n: &NoteEvent, rng: &mut ChaCha8Rng| -> Result<()> {
        let (on, off) = note_frames(n, clock);
        if off >= frames {
            return Err(Error::shape("oracle frames", off + 1, frames));
        }
        let c = layout.class_index(n.pitch, n.instrument);
        let mut cell = |head: Head, t: usize, rng: &mut ChaCha8Rng| {
            let g: f64 = rng.sample(StandardNormal);
            let p = (1.0 - (std * g).abs()).clamp(0.0, 1.0) as f32;
            let v = f * p + background.head(head).get(t, c);
            let m = stack.head_mut(head);
            if v > m.get(t, c) {
                m.set(t, c, v.min(1.0));
            }
        };
        cell(Head::Onset, on, rng);
        for t in on..off {
            cell(Head::Frame, t, rng);
        }
        cell(Head::Offset, off, rng);
        Ok(())
    };
    for (i, n) in performance.notes().iter().enumerate() {
        // per-note stream: noise follows the note, not its absolute position
        let mut rng = stream_rng(noise.seed, i as u64);
        let missed = rng.random::<f64>() < noise.miss_rate;
        let ghost = rng.random::<f64>() < noise.fp_rate;
        if !missed {
            paint(&mut stack, n, &mut rng)?;
        }
        if noise.equivariant && ghost && n.pitch + 12 <= HIGHEST_PITCH {
            let g = NoteEvent { pitch: n.pitch + 12, ..n.clone() };
            paint(&mut stack, &g, &mut rng)?;
        }
    }
    if !noise.equivariant && noise.fp_rate > 0.0 {
        let mut fp = stream_rng(noise.seed, STREAM_FALSE_POSITIVE);
        for head in Head::ALL {
            for v in stack.head_mut(head).as_mut_slice() {
                if fp.random::<f64>() < noise.fp_rate {
                    *v = v.max(fp.random_range(0.5..=1.0));
                }
            }
        }
    }
    Ok(stack)
}

/// Oracle whose fidelity follows a schedule indexed by completed `train` calls.
#[derive(Clone, Debug)]
pub struct OracleTranscriber {
    pub clock: FrameClock,
    pub layout: ClassLayout,
    pub noise: OracleNoise,
    pub fidelity_schedule: Vec<f64>,
    pub trained: usize,
}

impl OracleTranscriber {
    pub fn new(clock: FrameClock, layout: ClassLayout, noise: OracleNoise, fidelity_schedule: Vec<f64>) -> Self {
        OracleTranscriber {
            clock,
            layout,
            noise,
            fidelity_schedule,
            trained: 0,
        }
    }

    pub fn current_noise(&self) -> OracleNoise {
        let mut n = self.noise.clone();
        if let Some(&f) = self
            .fidelity_schedule
            .get(self.trained.min(self.fidelity_schedule.len().saturating_sub(1)))
        {
            n.fidelity = f;
        }
        n
    }
}

impl Transcriber for OracleTranscriber {
    type Input = NoteSequence;

    fn predict(&self, performance: &NoteSequence, pitch_shift: i32) -> Result<ActivationStack> {
        let perf = if pitch_shift == 0 {
            performance.clone()
        } else {
            performance.transposed(pitch_shift)
        };
        oracle_predict(&perf, &self.clock, self.layout, &self.current_noise())
    }

    fn train(&mut self, _examples: &[TrainingExample<'_, NoteSequence>], steps: usize) -> Result<TrainReport> {
        self.trained += 1;
        Ok(TrainReport {
            steps,
            ..TrainReport::default()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roll::{rasterize_fit, shift_stack};

    #[test]
    fn score_determinism_and_size() {
        let a = gen_score(1, 40..=80, 4, 0).unwrap();
        assert_eq!(a.len(), 1);
        let b = gen_score(200, 40..=80, 4, 9).unwrap();
        assert_eq!(b, gen_score(200, 40..=80, 4, 9).unwrap());
        assert!(b.notes().iter().all(|n| (40..=80).contains(&n.pitch)));
    }

    #[test]
    fn time_map_roundtrip() {
        let m = TimeMap::from_slopes(2.0, &[0.8, 1.2, 1.0]).unwrap();
        for t in [0.0, 1.0, 3.3, 5.9, 10.0] {
            assert!((m.inverse(m.apply(t)) - t).abs() < 1e-9);
        }
        assert!(TimeMap::new(vec![(0.0, 0.0), (1.0, 0.0)]).is_err());
    }

    #[test]
    fn slope_bound_enforced() {
        let steep = TimeMap::from_slopes(1.0, &[2.0]).unwrap();
        assert!(PerformanceSim::new(steep, 0).is_err());
        let ok = TimeMap::from_slopes(1.0, &[0.7, 1.3]).unwrap();
        assert!(PerformanceSim::new(ok, 0).is_ok());
    }

    #[test]
    fn exact_sim_is_identity() {
        let score = gen_score(50, 40..=80, 3, 1).unwrap();
        let (perf, warp) = simulate_performance(&score, &PerformanceSim::exact(3)).unwrap();
        assert_eq!(perf, score);
        assert_eq!(warp, TimeMap::identity());
    }

    #[test]
    fn bursts_insert_time() {
        let score = gen_score(100, 40..=80, 3, 2).unwrap();
        let sim = PerformanceSim {
            burst_rate: 0.05,
            ..PerformanceSim::exact(5)
        };
        let (perf, warp) = simulate_performance(&score, &sim).unwrap();
        assert!(perf.len() > score.len());
        assert!(perf.end_time() > score.end_time());
        assert!((warp.apply(score.end_time()) - perf.end_time()).abs() < 1.0);
    }

    #[test]
    fn exact_oracle_equals_truth() {
        let perf = gen_score(30, 30..=90, 4, 3).unwrap();
        let clock = FrameClock::default();
        let layout = ClassLayout::pitch_only();
        let stack = oracle_predict(&perf, &clock, layout, &OracleNoise::exact()).unwrap();
        let truth = ActivationStack::from_roll(&rasterize_fit(&perf, &clock, layout));
        assert_eq!(stack.onset, truth.onset);
        assert_eq!(stack.frame, truth.frame);
        // the oracle still reports offsets that the truth roll drops under frame cells
        for (i, (&o, &t)) in stack.offset.as_slice().iter().zip(truth.offset.as_slice()).enumerate() {
            if truth.frame.as_slice()[i] == 0.0 {
                assert_eq!(o, t);
            }
        }
        let all_missed = OracleNoise {
            miss_rate: 1.0,
            ..OracleNoise::exact()
        };
        let stack = oracle_predict(&perf, &clock, layout, &all_missed).unwrap();
        assert!(Head::ALL.iter().all(|&h| stack.head(h).as_slice().iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn equivariant_oracle_commutes_with_shift() {
        let perf = gen_score(60, 40..=80, 4, 4).unwrap();
        let clock = FrameClock::default();
        let layout = ClassLayout::pitch_only();
        let noise = OracleNoise {
            miss_rate: 0.2,
            fp_rate: 0.1,
            prob_noise_std: 0.2,
            fidelity: 0.9,
            seed: 11,
            equivariant: true,
        };
        let base = oracle_predict(&perf, &clock, layout, &noise).unwrap();
        for k in -5..=5 {
            let shifted = oracle_predict(&perf.transposed(k), &clock, layout, &noise).unwrap();
            assert_eq!(shifted, shift_stack(&base, k), "k = {k}");
        }
    }
}
