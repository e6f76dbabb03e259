//! Piano-roll targets, activation stacks and the transforms between them and notes.

use serde::{Deserialize, Serialize};

use crate::clock::FrameClock;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::notes::{NoteEvent, NoteSequence, LOWEST_PITCH, PITCH_COUNT};

/// Largest pitch shift used for label augmentation, in semitones.
pub const MAX_PITCH_SHIFT: i32 = 5;

/// The three detection heads, in file/storage order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Head {
    Onset,
    Frame,
    Offset,
}

impl Head {
    pub const ALL: [Head; 3] = [Head::Onset, Head::Frame, Head::Offset];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Class axis layout: contiguous 88-key blocks, one per instrument.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ClassLayout {
    instruments: usize,
}

impl Default for ClassLayout {
    fn default() -> Self {
        ClassLayout { instruments: 1 }
    }
}

impl ClassLayout {
    pub fn new(instruments: usize) -> Result<Self> {
        if instruments == 0 {
            return Err(Error::InvalidConfig("class layout needs at least one instrument".into()));
        }
        Ok(ClassLayout { instruments })
    }

    /// Single block, instrument ids ignored.
    pub fn pitch_only() -> Self {
        ClassLayout { instruments: 1 }
    }

    pub fn instruments(&self) -> usize {
        self.instruments
    }

    pub fn classes(&self) -> usize {
        self.instruments * PITCH_COUNT
    }

    pub fn is_instrument_sensitive(&self) -> bool {
        self.instruments > 1
    }

    /// `instrument * 88 + (pitch - 21)`; the instrument is ignored for a single block.
    pub fn class_index(&self, pitch: u8, instrument: Option<u16>) -> usize {
        let block = if self.instruments > 1 {
            instrument.unwrap_or(0) as usize
        } else {
            0
        };
        block * PITCH_COUNT + (pitch - LOWEST_PITCH) as usize
    }

    /// Inverse of [`class_index`](Self::class_index).
    pub fn pitch_of(&self, class: usize) -> (u8, Option<u16>) {
        let pitch = LOWEST_PITCH + (class % PITCH_COUNT) as u8;
        let inst = (self.instruments > 1).then_some((class / PITCH_COUNT) as u16);
        (pitch, inst)
    }

    fn describe(&self, frames: usize) -> String {
        format!("{frames}x{}", self.classes())
    }
}

/// Binary onset/frame/offset targets rasterized from notes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TargetRoll {
    pub onset: Matrix<u8>,
    pub frame: Matrix<u8>,
    pub offset: Matrix<u8>,
    pub clock: FrameClock,
    pub layout: ClassLayout,
}

impl TargetRoll {
    pub fn zeros(frames: usize, clock: FrameClock, layout: ClassLayout) -> Self {
        let z = Matrix::zeros(frames, layout.classes());
        TargetRoll {
            onset: z.clone(),
            frame: z.clone(),
            offset: z,
            clock,
            layout,
        }
    }

    pub fn frames(&self) -> usize {
        self.onset.rows()
    }

    pub fn classes(&self) -> usize {
        self.onset.cols()
    }

    pub fn head(&self, head: Head) -> &Matrix<u8> {
        match head {
            Head::Onset => &self.onset,
            Head::Frame => &self.frame,
            Head::Offset => &self.offset,
        }
    }

    pub fn head_mut(&mut self, head: Head) -> &mut Matrix<u8> {
        match head {
            Head::Onset => &mut self.onset,
            Head::Frame => &mut self.frame,
            Head::Offset => &mut self.offset,
        }
    }

    pub fn active_count(&self, head: Head) -> usize {
        self.head(head).as_slice().iter().filter(|&&v| v != 0).count()
    }

    /// Reads the roll back into notes: each onset cell starts a note that runs
    /// through the following frame cells until the run breaks or another onset begins.
    pub fn to_notes(&self) -> NoteSequence {
        let mut notes = Vec::new();
        for c in 0..self.classes() {
            let (pitch, instrument) = self.layout.pitch_of(c);
            for t in 0..self.frames() {
                if self.onset.get(t, c) == 0 {
                    continue;
                }
                let mut end = t + 1;
                while end < self.frames() && self.frame.get(end, c) != 0 && self.onset.get(end, c) == 0 {
                    end += 1;
                }
                notes.push(NoteEvent {
                    pitch,
                    onset_s: self.clock.seconds_of(t),
                    offset_s: self.clock.seconds_of(end),
                    instrument,
                    velocity: None,
                });
            }
        }
        NoteSequence::new(notes, self.layout.instruments()).expect("roll notes are valid by construction")
    }
}

/// Per-frame probabilities for the three heads.
#[derive(Clone, Debug, PartialEq)]
pub struct ActivationStack {
    pub onset: Matrix<f32>,
    pub frame: Matrix<f32>,
    pub offset: Matrix<f32>,
    pub clock: FrameClock,
    pub layout: ClassLayout,
}

impl ActivationStack {
    pub fn new(
        onset: Matrix<f32>,
        frame: Matrix<f32>,
        offset: Matrix<f32>,
        clock: FrameClock,
        layout: ClassLayout,
    ) -> Result<Self> {
        let shape = onset.shape();
        if shape.1 != layout.classes() {
            return Err(Error::shape("activation stack", layout.describe(shape.0), format!("{}x{}", shape.0, shape.1)));
        }
        for m in [&frame, &offset] {
            if m.shape() != shape {
                return Err(Error::shape(
                    "activation stack heads",
                    format!("{}x{}", shape.0, shape.1),
                    format!("{}x{}", m.rows(), m.cols()),
                ));
            }
        }
        for m in [&onset, &frame, &offset] {
            if let Some(bad) = m.as_slice().iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::InvalidConfig(format!("activation {bad} outside [0, 1]")));
            }
        }
        Ok(ActivationStack {
            onset,
            frame,
            offset,
            clock,
            layout,
        })
    }

    pub fn zeros(frames: usize, clock: FrameClock, layout: ClassLayout) -> Self {
        let z = Matrix::zeros(frames, layout.classes());
        ActivationStack {
            onset: z.clone(),
            frame: z.clone(),
            offset: z,
            clock,
            layout,
        }
    }

    /// The roll itself read as probabilities 0/1.
    pub fn from_roll(roll: &TargetRoll) -> Self {
        let f = |m: &Matrix<u8>| m.map(|v| v as f32);
        ActivationStack {
            onset: f(&roll.onset),
            frame: f(&roll.frame),
            offset: f(&roll.offset),
            clock: roll.clock,
            layout: roll.layout,
        }
    }

    pub fn frames(&self) -> usize {
        self.onset.rows()
    }

    pub fn classes(&self) -> usize {
        self.onset.cols()
    }

    pub fn head(&self, head: Head) -> &Matrix<f32> {
        match head {
            Head::Onset => &self.onset,
            Head::Frame => &self.frame,
            Head::Offset => &self.offset,
        }
    }

    pub fn head_mut(&mut self, head: Head) -> &mut Matrix<f32> {
        match head {
            Head::Onset => &mut self.onset,
            Head::Frame => &mut self.frame,
            Head::Offset => &mut self.offset,
        }
    }

    /// Binarizes every head at `threshold` (strictly greater is active).
    pub fn threshold(&self, threshold: f32) -> TargetRoll {
        let f = |m: &Matrix<f32>| m.map(|p| u8::from(p > threshold));
        TargetRoll {
            onset: f(&self.onset),
            frame: f(&self.frame),
            offset: f(&self.offset),
            clock: self.clock,
            layout: self.layout,
        }
    }

    /// Note decoding for predictions: a note starts where the onset
    /// probability rises above `onset_threshold` and lasts while either the
    /// frame or onset probability stays above `frame_threshold`.
    pub fn decode_notes(&self, onset_threshold: f32, frame_threshold: f32) -> NoteSequence {
        let mut notes = Vec::new();
        let frames = self.frames();
        for c in 0..self.classes() {
            let (pitch, instrument) = self.layout.pitch_of(c);
            let rising = |t: usize| {
                self.onset.get(t, c) > onset_threshold && (t == 0 || self.onset.get(t - 1, c) <= onset_threshold)
            };
            let mut t = 0;
            while t < frames {
                if !rising(t) {
                    t += 1;
                    continue;
                }
                let mut end = t + 1;
                while end < frames
                    && !rising(end)
                    && (self.frame.get(end, c) > frame_threshold || self.onset.get(end, c) > onset_threshold)
                {
                    end += 1;
                }
                notes.push(NoteEvent {
                    pitch,
                    onset_s: self.clock.seconds_of(t),
                    offset_s: self.clock.seconds_of(end),
                    instrument,
                    velocity: None,
                });
                t = end;
            }
        }
        NoteSequence::new(notes, self.layout.instruments()).expect("decoded notes are valid by construction")
    }
}

/// Smallest roll length that holds every note of `seq`, offset frame included.
pub fn required_frames(seq: &NoteSequence, clock: &FrameClock) -> usize {
    seq.notes()
        .iter()
        .map(|n| note_frames(n, clock).1 + 1)
        .max()
        .unwrap_or(0)
}

/// Onset and offset frame of a note; zero-length notes are widened to one frame.
pub fn note_frames(note: &NoteEvent, clock: &FrameClock) -> (usize, usize) {
    let on = clock.frame_of(note.onset_s);
    let off = clock.frame_of(note.offset_s).max(on + 1);
    (on, off)
}

/// Rasterizes notes into onset/frame/offset targets.
///
/// The onset frame and offset frame are the rounded note boundaries; frames
/// cover `[onset, offset)` and the offset head marks the offset frame itself.
/// As in label assignment, a frame cell outranks an offset cell, so an offset
/// falling inside another note of the same class is dropped.
pub fn rasterize(
    seq: &NoteSequence,
    clock: &FrameClock,
    layout: ClassLayout,
    length_frames: usize,
) -> Result<TargetRoll> {
    let mut roll = TargetRoll::zeros(length_frames, *clock, layout);
    for (index, note) in seq.notes().iter().enumerate() {
        let (on, off) = note_frames(note, clock);
        if off >= length_frames {
            return Err(Error::NoteOutOfRange {
                index,
                pitch: note.pitch,
                onset_s: note.onset_s,
                offset_s: note.offset_s,
                offset_frame: off,
                length: length_frames,
            });
        }
        let c = layout.class_index(note.pitch, note.instrument);
        roll.onset.set(on, c, 1);
        for t in on..off {
            roll.frame.set(t, c, 1);
        }
        roll.offset.set(off, c, 1);
    }
    for (o, &f) in roll.offset.as_mut_slice().iter_mut().zip(roll.frame.as_slice()) {
        if f == 1 {
            *o = 0;
        }
    }
    Ok(roll)
}

/// Rasterizes into a roll just long enough for the sequence.
pub fn rasterize_fit(seq: &NoteSequence, clock: &FrameClock, layout: ClassLayout) -> TargetRoll {
    let frames = required_frames(seq, clock).max(1);
    rasterize(seq, clock, layout, frames).expect("fitted length holds every note")
}

/// Cells lost at the keyboard edges by a pitch shift, per head.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ShiftDrops {
    pub onset: usize,
    pub frame: usize,
    pub offset: usize,
}

impl ShiftDrops {
    pub fn total(&self) -> usize {
        self.onset + self.frame + self.offset
    }
}

/// Moves every column `semitones` keys up within its instrument block.
/// Columns leaving the block are dropped; vacated columns take `fill`.
/// Returns the shifted matrix and the number of dropped cells that differed from `fill`.
pub fn shift_columns<T: Copy + PartialEq>(
    m: &Matrix<T>,
    layout: ClassLayout,
    semitones: i32,
    fill: T,
) -> (Matrix<T>, usize) {
    let mut out = Matrix::filled(m.rows(), m.cols(), fill);
    let mut dropped = 0;
    for t in 0..m.rows() {
        let src = m.row(t);
        let dst = out.row_mut(t);
        for block in 0..layout.instruments() {
            let base = block * PITCH_COUNT;
            for k in 0..PITCH_COUNT {
                let v = src[base + k];
                let target = k as i32 + semitones;
                if (0..PITCH_COUNT as i32).contains(&target) {
                    dst[base + target as usize] = v;
                } else if v != fill {
                    dropped += 1;
                }
            }
        }
    }
    (out, dropped)
}

/// Transposes a roll's labels by `semitones` (|semitones| ≤ 5).
///
/// # Panics
/// If the shift exceeds [`MAX_PITCH_SHIFT`].
pub fn shift_labels(roll: &TargetRoll, semitones: i32) -> (TargetRoll, ShiftDrops) {
    assert!(semitones.abs() <= MAX_PITCH_SHIFT, "pitch shift {semitones} out of range");
    let (onset, d_on) = shift_columns(&roll.onset, roll.layout, semitones, 0);
    let (frame, d_fr) = shift_columns(&roll.frame, roll.layout, semitones, 0);
    let (offset, d_off) = shift_columns(&roll.offset, roll.layout, semitones, 0);
    (
        TargetRoll {
            onset,
            frame,
            offset,
            clock: roll.clock,
            layout: roll.layout,
        },
        ShiftDrops {
            onset: d_on,
            frame: d_fr,
            offset: d_off,
        },
    )
}

/// Transposes predictions by `semitones`; vacated classes read as probability 0.
pub fn shift_stack(stack: &ActivationStack, semitones: i32) -> ActivationStack {
    let s = |m: &Matrix<f32>| shift_columns(m, stack.layout, semitones, 0.0).0;
    ActivationStack {
        onset: s(&stack.onset),
        frame: s(&stack.frame),
        offset: s(&stack.offset),
        clock: stack.clock,
        layout: stack.layout,
    }
}
