use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lowest and highest MIDI keys of the 88-key range.
pub const LOWEST_PITCH: u8 = 21;
pub const HIGHEST_PITCH: u8 = 108;
pub const PITCH_COUNT: usize = 88;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoteEvent {
    pub pitch: u8,
    pub onset_s: f64,
    pub offset_s: f64,
    pub instrument: Option<u16>,
    pub velocity: Option<u8>,
}

impl NoteEvent {
    pub fn new(pitch: u8, onset_s: f64, offset_s: f64) -> Self {
        NoteEvent {
            pitch,
            onset_s,
            offset_s,
            instrument: None,
            velocity: None,
        }
    }

    pub fn with_instrument(mut self, instrument: u16) -> Self {
        self.instrument = Some(instrument);
        self
    }

    pub fn with_velocity(mut self, velocity: u8) -> Self {
        self.velocity = Some(velocity);
        self
    }

    pub fn duration(&self) -> f64 {
        self.offset_s - self.onset_s
    }

    fn validate(&self, index: usize, instrument_count: usize) -> Result<()> {
        if !(LOWEST_PITCH..=HIGHEST_PITCH).contains(&self.pitch) {
            return Err(Error::InvalidNote(format!(
                "note #{index}: pitch {} outside [{LOWEST_PITCH}, {HIGHEST_PITCH}]",
                self.pitch
            )));
        }
        if !(self.onset_s.is_finite() && self.offset_s.is_finite()) || self.onset_s < 0.0 {
            return Err(Error::InvalidNote(format!(
                "note #{index}: bad times {}..{}",
                self.onset_s, self.offset_s
            )));
        }
        if self.offset_s <= self.onset_s {
            return Err(Error::InvalidNote(format!(
                "note #{index}: offset {} not after onset {}",
                self.offset_s, self.onset_s
            )));
        }
        if let Some(inst) = self.instrument {
            if inst as usize >= instrument_count {
                return Err(Error::InvalidNote(format!(
                    "note #{index}: instrument {inst} not below {instrument_count}"
                )));
            }
        }
        if let Some(v) = self.velocity {
            if !(1..=127).contains(&v) {
                return Err(Error::InvalidNote(format!("note #{index}: velocity {v}")));
            }
        }
        Ok(())
    }
}

fn note_order(a: &NoteEvent, b: &NoteEvent) -> Ordering {
    a.onset_s
        .total_cmp(&b.onset_s)
        .then(a.pitch.cmp(&b.pitch))
        .then(a.offset_s.total_cmp(&b.offset_s))
        .then(a.instrument.cmp(&b.instrument))
}

/// Notes sorted by `(onset, pitch)`, all with instrument ids below `instrument_count`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoteSequence {
    notes: Vec<NoteEvent>,
    instrument_count: usize,
}

impl Default for NoteSequence {
    fn default() -> Self {
        NoteSequence {
            notes: Vec::new(),
            instrument_count: 1,
        }
    }
}

impl NoteSequence {
    pub fn new(mut notes: Vec<NoteEvent>, instrument_count: usize) -> Result<Self> {
        if instrument_count == 0 {
            return Err(Error::InvalidConfig("instrument_count must be at least 1".into()));
        }
        for (i, n) in notes.iter().enumerate() {
            n.validate(i, instrument_count)?;
        }
        notes.sort_by(note_order);
        Ok(NoteSequence {
            notes,
            instrument_count,
        })
    }

    pub fn empty(instrument_count: usize) -> Self {
        NoteSequence {
            notes: Vec::new(),
            instrument_count: instrument_count.max(1),
        }
    }

    pub fn notes(&self) -> &[NoteEvent] {
        &self.notes
    }

    pub fn into_notes(self) -> Vec<NoteEvent> {
        self.notes
    }

    pub fn len(&self) -> usize {
        self.notes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.notes.is_empty()
    }

    pub fn instrument_count(&self) -> usize {
        self.instrument_count
    }

    /// Latest offset time, zero for an empty sequence.
    pub fn end_time(&self) -> f64 {
        self.notes.iter().map(|n| n.offset_s).fold(0.0, f64::max)
    }

    /// Shifts every note by `semitones`, dropping notes that leave the 88-key range.
    pub fn transposed(&self, semitones: i32) -> NoteSequence {
        let notes = self
            .notes
            .iter()
            .filter_map(|n| {
                let p = n.pitch as i32 + semitones;
                (LOWEST_PITCH as i32..=HIGHEST_PITCH as i32)
                    .contains(&p)
                    .then(|| NoteEvent {
                        pitch: p as u8,
                        ..n.clone()
                    })
            })
            .collect();
        NoteSequence {
            notes,
            instrument_count: self.instrument_count,
        }
    }

    /// Same notes with every time moved by `dt` seconds.
    pub fn translated(&self, dt: f64) -> Result<NoteSequence> {
        let notes = self
            .notes
            .iter()
            .map(|n| NoteEvent {
                onset_s: n.onset_s + dt,
                offset_s: n.offset_s + dt,
                ..n.clone()
            })
            .collect();
        NoteSequence::new(notes, self.instrument_count)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sorts_by_onset_then_pitch() {
        let seq = NoteSequence::new(
            vec![
                NoteEvent::new(64, 1.0, 2.0),
                NoteEvent::new(62, 0.5, 1.0),
                NoteEvent::new(60, 1.0, 1.5),
            ],
            1,
        )
        .unwrap();
        let pitches: Vec<u8> = seq.notes().iter().map(|n| n.pitch).collect();
        assert_eq!(pitches, vec![62, 60, 64]);
    }

    #[test]
    fn rejects_bad_notes() {
        assert!(NoteSequence::new(vec![NoteEvent::new(20, 0.0, 1.0)], 1).is_err());
        assert!(NoteSequence::new(vec![NoteEvent::new(60, 1.0, 1.0)], 1).is_err());
        assert!(NoteSequence::new(vec![NoteEvent::new(60, 0.0, 1.0).with_instrument(2)], 2).is_err());
    }
}
