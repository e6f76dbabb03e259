use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("note #{index} (pitch {pitch}, {onset_s:.3}s-{offset_s:.3}s) ends at frame {offset_frame}, outside a roll of {length} frames")]
    NoteOutOfRange {
        index: usize,
        pitch: u8,
        onset_s: f64,
        offset_s: f64,
        offset_frame: usize,
        length: usize,
    },

    #[error("invalid note: {0}")]
    InvalidNote(String),

    #[error("malformed MIDI at byte {offset}: {message}")]
    Midi { offset: usize, message: String },

    #[error("unsupported MIDI file: {0}")]
    UnsupportedMidi(String),

    #[error("cannot align an empty sequence")]
    EmptySequence,

    #[error("band of width {band} does not connect (0, 0) to ({last_source}, {last_target})")]
    BandTooNarrow {
        band: usize,
        last_source: usize,
        last_target: usize,
    },

    #[error("shape mismatch in {context}: expected {expected}, found {found}")]
    ShapeMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("note #{0} has no instrument id")]
    MissingInstrument(usize),

    #[error("training diverged at step {step}: loss = {loss}")]
    DivergentLoss { step: usize, loss: f64 },

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("bad {kind} file: {message}")]
    Format { kind: &'static str, message: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub fn shape(context: &'static str, expected: impl ToString, found: impl ToString) -> Self {
        Error::ShapeMismatch {
            context,
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    pub fn format(kind: &'static str, message: impl Into<String>) -> Self {
        Error::Format {
            kind,
            message: message.into(),
        }
    }
}
