//! Score-to-performance label generation for note-level transcription.
//!
//! An unaligned score is aligned against a transcriber's activations with
//! DTW, turned into onset/frame/offset targets with per-cell masks, and
//! refined over EM rounds in which the transcriber is retrained on its own
//! improved labels.

pub mod clock;
pub mod descriptor;
pub mod dtw;
pub mod em;
pub mod error;
pub mod labeler;
pub mod matrix;
pub mod metrics;
pub mod midi;
pub mod notes;
pub mod par;
pub mod pipeline;
pub mod roll;
pub mod synth;

pub use clock::FrameClock;
pub use error::{Error, Result};
pub use matrix::Matrix;
pub use notes::{NoteEvent, NoteSequence};
pub use roll::{ActivationStack, ClassLayout, Head, TargetRoll};
