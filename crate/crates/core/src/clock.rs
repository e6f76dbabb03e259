use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Analysis clock: frames advance by `hop` samples at `sample_rate` Hz.
///
/// The frame rate is kept as the exact rational `sample_rate / hop`
/// (31.25 frames/s at the 16 kHz / 512 defaults).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FrameClock {
    sample_rate: u32,
    hop: u32,
}

impl Default for FrameClock {
    fn default() -> Self {
        FrameClock {
            sample_rate: 16_000,
            hop: 512,
        }
    }
}

impl FrameClock {
    pub fn new(sample_rate: u32, hop: u32) -> Result<Self> {
        if sample_rate == 0 || hop == 0 {
            return Err(Error::InvalidConfig(format!(
                "frame clock needs positive sample rate and hop, got {sample_rate}/{hop}"
            )));
        }
        Ok(FrameClock { sample_rate, hop })
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn hop(&self) -> u32 {
        self.hop
    }

    pub fn fps(&self) -> f64 {
        self.sample_rate as f64 / self.hop as f64
    }

    /// Frame index nearest to `t_s`; halves round away from zero.
    pub fn frame_of(&self, t_s: f64) -> usize {
        debug_assert!(t_s >= 0.0, "negative time {t_s}");
        (t_s.max(0.0) * self.sample_rate as f64 / self.hop as f64).round() as usize
    }

    /// Start time of `frame` in seconds.
    pub fn seconds_of(&self, frame: usize) -> f64 {
        frame as f64 * self.hop as f64 / self.sample_rate as f64
    }

    /// Number of frames needed to hold everything up to `t_s` inclusive.
    pub fn frames_for(&self, t_s: f64) -> usize {
        self.frame_of(t_s) + 1
    }
}

/// Free-function form of [`FrameClock::frame_of`].
pub fn frame_of(t_s: f64, clock: &FrameClock) -> usize {
    clock.frame_of(t_s)
}
