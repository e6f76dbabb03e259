//! Octave-folded local descriptors for alignment.
//!
//! Each frame becomes a 12-vector: the heads are combined as
//! `A·onset + B·frame + C·offset` per class, then every class folds onto its
//! pitch class (`pitch mod 12`) by taking the maximum over octaves and instruments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::par::Parallelism;
use crate::roll::{ActivationStack, ClassLayout, TargetRoll};

pub const PITCH_CLASSES: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DescriptorWeights {
    pub onset: f64,
    pub frame: f64,
    pub offset: f64,
}

impl Default for DescriptorWeights {
    fn default() -> Self {
        Self::onset_weighted()
    }
}

impl DescriptorWeights {
    pub fn new(onset: f64, frame: f64, offset: f64) -> Result<Self> {
        let w = DescriptorWeights { onset, frame, offset };
        let all = [onset, frame, offset];
        if all.iter().any(|v| !v.is_finite() || *v < 0.0) || all.iter().all(|v| *v == 0.0) {
            return Err(Error::InvalidConfig(format!(
                "descriptor weights must be nonnegative and not all zero, got {onset}/{frame}/{offset}"
            )));
        }
        Ok(w)
    }

    /// A = 100, B = 0.01, C = 0.001: alignment driven by onsets.
    pub fn onset_weighted() -> Self {
        DescriptorWeights {
            onset: 100.0,
            frame: 0.01,
            offset: 0.001,
        }
    }

    /// Onset and frame weights swapped, for comparing against frame-driven alignment.
    pub fn frame_weighted() -> Self {
        DescriptorWeights {
            onset: 0.01,
            frame: 100.0,
            offset: 0.001,
        }
    }
}

/// `T × 12` descriptor sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct DescriptorSeq {
    values: Matrix<f64>,
}

impl DescriptorSeq {
    pub fn new(values: Matrix<f64>) -> Result<Self> {
        if values.cols() != PITCH_CLASSES {
            return Err(Error::shape("descriptor width", PITCH_CLASSES, values.cols()));
        }
        Ok(DescriptorSeq { values })
    }

    pub fn from_rows(rows: &[[f64; PITCH_CLASSES]]) -> Self {
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        DescriptorSeq {
            values: Matrix::from_vec(rows.len(), PITCH_CLASSES, data).expect("fixed width"),
        }
    }

    pub fn len(&self) -> usize {
        self.values.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.rows() == 0
    }

    #[inline]
    pub fn frame(&self, t: usize) -> &[f64] {
        self.values.row(t)
    }

    pub fn values(&self) -> &Matrix<f64> {
        &self.values
    }
}

/// Anything with onset/frame/offset planes over a class layout.
pub trait HeadPlanes: Sync {
    fn frames(&self) -> usize;
    fn layout(&self) -> ClassLayout;
    /// `A·on + B·fr + C·off` for one class, without allocating.
    fn weighted(&self, t: usize, c: usize, w: &DescriptorWeights) -> f64;
}

impl HeadPlanes for ActivationStack {
    fn frames(&self) -> usize {
        ActivationStack::frames(self)
    }

    fn layout(&self) -> ClassLayout {
        self.layout
    }

    #[inline]
    fn weighted(&self, t: usize, c: usize, w: &DescriptorWeights) -> f64 {
        w.onset * self.onset.get(t, c) as f64 + w.frame * self.frame.get(t, c) as f64 + w.offset * self.offset.get(t, c) as f64
    }
}

impl HeadPlanes for TargetRoll {
    fn frames(&self) -> usize {
        TargetRoll::frames(self)
    }

    fn layout(&self) -> ClassLayout {
        self.layout
    }

    #[inline]
    fn weighted(&self, t: usize, c: usize, w: &DescriptorWeights) -> f64 {
        w.onset * self.onset.get(t, c) as f64 + w.frame * self.frame.get(t, c) as f64 + w.offset * self.offset.get(t, c) as f64
    }
}

/// Builds descriptors with the default parallelism.
pub fn build_descriptors<S: HeadPlanes + ?Sized>(src: &S, weights: &DescriptorWeights) -> DescriptorSeq {
    build_descriptors_with(src, weights, Parallelism::default())
}

pub fn build_descriptors_with<S: HeadPlanes + ?Sized>(
    src: &S,
    weights: &DescriptorWeights,
    par: Parallelism,
) -> DescriptorSeq {
    let layout = src.layout();
    let frames = src.frames();
    let classes = layout.classes();
    let mut data = vec![0.0f64; frames * PITCH_CLASSES];
    par.for_each_row(&mut data, PITCH_CLASSES, |t, out| {
        for c in 0..classes {
            let (pitch, _) = layout.pitch_of(c);
            let pc = pitch as usize % PITCH_CLASSES;
            let v = src.weighted(t, c, weights);
            if v > out[pc] {
                out[pc] = v;
            }
        }
    });
    DescriptorSeq {
        values: Matrix::from_vec(frames, PITCH_CLASSES, data).expect("sized above"),
    }
}
