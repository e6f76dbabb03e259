//! A frame-wise logistic transcriber over synthetic harmonic features.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::stream_rng;
use crate::clock::FrameClock;
use crate::em::{bce, TrainReport, Transcriber, TrainingExample};
use crate::error::{Error, Result};
use crate::labeler::LabelGrid;
use crate::matrix::Matrix;
use crate::notes::{NoteSequence, LOWEST_PITCH, PITCH_COUNT};
use crate::par::Parallelism;
use crate::roll::{note_frames, required_frames, ActivationStack, ClassLayout, Head};

/// Semitone offsets of the first twelve harmonics.
pub const TEMPLATE_OFFSETS: [usize; 12] = [0, 12, 19, 24, 28, 31, 34, 36, 38, 40, 42, 43];
const BINS: usize = PITCH_COUNT + 43;
/// Receptive field of a key: from an octave below to the top of its template.
const BELOW: usize = 12;
const FIELD: usize = BELOW + 44;
/// Feature planes: spectrum, positive flux, negative flux.
const PLANES: usize = 3;
/// Padded plane width so every key's field is in bounds.
const PLANE: usize = BELOW + BINS;
const FEATURES: usize = PLANES * PLANE;
const WEIGHTS: usize = PLANES * FIELD;

/// How a performance is turned into features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToyRender {
    pub harmonics: [f32; 12],
    pub gain: f32,
    pub noise_std: f32,
    /// Envelope decay time constant in seconds.
    pub decay_s: f32,
    pub seed: u64,
}

impl ToyRender {
    /// Bright timbre with a dominant fundamental.
    pub fn synthetic(seed: u64) -> Self {
        ToyRender {
            harmonics: [1.0, 0.5, 0.35, 0.25, 0.2, 0.16, 0.14, 0.12, 0.1, 0.09, 0.08, 0.07],
            gain: 1.0,
            noise_std: 0.02,
            decay_s: 0.6,
            seed,
        }
    }

    /// Quieter timbre whose second harmonic outweighs the fundamental.
    pub fn recorded(seed: u64) -> Self {
        ToyRender {
            harmonics: [0.35, 0.7, 0.3, 0.4, 0.12, 0.2, 0.08, 0.15, 0.05, 0.06, 0.04, 0.05],
            gain: 0.8,
            noise_std: 0.04,
            decay_s: 0.4,
            seed,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ToyInput {
    pub performance: NoteSequence,
    pub frames: usize,
    pub render: ToyRender,
}

impl ToyInput {
    pub fn new(performance: NoteSequence, clock: &FrameClock, render: ToyRender) -> Self {
        let frames = required_frames(&performance, clock).max(1);
        ToyInput {
            performance,
            frames,
            render,
        }
    }

    /// Feature matrix of the (optionally transposed) performance: per frame,
    /// three planes of `BINS` values each preceded by `BELOW` zeros.
    pub fn features(&self, clock: &FrameClock, pitch_shift: i32) -> Matrix<f32> {
        let r = &self.render;
        let fps = clock.fps() as f32;
        let mut spec = Matrix::<f32>::zeros(self.frames, BINS);
        let perf = if pitch_shift == 0 {
            std::borrow::Cow::Borrowed(&self.performance)
        } else {
            std::borrow::Cow::Owned(self.performance.transposed(pitch_shift))
        };
        for n in perf.notes() {
            let (on, off) = note_frames(n, clock);
            let base = (n.pitch - LOWEST_PITCH) as usize;
            for t in on..off.min(self.frames) {
                let age = (t - on) as f32 / fps;
                let env = r.gain * (0.35 + 0.65 * (-age / r.decay_s).exp());
                let row = spec.row_mut(t);
                for (h, &o) in TEMPLATE_OFFSETS.iter().enumerate() {
                    row[base + o] += env * r.harmonics[h];
                }
            }
        }
        let mut rng = stream_rng(r.seed, (pitch_shift + 64) as u64);
        for v in spec.as_mut_slice() {
            let g: f32 = rng.sample(StandardNormal);
            *v += (r.noise_std * g).abs();
        }
        let mut out = Matrix::<f32>::zeros(self.frames, FEATURES);
        for t in 0..self.frames {
            let (cur, prev) = (spec.row(t).to_vec(), if t > 0 { Some(spec.row(t - 1).to_vec()) } else { None });
            let row = out.row_mut(t);
            for b in 0..BINS {
                let p = prev.as_ref().map_or(0.0, |p| p[b]);
                row[BELOW + b] = cur[b];
                row[PLANE + BELOW + b] = (cur[b] - p).max(0.0);
                row[2 * PLANE + BELOW + b] = (p - cur[b]).max(0.0);
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToyTrainConfig {
    pub learning_rate: f32,
    pub batch_frames: usize,
    pub init_std: f32,
    pub seed: u64,
}

impl Default for ToyTrainConfig {
    fn default() -> Self {
        ToyTrainConfig {
            learning_rate: 0.01,
            batch_frames: 32,
            init_std: 0.01,
            seed: 0,
        }
    }
}

/// One logistic unit per head and key. Weights over the key's receptive
/// field are shared by all keys of a head; biases are per key.
#[derive(Clone, Debug)]
pub struct ToyTranscriber {
    pub clock: FrameClock,
    pub config: ToyTrainConfig,
    pub parallelism: Parallelism,
    weights: Matrix<f32>,
    bias: Matrix<f32>,
    rng: ChaCha8Rng,
}

#[inline]
fn sigmoid(z: f32) -> f32 {
    1.0 / (1.0 + (-z).exp())
}

#[inline]
fn field_dot(w: &[f32], x: &[f32], key: usize) -> f32 {
    let mut z = 0.0;
    for plane in 0..PLANES {
        let xs = &x[plane * PLANE + key..plane * PLANE + key + FIELD];
        let ws = &w[plane * FIELD..(plane + 1) * FIELD];
        z += ws.iter().zip(xs).map(|(a, b)| a * b).sum::<f32>();
    }
    z
}

impl ToyTranscriber {
    /// Randomly initialised, untrained.
    pub fn new(clock: FrameClock, config: ToyTrainConfig) -> Self {
        let mut init = stream_rng(config.seed, 0);
        let std = config.init_std;
        let weights = Matrix::from_fn(3, WEIGHTS, |_, _| std * init.sample::<f32, _>(StandardNormal));
        ToyTranscriber {
            clock,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            config,
            parallelism: Parallelism::default(),
            weights,
            bias: Matrix::zeros(3, PITCH_COUNT),
        }
    }

    fn predict_features(&self, feats: &Matrix<f32>) -> ActivationStack {
        let frames = feats.rows();
        let rows = self.parallelism.map_range(frames, |t| {
            let x = feats.row(t);
            let mut p = [[0.0f32; PITCH_COUNT]; 3];
            for head in Head::ALL {
                let h = head.index();
                for (c, v) in p[h].iter_mut().enumerate() {
                    *v = sigmoid(self.bias.get(h, c) + field_dot(self.weights.row(h), x, c));
                }
            }
            p
        });
        let mut stack = ActivationStack::zeros(frames, self.clock, ClassLayout::pitch_only());
        for (t, p) in rows.iter().enumerate() {
            for head in Head::ALL {
                stack.head_mut(head).row_mut(t).copy_from_slice(&p[head.index()]);
            }
        }
        stack
    }

    /// One SGD update on a frame; returns (summed loss, unmasked cells).
    fn update(&mut self, x: &[f32], labels: &LabelGrid, t: usize, lr: f32, grad: &mut [f32]) -> (f64, usize) {
        let mut loss = 0.0;
        let mut cells = 0;
        for head in Head::ALL {
            let h = head.index();
            let lab = labels.head(head);
            grad.fill(0.0);
            for c in 0..PITCH_COUNT {
                if lab.provenance.get(t, c).is_masked() {
                    continue;
                }
                let p = sigmoid(self.bias.get(h, c) + field_dot(self.weights.row(h), x, c));
                let y = lab.target.get(t, c) as f32;
                loss += bce(p as f64, y as f64);
                cells += 1;
                let g = p - y;
                self.bias.set(h, c, self.bias.get(h, c) - lr * g);
                for plane in 0..PLANES {
                    let xs = &x[plane * PLANE + c..plane * PLANE + c + FIELD];
                    for (gw, &xi) in grad[plane * FIELD..(plane + 1) * FIELD].iter_mut().zip(xs) {
                        *gw += g * xi;
                    }
                }
            }
            let scale = lr;
            for (w, g) in self.weights.row_mut(h).iter_mut().zip(grad.iter()) {
                *w -= scale * g;
            }
        }
        (loss, cells)
    }
}

impl Transcriber for ToyTranscriber {
    type Input = ToyInput;

    fn predict(&self, input: &ToyInput, pitch_shift: i32) -> Result<ActivationStack> {
        Ok(self.predict_features(&input.features(&self.clock, pitch_shift)))
    }

    fn train(&mut self, examples: &[TrainingExample<'_, ToyInput>], steps: usize) -> Result<TrainReport> {
        if examples.is_empty() || steps == 0 {
            return Ok(TrainReport::default());
        }
        for ex in examples {
            if ex.labels.frames() != ex.input.frames || ex.labels.classes() != PITCH_COUNT {
                return Err(Error::shape(
                    "toy labels",
                    format!("{}x{}", ex.input.frames, PITCH_COUNT),
                    format!("{}x{}", ex.labels.frames(), ex.labels.classes()),
                ));
            }
        }
        let clock = self.clock;
        let feats: Vec<Matrix<f32>> = self
            .parallelism
            .map(examples, |ex| ex.input.features(&clock, ex.pitch_shift));
        let lr = self.config.learning_rate;
        let mut grad = vec![0.0; WEIGHTS];
        let mut report = TrainReport::default();
        let mut total = 0.0;
        for _ in 0..steps {
            let e = self.rng.random_range(0..examples.len());
            let (mut loss, mut cells) = (0.0, 0usize);
            for _ in 0..self.config.batch_frames {
                let t = self.rng.random_range(0..feats[e].rows());
                let (l, c) = self.update(feats[e].row(t), examples[e].labels, t, lr, &mut grad);
                loss += l;
                cells += c;
            }
            let mean = if cells == 0 { 0.0 } else { loss / cells as f64 };
            if !mean.is_finite() {
                return Err(Error::DivergentLoss {
                    step: report.steps,
                    loss: mean,
                });
            }
            total += mean;
            report.steps += 1;
            report.final_loss = mean;
        }
        report.mean_loss = total / report.steps as f64;
        Ok(report)
    }
}
