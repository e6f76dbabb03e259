//! Alternating label estimation and transcriber fitting.
//!
//! Each E-step predicts every piece, aligns the prediction to the piece's
//! score and keeps the new labels only when the alignment cost beats the
//! stored one. Each M-step trains the transcriber on the stored labels,
//! including pitch-shifted copies whose labels are shifted from the
//! unshifted grid.

use std::borrow::Cow;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labeler::{shift_grid, threshold_labels, LabelGrid};
use crate::notes::NoteSequence;
use crate::par::Parallelism;
use crate::pipeline::{label_piece, LabelSummary, LabelingConfig};
use crate::roll::{shift_stack, ActivationStack, Head, MAX_PITCH_SHIFT};

/// One training item: an input, the pitch shift to apply to it, and labels
/// already expressed in the shifted pitch space.
#[derive(Clone, Copy, Debug)]
pub struct TrainingExample<'a, I> {
    pub input: &'a I,
    pub pitch_shift: i32,
    pub labels: &'a LabelGrid,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub steps: usize,
    pub mean_loss: f64,
    pub final_loss: f64,
}

/// A model that maps an input to onset/frame/offset probabilities.
pub trait Transcriber {
    type Input: Sync;

    /// Deterministic for a fixed internal state.
    fn predict(&self, input: &Self::Input, pitch_shift: i32) -> Result<ActivationStack>;

    /// Runs `steps` optimisation steps on masked binary cross-entropy.
    fn train(&mut self, examples: &[TrainingExample<'_, Self::Input>], steps: usize) -> Result<TrainReport>;

    /// Masked loss of the current state on one example.
    fn loss(&self, example: &TrainingExample<'_, Self::Input>) -> Result<f64> {
        let stack = self.predict(example.input, example.pitch_shift)?;
        Ok(masked_bce(&stack, example.labels)?.mean())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossSum {
    pub sum: f64,
    pub cells: usize,
}

impl LossSum {
    /// Zero when every cell is masked.
    pub fn mean(&self) -> f64 {
        if self.cells == 0 {
            0.0
        } else {
            self.sum / self.cells as f64
        }
    }
}

const BCE_EPS: f64 = 1e-7;

#[inline]
pub fn bce(p: f64, y: f64) -> f64 {
    let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

/// Binary cross-entropy summed over unmasked cells of all three heads.
pub fn masked_bce(stack: &ActivationStack, labels: &LabelGrid) -> Result<LossSum> {
    labels.check_stack(stack, "loss")?;
    let mut out = LossSum::default();
    for head in Head::ALL {
        let probs = stack.head(head).as_slice();
        let h = labels.head(head);
        for ((&p, &y), prov) in probs.iter().zip(h.target.as_slice()).zip(h.provenance.as_slice()) {
            if !prov.is_masked() {
                out.sum += bce(p as f64, y as f64);
                out.cells += 1;
            }
        }
    }
    Ok(out)
}

/// Precomputed predictions that never change; training is a no-op.
#[derive(Clone, Debug, Default)]
pub struct FixedPredictions;

impl Transcriber for FixedPredictions {
    type Input = ActivationStack;

    fn predict(&self, input: &ActivationStack, pitch_shift: i32) -> Result<ActivationStack> {
        Ok(if pitch_shift == 0 {
            input.clone()
        } else {
            shift_stack(input, pitch_shift)
        })
    }

    fn train(&mut self, _examples: &[TrainingExample<'_, ActivationStack>], _steps: usize) -> Result<TrainReport> {
        Ok(TrainReport::default())
    }
}

#[derive(Clone, Debug)]
pub struct Piece<I> {
    pub id: String,
    pub input: I,
    pub score: NoteSequence,
}

#[derive(Clone, Debug)]
pub struct PieceState {
    pub labels: Option<LabelGrid>,
    /// Normalized alignment cost of `labels`; infinite while unlabeled.
    pub cost: f64,
    pub summary: Option<LabelSummary>,
    pub last_error: Option<String>,
}

impl Default for PieceState {
    fn default() -> Self {
        PieceState {
            labels: None,
            cost: f64::INFINITY,
            summary: None,
            last_error: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct EmState {
    pub pieces: Vec<PieceState>,
    pub iteration: usize,
    /// E-steps completed so far.
    pub labelings: usize,
    pub label_schedule: Vec<usize>,
    /// Pseudo-labels are applied from this labeling round on.
    pub pseudo_from_labeling: usize,
}

impl EmState {
    pub fn new(pieces: usize, label_schedule: Vec<usize>, pseudo_from_labeling: usize) -> Self {
        EmState {
            pieces: vec![PieceState::default(); pieces],
            iteration: 0,
            labelings: 0,
            label_schedule,
            pseudo_from_labeling,
        }
    }

    /// Mean stored cost over labeled pieces; `None` when nothing is labeled.
    pub fn mean_cost(&self) -> Option<f64> {
        let finite: Vec<f64> = self.pieces.iter().map(|p| p.cost).filter(|c| c.is_finite()).collect();
        (!finite.is_empty()).then(|| finite.iter().sum::<f64>() / finite.len() as f64)
    }

    pub fn costs(&self) -> Vec<f64> {
        self.pieces.iter().map(|p| p.cost).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EStepReport {
    pub iteration: usize,
    pub labeling: usize,
    pub pseudo_applied: bool,
    pub replaced: usize,
    pub failed: Vec<(String, String)>,
    pub mean_cost: Option<f64>,
    pub costs: Vec<f64>,
}

/// Relabels every piece and keeps strictly cheaper alignments.
///
/// Pieces whose prediction or alignment fails keep their previous labels
/// and are listed in the report.
pub fn e_step<T>(
    state: &mut EmState,
    pieces: &[Piece<T::Input>],
    transcriber: &T,
    cfg: &LabelingConfig,
    par: Parallelism,
) -> Result<EStepReport>
where
    T: Transcriber + Sync,
{
    if pieces.len() != state.pieces.len() {
        return Err(Error::shape("em state pieces", state.pieces.len(), pieces.len()));
    }
    let with_pseudo = state.labelings >= state.pseudo_from_labeling;
    let results = par.map(pieces, |p| {
        transcriber
            .predict(&p.input, 0)
            .and_then(|stack| label_piece(&stack, &p.score, cfg, with_pseudo))
    });

    let mut replaced = 0;
    let mut failed = Vec::new();
    for ((slot, piece), result) in state.pieces.iter_mut().zip(pieces).zip(results) {
        match result {
            Ok(out) => {
                slot.last_error = None;
                let cost = out.summary.normalized_cost;
                if cost < slot.cost {
                    slot.cost = cost;
                    slot.labels = Some(out.grid);
                    slot.summary = Some(out.summary);
                    replaced += 1;
                }
            }
            Err(e) => {
                log::warn!("piece {}: labeling failed: {e}", piece.id);
                slot.last_error = Some(e.to_string());
                failed.push((piece.id.clone(), e.to_string()));
            }
        }
    }
    let report = EStepReport {
        iteration: state.iteration,
        labeling: state.labelings,
        pseudo_applied: with_pseudo,
        replaced,
        failed,
        mean_cost: state.mean_cost(),
        costs: state.costs(),
    };
    state.labelings += 1;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MStepConfig {
    pub steps_per_piece: usize,
    pub pitch_shifts: Vec<i32>,
    /// Passes over the shift list; each pass gets an equal share of steps.
    pub shift_rounds: usize,
}

impl Default for MStepConfig {
    fn default() -> Self {
        MStepConfig {
            steps_per_piece: 90,
            pitch_shifts: (-MAX_PITCH_SHIFT..=MAX_PITCH_SHIFT).collect(),
            shift_rounds: 3,
        }
    }
}

impl MStepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pitch_shifts.is_empty() {
            return Err(Error::InvalidConfig("pitch_shifts must not be empty".into()));
        }
        if let Some(k) = self.pitch_shifts.iter().find(|k| k.abs() > MAX_PITCH_SHIFT) {
            return Err(Error::InvalidConfig(format!(
                "pitch shift {k} outside [-{MAX_PITCH_SHIFT}, {MAX_PITCH_SHIFT}]"
            )));
        }
        if self.shift_rounds == 0 {
            return Err(Error::InvalidConfig("shift_rounds must be at least 1".into()));
        }
        Ok(())
    }
}

/// Trains on all stored labels for `steps_per_piece · N` steps.
pub fn m_step<T: Transcriber>(
    state: &EmState,
    pieces: &[Piece<T::Input>],
    transcriber: &mut T,
    cfg: &MStepConfig,
    par: Parallelism,
) -> Result<TrainReport> {
    cfg.validate()?;
    let labeled: Vec<(&Piece<T::Input>, &LabelGrid)> = pieces
        .iter()
        .zip(&state.pieces)
        .filter_map(|(p, s)| s.labels.as_ref().map(|l| (p, l)))
        .collect();
    if labeled.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let total = cfg.steps_per_piece * labeled.len();
    let chunks = cfg.shift_rounds * cfg.pitch_shifts.len();
    let mut report = TrainReport::default();
    let mut loss_weight = 0.0;
    let mut chunk = 0;
    for _ in 0..cfg.shift_rounds {
        for &k in &cfg.pitch_shifts {
            let steps = total / chunks + usize::from(chunk < total % chunks);
            chunk += 1;
            if steps == 0 {
                continue;
            }
            let grids: Vec<Cow<'_, LabelGrid>> = if k == 0 {
                labeled.iter().map(|(_, l)| Cow::Borrowed(*l)).collect()
            } else {
                par.map(&labeled, |(_, l)| Cow::Owned(shift_grid(l, k)))
            };
            let examples: Vec<TrainingExample<'_, T::Input>> = labeled
                .iter()
                .zip(&grids)
                .map(|((p, _), g)| TrainingExample {
                    input: &p.input,
                    pitch_shift: k,
                    labels: g.as_ref(),
                })
                .collect();
            let r = transcriber.train(&examples, steps)?;
            if !r.mean_loss.is_finite() || !r.final_loss.is_finite() {
                return Err(Error::DivergentLoss {
                    step: report.steps + r.steps,
                    loss: if r.final_loss.is_finite() { r.mean_loss } else { r.final_loss },
                });
            }
            report.mean_loss += r.mean_loss * r.steps as f64;
            loss_weight += r.steps as f64;
            report.steps += r.steps;
            report.final_loss = r.final_loss;
        }
    }
    if loss_weight > 0.0 {
        report.mean_loss /= loss_weight;
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmConfig {
    pub labeling: LabelingConfig,
    pub m_step: MStepConfig,
    pub max_iterations: usize,
    /// Iterations that start with an E-step; `None` means `{0, max_iterations / 2}`.
    pub label_schedule: Option<Vec<usize>>,
    pub pseudo_from_labeling: usize,
    pub epsilon: f64,
    #[serde(skip)]
    pub parallelism: Parallelism,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            labeling: LabelingConfig::default(),
            m_step: MStepConfig::default(),
            max_iterations: 2,
            label_schedule: None,
            pseudo_from_labeling: 0,
            epsilon: 1e-4,
            parallelism: Parallelism::default(),
        }
    }
}

impl EmConfig {
    pub fn schedule(&self) -> Vec<usize> {
        let mut s = match &self.label_schedule {
            Some(s) => s.clone(),
            None => vec![0, self.max_iterations / 2],
        };
        s.sort_unstable();
        s.dedup();
        s
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be at least 1".into()));
        }
        let schedule = self.schedule();
        if schedule.first() != Some(&0) {
            return Err(Error::InvalidConfig("label schedule must include iteration 0".into()));
        }
        if !(self.epsilon >= 0.0) {
            return Err(Error::InvalidConfig("epsilon must be nonnegative".into()));
        }
        self.labeling.validate()?;
        self.m_step.validate()
    }
}

#[derive(Clone, Debug)]
pub struct EmOutcome {
    pub state: EmState,
    pub history: Vec<EStepReport>,
    pub training: Vec<TrainReport>,
    pub converged: bool,
}

/// Alternates E- and M-steps until the mean cost settles or iterations run out.
///
/// Convergence is checked after each M-step that follows a relabeling,
/// comparing the mean stored cost with the previous relabeling's.
pub fn run<T>(pieces: &[Piece<T::Input>], transcriber: &mut T, cfg: &EmConfig) -> Result<EmOutcome>
where
    T: Transcriber + Sync,
{
    if pieces.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    cfg.validate()?;
    let schedule = cfg.schedule();
    let mut state = EmState::new(pieces.len(), schedule.clone(), cfg.pseudo_from_labeling);
    let mut history: Vec<EStepReport> = Vec::new();
    let mut training = Vec::new();
    let mut converged = false;
    for it in 0..cfg.max_iterations {
        state.iteration = it;
        let mut settled = false;
        if schedule.contains(&it) {
            let report = e_step(&mut state, pieces, &*transcriber, &cfg.labeling, cfg.parallelism)?;
            log::info!(
                "iteration {it}: labeling {} replaced {} of {} (mean cost {:?})",
                report.labeling,
                report.replaced,
                pieces.len(),
                report.mean_cost
            );
            if let (Some(prev), Some(now)) = (history.last().and_then(|r| r.mean_cost), report.mean_cost) {
                settled = (prev - now).abs() < cfg.epsilon;
            }
            history.push(report);
        }
        let r = m_step(&state, pieces, transcriber, &cfg.m_step, cfg.parallelism)?;
        log::info!("iteration {it}: trained {} steps, mean loss {:.5}", r.steps, r.mean_loss);
        training.push(r);
        if settled {
            converged = true;
            break;
        }
    }
    Ok(EmOutcome {
        state,
        history,
        training,
        converged,
    })
}

/// Self-training baseline on the same schedule as [`run`]: each scheduled
/// relabeling thresholds the current model's predictions at `threshold` and
/// replaces the stored labels unconditionally. No alignment takes place, so
/// stored costs are NaN and no convergence test applies.
pub fn run_self_training<T>(
    pieces: &[Piece<T::Input>],
    transcriber: &mut T,
    cfg: &EmConfig,
    threshold: f32,
) -> Result<EmOutcome>
where
    T: Transcriber + Sync,
{
    if pieces.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    cfg.validate()?;
    let schedule = cfg.schedule();
    let mut state = EmState::new(pieces.len(), schedule.clone(), usize::MAX);
    let mut history = Vec::new();
    let mut training = Vec::new();
    for it in 0..cfg.max_iterations {
        state.iteration = it;
        if schedule.contains(&it) {
            let model = &*transcriber;
            let grids = cfg
                .parallelism
                .map(pieces, |p| model.predict(&p.input, 0).map(|s| threshold_labels(&s, threshold)));
            let mut failed = Vec::new();
            let mut replaced = 0;
            for ((slot, piece), grid) in state.pieces.iter_mut().zip(pieces).zip(grids) {
                match grid {
                    Ok(g) => {
                        slot.labels = Some(g);
                        slot.cost = f64::NAN;
                        slot.last_error = None;
                        replaced += 1;
                    }
                    Err(e) => {
                        slot.last_error = Some(e.to_string());
                        failed.push((piece.id.clone(), e.to_string()));
                    }
                }
            }
            history.push(EStepReport {
                iteration: it,
                labeling: state.labelings,
                pseudo_applied: false,
                replaced,
                failed,
                mean_cost: None,
                costs: state.costs(),
            });
            state.labelings += 1;
        }
        training.push(m_step(&state, pieces, transcriber, &cfg.m_step, cfg.parallelism)?);
    }
    Ok(EmOutcome {
        state,
        history,
        training,
        converged: false,
    })
}
