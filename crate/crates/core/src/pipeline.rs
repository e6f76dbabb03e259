//! One-piece labeling: descriptors → DTW → singular points → labels.

use serde::{Deserialize, Serialize};

use crate::descriptor::{build_descriptors_with, DescriptorWeights};
use crate::dtw::{dtw_align_with, singular_points, DtwOptions, SingularReport, WarpPath, DEFAULT_W, DEFAULT_W_PRIME};
use crate::error::{Error, Result};
use crate::labeler::{
    apply_pseudo_labels, assign_labels, local_max_adjust, LabelGrid, LocalMaxConfig, Provenance, PseudoLabelConfig,
};
use crate::notes::NoteSequence;
use crate::par::Parallelism;
use crate::roll::{rasterize_fit, ActivationStack, TargetRoll};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelingConfig {
    pub weights: DescriptorWeights,
    pub dtw: DtwOptions,
    pub w: usize,
    pub w_prime: usize,
    pub local_max: Option<LocalMaxConfig>,
    pub pseudo: PseudoLabelConfig,
}

impl Default for LabelingConfig {
    fn default() -> Self {
        LabelingConfig {
            weights: DescriptorWeights::default(),
            dtw: DtwOptions::default(),
            w: DEFAULT_W,
            w_prime: DEFAULT_W_PRIME,
            local_max: Some(LocalMaxConfig::default()),
            pseudo: PseudoLabelConfig::default(),
        }
    }
}

impl LabelingConfig {
    /// Alignment labels only: no local-max refinement, no pseudo-labels.
    pub fn alignment_only() -> Self {
        LabelingConfig {
            local_max: None,
            pseudo: PseudoLabelConfig::disabled(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.w == 0 || self.w_prime == 0 {
            return Err(Error::InvalidConfig("w and w' must be at least 1".into()));
        }
        if let Some(lm) = &self.local_max {
            lm.validate()?;
        }
        if self.pseudo.enabled {
            self.pseudo.validate()?;
        }
        DescriptorWeights::new(self.weights.onset, self.weights.frame, self.weights.offset)?;
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LabelSummary {
    pub frames: usize,
    pub target_frames: usize,
    pub cost: f64,
    pub normalized_cost: f64,
    pub path_len: usize,
    pub s1: usize,
    pub s2: usize,
    pub singular_frames: usize,
    pub w: usize,
    pub w_prime: usize,
    pub pseudo_pos: usize,
    pub pseudo_neg: usize,
    pub unknown_masked: usize,
    pub singular_masked: usize,
    pub pseudo_applied: bool,
    pub local_max_applied: bool,
}

#[derive(Clone, Debug)]
pub struct LabelOutcome {
    pub grid: LabelGrid,
    pub path: WarpPath,
    pub singular: SingularReport,
    pub summary: LabelSummary,
}

/// Labels a piece against its (unaligned) score.
pub fn label_piece(
    stack: &ActivationStack,
    score: &NoteSequence,
    cfg: &LabelingConfig,
    with_pseudo: bool,
) -> Result<LabelOutcome> {
    let layout = stack.layout;
    if layout.is_instrument_sensitive() && score.instrument_count() != layout.instruments() {
        return Err(Error::shape(
            "score instrument count",
            layout.instruments(),
            score.instrument_count(),
        ));
    }
    let roll = rasterize_fit(score, &stack.clock, layout);
    label_against_roll(stack, &roll, cfg, with_pseudo)
}

/// Labels a piece against an already rasterized score roll.
pub fn label_against_roll(
    stack: &ActivationStack,
    roll: &TargetRoll,
    cfg: &LabelingConfig,
    with_pseudo: bool,
) -> Result<LabelOutcome> {
    cfg.validate()?;
    if roll.classes() != stack.classes() {
        return Err(Error::shape("score roll classes", stack.classes(), roll.classes()));
    }
    let x = build_descriptors_with(stack, &cfg.weights, Parallelism::Sequential);
    let y = build_descriptors_with(roll, &cfg.weights, Parallelism::Sequential);
    let path = dtw_align_with(&x, &y, &cfg.dtw)?;
    let singular = singular_points(&path, cfg.w, cfg.w_prime)?;
    let mut grid = assign_labels(&path, &singular, roll)?;
    if let Some(lm) = &cfg.local_max {
        grid = local_max_adjust(&grid, stack, lm)?;
    }
    let pseudo_applied = with_pseudo && cfg.pseudo.enabled;
    if pseudo_applied {
        grid = apply_pseudo_labels(&grid, stack, &cfg.pseudo)?;
    }
    let summary = LabelSummary {
        frames: stack.frames(),
        target_frames: roll.frames(),
        cost: path.cost(),
        normalized_cost: path.normalized_cost(),
        path_len: path.len(),
        s1: singular.s1.len(),
        s2: singular.s2.len(),
        singular_frames: singular.singular_count(),
        w: cfg.w,
        w_prime: cfg.w_prime,
        pseudo_pos: grid.count(Provenance::PseudoPos),
        pseudo_neg: grid.count(Provenance::PseudoNeg),
        unknown_masked: grid.count(Provenance::UnknownMasked),
        singular_masked: grid.count(Provenance::SingularMasked),
        pseudo_applied,
        local_max_applied: cfg.local_max.is_some(),
    };
    Ok(LabelOutcome {
        grid,
        path,
        singular,
        summary,
    })
}
