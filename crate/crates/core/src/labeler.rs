//! Loss-maskable training labels from an alignment.
//!
//! Order of application is fixed: [`assign_labels`] → [`local_max_adjust`] →
//! [`apply_pseudo_labels`].

use serde::{Deserialize, Serialize};

use crate::clock::FrameClock;
use crate::dtw::{SingularReport, WarpPath};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::notes::PITCH_COUNT;
use crate::roll::{shift_columns, ActivationStack, ClassLayout, Head, TargetRoll, MAX_PITCH_SHIFT};

/// Where a label cell came from. Masked variants contribute no loss.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[repr(u8)]
pub enum Provenance {
    #[default]
    Aligned = 0,
    PseudoPos = 1,
    PseudoNeg = 2,
    SingularMasked = 3,
    UnknownMasked = 4,
}

impl Provenance {
    pub const ALL: [Provenance; 5] = [
        Provenance::Aligned,
        Provenance::PseudoPos,
        Provenance::PseudoNeg,
        Provenance::SingularMasked,
        Provenance::UnknownMasked,
    ];

    #[inline]
    pub fn is_masked(self) -> bool {
        matches!(self, Provenance::SingularMasked | Provenance::UnknownMasked)
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }
}

/// Targets and provenance for one head; the loss mask is derived from provenance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HeadLabels {
    pub target: Matrix<u8>,
    pub provenance: Matrix<Provenance>,
}

impl HeadLabels {
    fn new(frames: usize, classes: usize) -> Self {
        HeadLabels {
            target: Matrix::zeros(frames, classes),
            provenance: Matrix::zeros(frames, classes),
        }
    }

    /// 1 where the cell contributes to the loss.
    pub fn mask(&self) -> Matrix<u8> {
        self.provenance.map(|p| u8::from(!p.is_masked()))
    }

    #[inline]
    pub fn is_aligned_positive(&self, t: usize, c: usize) -> bool {
        self.provenance.get(t, c) == Provenance::Aligned && self.target.get(t, c) == 1
    }

    pub fn count(&self, prov: Provenance) -> usize {
        self.provenance.as_slice().iter().filter(|&&p| p == prov).count()
    }

    /// Builds from explicit planes, checking that masks agree with provenance.
    pub fn from_planes(target: Matrix<u8>, mask: &Matrix<u8>, provenance: Matrix<Provenance>) -> Result<Self> {
        if target.shape() != provenance.shape() || mask.shape() != provenance.shape() {
            return Err(Error::shape(
                "label planes",
                format!("{:?}", provenance.shape()),
                format!("{:?}/{:?}", target.shape(), mask.shape()),
            ));
        }
        let consistent = mask
            .as_slice()
            .iter()
            .zip(provenance.as_slice())
            .all(|(&m, p)| (m == 0) == p.is_masked());
        if !consistent {
            return Err(Error::InvalidConfig("mask disagrees with provenance".into()));
        }
        if target.as_slice().iter().any(|&v| v > 1) {
            return Err(Error::InvalidConfig("label target outside {0, 1}".into()));
        }
        Ok(HeadLabels { target, provenance })
    }
}

/// Per-head binary targets with loss masks and provenance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelGrid {
    pub onset: HeadLabels,
    pub frame: HeadLabels,
    pub offset: HeadLabels,
    pub clock: FrameClock,
    pub layout: ClassLayout,
}

impl LabelGrid {
    pub fn new_aligned(frames: usize, clock: FrameClock, layout: ClassLayout) -> Self {
        let c = layout.classes();
        LabelGrid {
            onset: HeadLabels::new(frames, c),
            frame: HeadLabels::new(frames, c),
            offset: HeadLabels::new(frames, c),
            clock,
            layout,
        }
    }

    /// Every cell of the roll as an aligned, unmasked label.
    pub fn from_roll(roll: &TargetRoll) -> Self {
        let mut g = Self::new_aligned(roll.frames(), roll.clock, roll.layout);
        for h in Head::ALL {
            g.head_mut(h).target = roll.head(h).clone();
        }
        g
    }

    pub fn frames(&self) -> usize {
        self.onset.target.rows()
    }

    pub fn classes(&self) -> usize {
        self.onset.target.cols()
    }

    pub fn head(&self, head: Head) -> &HeadLabels {
        match head {
            Head::Onset => &self.onset,
            Head::Frame => &self.frame,
            Head::Offset => &self.offset,
        }
    }

    pub fn head_mut(&mut self, head: Head) -> &mut HeadLabels {
        match head {
            Head::Onset => &mut self.onset,
            Head::Frame => &mut self.frame,
            Head::Offset => &mut self.offset,
        }
    }

    /// The targets alone, as a roll.
    pub fn to_roll(&self) -> TargetRoll {
        TargetRoll {
            onset: self.onset.target.clone(),
            frame: self.frame.target.clone(),
            offset: self.offset.target.clone(),
            clock: self.clock,
            layout: self.layout,
        }
    }

    pub fn count(&self, prov: Provenance) -> usize {
        Head::ALL.iter().map(|&h| self.head(h).count(prov)).sum()
    }

    pub fn masked_cells(&self) -> usize {
        self.count(Provenance::SingularMasked) + self.count(Provenance::UnknownMasked)
    }

    pub fn check_stack(&self, stack: &ActivationStack, context: &'static str) -> Result<()> {
        if stack.frames() != self.frames() || stack.classes() != self.classes() {
            return Err(Error::shape(
                context,
                format!("{}x{}", self.frames(), self.classes()),
                format!("{}x{}", stack.frames(), stack.classes()),
            ));
        }
        Ok(())
    }
}

/// Hierarchy level of a target cell: onset 3, frame 2, offset 1, none 0.
#[inline]
fn level(roll: &TargetRoll, s: usize, c: usize) -> u8 {
    (3 * roll.onset.get(s, c)).max(2 * roll.frame.get(s, c)).max(roll.offset.get(s, c))
}

/// Warps the roll onto the source timeline. Each non-singular source frame
/// takes, per class, the highest hierarchy level among its matched target
/// frames; singular frames are masked on every head.
pub fn assign_labels(path: &WarpPath, sing: &SingularReport, roll: &TargetRoll) -> Result<LabelGrid> {
    if path.target_len() != roll.frames() {
        return Err(Error::shape("warp target length", roll.frames(), path.target_len()));
    }
    if sing.source_len() != path.source_len() {
        return Err(Error::shape("singular report length", path.source_len(), sing.source_len()));
    }
    let frames = path.source_len();
    let classes = roll.classes();
    let mut grid = LabelGrid::new_aligned(frames, roll.clock, roll.layout);
    let spans = path.source_spans();
    let mut levels = vec![0u8; classes];
    for (t, span) in spans.into_iter().enumerate() {
        if sing.is_singular(t) {
            for h in Head::ALL {
                grid.head_mut(h).provenance.row_mut(t).fill(Provenance::SingularMasked);
            }
            continue;
        }
        levels.fill(0);
        for s in span {
            for (c, lv) in levels.iter_mut().enumerate() {
                *lv = (*lv).max(level(roll, s, c));
            }
        }
        for (c, &lv) in levels.iter().enumerate() {
            match lv {
                3 => {
                    grid.onset.target.set(t, c, 1);
                    grid.frame.target.set(t, c, 1);
                }
                2 => grid.frame.target.set(t, c, 1),
                1 => grid.offset.target.set(t, c, 1),
                _ => {}
            }
        }
    }
    Ok(grid)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PseudoLabelConfig {
    pub t_pos: f32,
    pub t_neg: f32,
    pub enabled: bool,
    /// An aligned positive survives a confidence below `t_neg`.
    pub aligned_positive_wins: bool,
}

impl Default for PseudoLabelConfig {
    fn default() -> Self {
        PseudoLabelConfig {
            t_pos: 0.75,
            t_neg: 0.01,
            enabled: true,
            aligned_positive_wins: true,
        }
    }
}

impl PseudoLabelConfig {
    pub fn disabled() -> Self {
        PseudoLabelConfig {
            enabled: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_pos > 0.5 && self.t_pos < 1.0) {
            return Err(Error::InvalidConfig(format!("T_pos = {} not in (0.5, 1)", self.t_pos)));
        }
        if !(self.t_neg >= 0.0 && self.t_neg < 0.5) {
            return Err(Error::InvalidConfig(format!("T_neg = {} not in [0, 0.5)", self.t_neg)));
        }
        Ok(())
    }
}

/// Overlays confidence-based labels on an aligned grid.
///
/// Above `t_pos` a cell becomes a positive (even on singular frames), below
/// `t_neg` a negative. On the onset head only, confidences in `(0.5, t_pos]`
/// on cells not aligned positive become unknown and are masked.
pub fn apply_pseudo_labels(grid: &LabelGrid, stack: &ActivationStack, cfg: &PseudoLabelConfig) -> Result<LabelGrid> {
    cfg.validate()?;
    grid.check_stack(stack, "pseudo-label stack")?;
    let mut out = grid.clone();
    if !cfg.enabled {
        return Ok(out);
    }
    for h in Head::ALL {
        let probs = stack.head(h);
        let labels = out.head_mut(h);
        let cells = probs.as_slice().len();
        let target = labels.target.as_mut_slice();
        let prov = labels.provenance.as_mut_slice();
        for i in 0..cells {
            let p = probs.as_slice()[i];
            let aligned_pos = prov[i] == Provenance::Aligned && target[i] == 1;
            if p > cfg.t_pos {
                target[i] = 1;
                prov[i] = Provenance::PseudoPos;
            } else if p < cfg.t_neg {
                if !(aligned_pos && cfg.aligned_positive_wins) {
                    target[i] = 0;
                    prov[i] = Provenance::PseudoNeg;
                }
            } else if h == Head::Onset && p > 0.5 && prov[i] == Provenance::Aligned && target[i] == 0 {
                prov[i] = Provenance::UnknownMasked;
            }
        }
    }
    Ok(out)
}

/// Labels from confidences alone: `p > threshold` positive, everything else negative.
pub fn threshold_labels(stack: &ActivationStack, threshold: f32) -> LabelGrid {
    let mut g = LabelGrid::new_aligned(stack.frames(), stack.clock, stack.layout);
    for h in Head::ALL {
        let probs = stack.head(h);
        let labels = g.head_mut(h);
        labels.target = probs.map(|p| u8::from(p > threshold));
        labels.provenance = probs.map(|p| {
            if p > threshold {
                Provenance::PseudoPos
            } else {
                Provenance::PseudoNeg
            }
        });
    }
    g
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalMaxConfig {
    /// Odd window length in frames, centered on the label.
    pub window: usize,
    pub sweeps: usize,
    /// Also move offsets toward offset-probability maxima.
    pub offsets: bool,
}

impl Default for LocalMaxConfig {
    fn default() -> Self {
        LocalMaxConfig {
            window: 7,
            sweeps: 3,
            offsets: true,
        }
    }
}

impl LocalMaxConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window % 2 == 0 {
            return Err(Error::InvalidConfig(format!("local-max window {} must be odd", self.window)));
        }
        Ok(())
    }

    fn half(&self) -> usize {
        self.window / 2
    }
}

/// One sweep for a single label position: the strongest strictly-better
/// neighbor on each side (nearest on ties) replaces it; both sides may fire.
fn sweep_moves(
    s: usize,
    half: usize,
    probs: &Matrix<f32>,
    prov: &Matrix<Provenance>,
    c: usize,
    out: &mut Vec<usize>,
) {
    let here = probs.get(s, c);
    let eligible = |t: usize| prov.get(t, c) == Provenance::Aligned;
    let mut moved = false;
    let lo = s.saturating_sub(half);
    let mut best: Option<(usize, f32)> = None;
    for t in (lo..s).rev() {
        if eligible(t) && best.is_none_or(|(_, b)| probs.get(t, c) > b) {
            best = Some((t, probs.get(t, c)));
        }
    }
    if let Some((t, p)) = best {
        if p > here {
            out.push(t);
            moved = true;
        }
    }
    let hi = (s + half).min(probs.rows() - 1);
    let mut best: Option<(usize, f32)> = None;
    for t in s + 1..=hi {
        if eligible(t) && best.is_none_or(|(_, b)| probs.get(t, c) > b) {
            best = Some((t, probs.get(t, c)));
        }
    }
    if let Some((t, p)) = best {
        if p > here {
            out.push(t);
            moved = true;
        }
    }
    if !moved {
        out.push(s);
    }
}

/// Final positions reached from `origin` after all sweeps.
fn settle(origin: usize, cfg: &LocalMaxConfig, probs: &Matrix<f32>, prov: &Matrix<Provenance>, c: usize) -> Vec<usize> {
    let mut current = vec![origin];
    let mut next = Vec::new();
    for _ in 0..cfg.sweeps {
        next.clear();
        for &s in &current {
            sweep_moves(s, cfg.half(), probs, prov, c, &mut next);
        }
        next.sort_unstable();
        next.dedup();
        std::mem::swap(&mut current, &mut next);
    }
    current
}

/// Moves each aligned onset (and optionally offset) label to a nearby local
/// maximum of the predicted probability, re-anchoring the note's frame run.
pub fn local_max_adjust(grid: &LabelGrid, stack: &ActivationStack, cfg: &LocalMaxConfig) -> Result<LabelGrid> {
    cfg.validate()?;
    grid.check_stack(stack, "local-max stack")?;
    let mut out = grid.clone();
    let frames = grid.frames();
    if frames == 0 {
        return Ok(out);
    }
    for c in 0..grid.classes() {
        adjust_onsets(&mut out, grid, stack, cfg, c);
        if cfg.offsets {
            adjust_offsets(&mut out, grid, stack, cfg, c);
        }
    }
    Ok(out)
}

fn origins(labels: &HeadLabels, c: usize) -> Vec<usize> {
    (0..labels.target.rows()).filter(|&t| labels.is_aligned_positive(t, c)).collect()
}

fn set_frame(out: &mut LabelGrid, t: usize, c: usize, v: u8) {
    if out.frame.provenance.get(t, c) == Provenance::Aligned {
        out.frame.target.set(t, c, v);
    }
}

fn adjust_onsets(out: &mut LabelGrid, orig: &LabelGrid, stack: &ActivationStack, cfg: &LocalMaxConfig, c: usize) {
    let starts = origins(&orig.onset, c);
    if starts.is_empty() {
        return;
    }
    let moves: Vec<(usize, Vec<usize>)> = starts
        .iter()
        .map(|&t0| (t0, settle(t0, cfg, &stack.onset, &orig.onset.provenance, c)))
        .collect();
    for &t0 in &starts {
        out.onset.target.set(t0, c, 0);
    }
    for (_, finals) in &moves {
        for &f in finals {
            out.onset.target.set(f, c, 1);
        }
    }
    for (t0, finals) in &moves {
        let t0 = *t0;
        let first = finals[0];
        if first < t0 {
            for t in first..t0 {
                set_frame(out, t, c, 1);
            }
        } else if first > t0 {
            let run_starts_here = t0 == 0 || orig.frame.target.get(t0 - 1, c) == 0;
            if run_starts_here {
                for t in t0..first {
                    if out.onset.target.get(t, c) == 1 {
                        break;
                    }
                    set_frame(out, t, c, 0);
                }
            }
        }
        for &f in finals {
            set_frame(out, f, c, 1);
        }
    }
}

fn adjust_offsets(out: &mut LabelGrid, orig: &LabelGrid, stack: &ActivationStack, cfg: &LocalMaxConfig, c: usize) {
    let ends = origins(&orig.offset, c);
    if ends.is_empty() {
        return;
    }
    let moves: Vec<(usize, Vec<usize>)> = ends
        .iter()
        .map(|&t0| (t0, settle(t0, cfg, &stack.offset, &orig.offset.provenance, c)))
        .collect();
    for &t0 in &ends {
        out.offset.target.set(t0, c, 0);
    }
    for (_, finals) in &moves {
        for &f in finals {
            out.offset.target.set(f, c, 1);
        }
    }
    for (t0, finals) in &moves {
        let t0 = *t0;
        let last = *finals.last().expect("settle never returns empty");
        if last > t0 {
            // the run only reaches t0 if a note actually ends there
            if t0 > 0 && out.frame.target.get(t0 - 1, c) == 1 {
                for t in t0..last {
                    set_frame(out, t, c, 1);
                }
            }
        } else if last < t0 {
            for t in last..t0 {
                if out.onset.target.get(t, c) == 1 {
                    continue;
                }
                set_frame(out, t, c, 0);
            }
        }
    }
}

/// Transposes a label grid for pitch-shift augmentation. Cells shifted past
/// the keyboard edges are dropped. Vacated cells become negatives labeled the
/// way the head labels silence: pseudo negatives if the head carries any,
/// otherwise masked on singular frames and aligned elsewhere.
///
/// # Panics
/// If `|semitones|` exceeds [`MAX_PITCH_SHIFT`].
pub fn shift_grid(grid: &LabelGrid, semitones: i32) -> LabelGrid {
    assert!(semitones.abs() <= MAX_PITCH_SHIFT, "pitch shift {semitones} out of range");
    let vacated = |c: usize| {
        let src = (c % PITCH_COUNT) as i32 - semitones;
        !(0..PITCH_COUNT as i32).contains(&src)
    };
    let mut out = grid.clone();
    for h in Head::ALL {
        let src = grid.head(h);
        let dst = out.head_mut(h);
        dst.target = shift_columns(&src.target, grid.layout, semitones, 0).0;
        dst.provenance = shift_columns(&src.provenance, grid.layout, semitones, Provenance::Aligned).0;
        let pseudo = src.provenance.as_slice().contains(&Provenance::PseudoNeg);
        for t in 0..grid.frames() {
            let fill = if pseudo {
                Provenance::PseudoNeg
            } else if src.provenance.row(t).contains(&Provenance::SingularMasked) {
                Provenance::SingularMasked
            } else {
                continue;
            };
            for (c, p) in dst.provenance.row_mut(t).iter_mut().enumerate() {
                if vacated(c) {
                    *p = fill;
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::notes::{NoteEvent, NoteSequence};
    use crate::roll::rasterize_fit;

    fn clock() -> FrameClock {
        FrameClock::default()
    }

    fn roll_of(notes: Vec<NoteEvent>) -> TargetRoll {
        rasterize_fit(&NoteSequence::new(notes, 1).unwrap(), &clock(), ClassLayout::pitch_only())
    }

    #[test]
    fn identity_path_reproduces_roll() {
        let roll = roll_of(vec![NoteEvent::new(60, 0.0, 0.5), NoteEvent::new(64, 0.2, 0.9)]);
        let path = WarpPath::identity(roll.frames());
        let sing = SingularReport::none(roll.frames(), 3, 100);
        let grid = assign_labels(&path, &sing, &roll).unwrap();
        assert_eq!(grid.to_roll(), roll);
        assert_eq!(grid.masked_cells(), 0);
    }

    #[test]
    fn hierarchy_max_over_matched_frames() {
        // target frames: s=0 frame-only, s=1 onset at class 0
        let mut roll = TargetRoll::zeros(2, clock(), ClassLayout::pitch_only());
        roll.frame.set(0, 0, 1);
        roll.onset.set(1, 0, 1);
        roll.frame.set(1, 0, 1);
        let path = WarpPath::new(vec![(0, 0), (0, 1)], 0.0).unwrap();
        let grid = assign_labels(&path, &SingularReport::none(1, 3, 100), &roll).unwrap();
        assert_eq!(grid.onset.target.get(0, 0), 1);
        assert_eq!(grid.frame.target.get(0, 0), 1);
    }

    #[test]
    fn offset_level_only_sets_offset() {
        let mut roll = TargetRoll::zeros(1, clock(), ClassLayout::pitch_only());
        roll.offset.set(0, 2, 1);
        let grid = assign_labels(&WarpPath::identity(1), &SingularReport::none(1, 3, 100), &roll).unwrap();
        assert_eq!(grid.offset.target.get(0, 2), 1);
        assert_eq!(grid.frame.target.get(0, 2), 0);
    }

    #[test]
    fn singular_frames_masked() {
        let roll = roll_of(vec![NoteEvent::new(60, 0.0, 0.5)]);
        let n = roll.frames();
        let mut pairs: Vec<(usize, usize)> = (0..n).map(|j| (0, j)).collect();
        pairs.push((1, n - 1));
        let path = WarpPath::new(pairs, 0.0).unwrap();
        let sing = crate::dtw::singular_points(&path, 3, 100).unwrap();
        let grid = assign_labels(&path, &sing, &roll).unwrap();
        assert_eq!(grid.onset.provenance.get(0, 0), Provenance::SingularMasked);
        assert_eq!(grid.frame.mask().get(0, 39), 0);
        assert_eq!(grid.frame.mask().get(1, 39), 1);
    }

    #[test]
    fn shape_mismatch() {
        let roll = roll_of(vec![NoteEvent::new(60, 0.0, 0.5)]);
        let path = WarpPath::identity(roll.frames() + 1);
        let sing = SingularReport::none(roll.frames() + 1, 3, 100);
        assert!(matches!(assign_labels(&path, &sing, &roll), Err(Error::ShapeMismatch { .. })));
    }

    fn single_cell_grid(prov: Provenance, target: u8) -> (LabelGrid, ActivationStack) {
        let mut g = LabelGrid::new_aligned(1, clock(), ClassLayout::pitch_only());
        for h in Head::ALL {
            g.head_mut(h).provenance.set(0, 0, prov);
            g.head_mut(h).target.set(0, 0, target);
        }
        let stack = ActivationStack::zeros(1, clock(), ClassLayout::pitch_only());
        (g, stack)
    }

    #[test]
    fn pseudo_positive_overrides_singular() {
        let (g, mut stack) = single_cell_grid(Provenance::SingularMasked, 0);
        stack.onset.set(0, 0, 0.8);
        let out = apply_pseudo_labels(&g, &stack, &PseudoLabelConfig::default()).unwrap();
        assert_eq!(out.onset.target.get(0, 0), 1);
        assert_eq!(out.onset.provenance.get(0, 0), Provenance::PseudoPos);
        assert_eq!(out.onset.mask().get(0, 0), 1);
    }

    #[test]
    fn unknown_band_on_onsets_only() {
        let (g, mut stack) = single_cell_grid(Provenance::Aligned, 0);
        stack.onset.set(0, 0, 0.6);
        stack.frame.set(0, 0, 0.6);
        stack.frame.set(0, 1, 0.3);
        let out = apply_pseudo_labels(&g, &stack, &PseudoLabelConfig::default()).unwrap();
        assert_eq!(out.onset.provenance.get(0, 0), Provenance::UnknownMasked);
        assert_eq!(out.onset.mask().get(0, 0), 0);
        assert_eq!(out.frame.provenance.get(0, 0), Provenance::Aligned);
        assert_eq!(out.frame.provenance.get(0, 1), Provenance::Aligned);
    }

    #[test]
    fn aligned_positive_beats_pseudo_negative() {
        let (g, mut stack) = single_cell_grid(Provenance::Aligned, 1);
        stack.frame.set(0, 0, 0.005);
        let out = apply_pseudo_labels(&g, &stack, &PseudoLabelConfig::default()).unwrap();
        assert_eq!(out.frame.target.get(0, 0), 1);
        assert_eq!(out.frame.provenance.get(0, 0), Provenance::Aligned);

        let flipped = PseudoLabelConfig {
            aligned_positive_wins: false,
            ..PseudoLabelConfig::default()
        };
        let out = apply_pseudo_labels(&g, &stack, &flipped).unwrap();
        assert_eq!(out.frame.target.get(0, 0), 0);
        assert_eq!(out.frame.provenance.get(0, 0), Provenance::PseudoNeg);
    }

    #[test]
    fn pseudo_disabled_and_config_checks() {
        let (g, stack) = single_cell_grid(Provenance::Aligned, 0);
        assert_eq!(apply_pseudo_labels(&g, &stack, &PseudoLabelConfig::disabled()).unwrap(), g);
        let bad = PseudoLabelConfig {
            t_pos: 0.4,
            ..PseudoLabelConfig::default()
        };
        assert!(apply_pseudo_labels(&g, &stack, &bad).is_err());
    }

    fn column_grid(p_on: &[f32], onset_at: usize) -> (LabelGrid, ActivationStack) {
        let n = p_on.len();
        let mut g = LabelGrid::new_aligned(n, clock(), ClassLayout::pitch_only());
        g.onset.target.set(onset_at, 0, 1);
        g.frame.target.set(onset_at, 0, 1);
        let mut stack = ActivationStack::zeros(n, clock(), ClassLayout::pitch_only());
        for (t, &p) in p_on.iter().enumerate() {
            stack.onset.set(t, 0, p);
        }
        (g, stack)
    }

    fn onset_frames(g: &LabelGrid) -> Vec<usize> {
        (0..g.frames()).filter(|&t| g.onset.target.get(t, 0) == 1).collect()
    }

    #[test]
    fn local_max_moves_to_peak() {
        let (g, stack) = column_grid(&[0.1, 0.2, 0.9, 0.3], 1);
        let cfg = LocalMaxConfig {
            sweeps: 1,
            ..LocalMaxConfig::default()
        };
        let out = local_max_adjust(&g, &stack, &cfg).unwrap();
        assert_eq!(onset_frames(&out), vec![2]);
        assert_eq!(out.frame.target.get(2, 0), 1);
        assert_eq!(out.frame.target.get(1, 0), 0);
    }

    #[test]
    fn local_max_fixed_point_and_plateau() {
        let (g, stack) = column_grid(&[0.1, 0.9, 0.3, 0.2], 1);
        let out = local_max_adjust(&g, &stack, &LocalMaxConfig::default()).unwrap();
        assert_eq!(onset_frames(&out), vec![1]);

        let (g, stack) = column_grid(&[0.5, 0.5, 0.5, 0.5, 0.5], 2);
        let out = local_max_adjust(&g, &stack, &LocalMaxConfig::default()).unwrap();
        assert_eq!(onset_frames(&out), vec![2]);
    }

    #[test]
    fn local_max_inclusive_both_sides() {
        let (g, stack) = column_grid(&[0.0, 0.8, 0.1, 0.2, 0.7, 0.0, 0.0], 2);
        let cfg = LocalMaxConfig {
            sweeps: 1,
            ..LocalMaxConfig::default()
        };
        let out = local_max_adjust(&g, &stack, &cfg).unwrap();
        assert_eq!(onset_frames(&out), vec![1, 4]);
        // frame run re-anchored to the earliest onset
        assert_eq!(out.frame.target.get(1, 0), 1);
    }

    #[test]
    fn even_window_rejected() {
        let (g, stack) = column_grid(&[0.1, 0.2], 0);
        let cfg = LocalMaxConfig {
            window: 4,
            ..LocalMaxConfig::default()
        };
        assert!(local_max_adjust(&g, &stack, &cfg).is_err());
    }

    #[test]
    fn threshold_labels_mark_everything() {
        let mut stack = ActivationStack::zeros(2, clock(), ClassLayout::pitch_only());
        stack.frame.set(1, 3, 0.7);
        let g = threshold_labels(&stack, 0.5);
        assert_eq!(g.frame.target.get(1, 3), 1);
        assert_eq!(g.masked_cells(), 0);
    }

    #[test]
    fn shift_grid_vacates_as_negative() {
        let roll = roll_of(vec![NoteEvent::new(21, 0.0, 0.2)]);
        let g = LabelGrid::from_roll(&roll);
        let up = shift_grid(&g, 2);
        assert_eq!(up.onset.target.get(0, 2), 1);
        assert_eq!(up.onset.target.get(0, 0), 0);
        assert_eq!(up.onset.provenance.get(0, 0), Provenance::Aligned);
    }
}
