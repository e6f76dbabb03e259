//! Dynamic time warping over descriptor sequences and singular-point detection.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::descriptor::{DescriptorSeq, PITCH_CLASSES};
use crate::error::{Error, Result};

/// Local distance between two descriptor frames.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distance {
    #[default]
    SquaredEuclidean,
    /// `1 - cos(x, y)`; two silent frames are at distance 0, silence vs sound at 1.
    Cosine,
}

impl Distance {
    #[inline]
    pub fn eval(self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            Distance::SquaredEuclidean => {
                let mut acc = 0.0;
                for k in 0..PITCH_CLASSES {
                    let d = x[k] - y[k];
                    acc += d * d;
                }
                acc
            }
            Distance::Cosine => {
                let (mut xy, mut xx, mut yy) = (0.0, 0.0, 0.0);
                for k in 0..PITCH_CLASSES {
                    xy += x[k] * y[k];
                    xx += x[k] * x[k];
                    yy += y[k] * y[k];
                }
                match (xx == 0.0, yy == 0.0) {
                    (true, true) => 0.0,
                    (true, false) | (false, true) => 1.0,
                    _ => (1.0 - xy / (xx.sqrt() * yy.sqrt())).max(0.0),
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DtwOptions {
    pub distance: Distance,
    /// Maximum distance in target frames from the straight corner-to-corner line.
    pub band: Option<usize>,
}

/// A monotone warp from source frames `0..source_len` to target frames `0..target_len`.
#[derive(Clone, Debug, PartialEq)]
pub struct WarpPath {
    pairs: Vec<(usize, usize)>,
    cost: f64,
}

impl WarpPath {
    /// Validates step structure and endpoints.
    pub fn new(pairs: Vec<(usize, usize)>, cost: f64) -> Result<Self> {
        let Some(&first) = pairs.first() else {
            return Err(Error::EmptySequence);
        };
        if first != (0, 0) {
            return Err(Error::InvalidConfig(format!("warp path starts at {first:?}")));
        }
        for w in pairs.windows(2) {
            let (di, dj) = (w[1].0.wrapping_sub(w[0].0), w[1].1.wrapping_sub(w[0].1));
            if !matches!((di, dj), (1, 0) | (0, 1) | (1, 1)) {
                return Err(Error::InvalidConfig(format!("illegal warp step {:?} -> {:?}", w[0], w[1])));
            }
        }
        if !(cost >= 0.0) {
            return Err(Error::InvalidConfig(format!("warp cost {cost}")));
        }
        Ok(WarpPath { pairs, cost })
    }

    /// The diagonal path of a sequence aligned to itself.
    pub fn identity(len: usize) -> Self {
        WarpPath {
            pairs: (0..len).map(|i| (i, i)).collect(),
            cost: 0.0,
        }
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn cost(&self) -> f64 {
        self.cost
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Cost divided by the number of path cells.
    pub fn normalized_cost(&self) -> f64 {
        self.cost / self.pairs.len() as f64
    }

    pub fn source_len(&self) -> usize {
        self.pairs.last().map_or(0, |p| p.0 + 1)
    }

    pub fn target_len(&self) -> usize {
        self.pairs.last().map_or(0, |p| p.1 + 1)
    }

    pub fn is_diagonal(&self) -> bool {
        self.pairs.iter().all(|&(i, j)| i == j) && self.source_len() == self.target_len()
    }

    /// `M(i)`: target frames matched to each source frame (contiguous by monotonicity).
    pub fn source_spans(&self) -> Vec<Range<usize>> {
        spans(self.pairs.iter().map(|&(i, j)| (i, j)), self.source_len())
    }

    /// `M⁻¹(j)`: source frames matched to each target frame.
    pub fn target_spans(&self) -> Vec<Range<usize>> {
        spans(self.pairs.iter().map(|&(i, j)| (j, i)), self.target_len())
    }
}

fn spans(pairs: impl Iterator<Item = (usize, usize)>, len: usize) -> Vec<Range<usize>> {
    let mut out = vec![usize::MAX..0; len];
    for (a, b) in pairs {
        let r = &mut out[a];
        r.start = r.start.min(b);
        r.end = r.end.max(b + 1);
    }
    out
}

const DIAG: u8 = 0;
const LEFT: u8 = 1; // from (i, j-1)
const UP: u8 = 2; // from (i-1, j)
const NONE: u8 = 3;

/// Aligns `source` to `target` with squared-Euclidean local cost.
pub fn dtw_align(source: &DescriptorSeq, target: &DescriptorSeq, band: Option<usize>) -> Result<WarpPath> {
    dtw_align_with(
        source,
        target,
        &DtwOptions {
            band,
            ..DtwOptions::default()
        },
    )
}

/// Full (or banded) DTW with steps `(1,0)`, `(0,1)`, `(1,1)` and no slope weights.
///
/// Accumulated cost is kept in two rolling rows; only step directions are stored
/// per cell. Ties between predecessors prefer the diagonal, then `(i, j-1)`, then `(i-1, j)`.
pub fn dtw_align_with(source: &DescriptorSeq, target: &DescriptorSeq, opts: &DtwOptions) -> Result<WarpPath> {
    let (n, m) = (source.len(), target.len());
    if n == 0 || m == 0 {
        return Err(Error::EmptySequence);
    }
    let ranges = band_ranges(n, m, opts.band);
    let mut offsets = Vec::with_capacity(n + 1);
    offsets.push(0usize);
    for r in &ranges {
        offsets.push(offsets.last().unwrap() + r.len());
    }
    let mut dirs = vec![NONE; *offsets.last().unwrap()];

    let mut prev = vec![f64::INFINITY; m];
    let mut cur = vec![f64::INFINITY; m];
    let dist = opts.distance;

    for i in 0..n {
        let x = source.frame(i);
        let range = ranges[i].clone();
        let row_dirs = &mut dirs[offsets[i]..offsets[i + 1]];
        for j in range.clone() {
            let d = dist.eval(x, target.frame(j));
            let (best, dir) = if i == 0 && j == 0 {
                (0.0, DIAG)
            } else {
                let diag = if i > 0 && j > 0 { prev[j - 1] } else { f64::INFINITY };
                let left = if j > 0 { cur[j - 1] } else { f64::INFINITY };
                let up = if i > 0 { prev[j] } else { f64::INFINITY };
                let (mut best, mut dir) = (diag, DIAG);
                if left < best {
                    best = left;
                    dir = LEFT;
                }
                if up < best {
                    best = up;
                    dir = UP;
                }
                (best, dir)
            };
            if best.is_finite() {
                cur[j] = best + d;
                row_dirs[j - range.start] = dir;
            } else {
                cur[j] = f64::INFINITY;
            }
        }
        // clear what is about to become the stale row before swapping
        if i > 0 {
            for j in ranges[i - 1].clone() {
                prev[j] = f64::INFINITY;
            }
        }
        std::mem::swap(&mut prev, &mut cur);
    }

    let cost = prev[m - 1];
    if !cost.is_finite() {
        return Err(Error::BandTooNarrow {
            band: opts.band.unwrap_or(0),
            last_source: n - 1,
            last_target: m - 1,
        });
    }

    let mut pairs = Vec::with_capacity(n + m);
    let (mut i, mut j) = (n - 1, m - 1);
    loop {
        pairs.push((i, j));
        if i == 0 && j == 0 {
            break;
        }
        match dirs[offsets[i] + j - ranges[i].start] {
            DIAG => {
                i -= 1;
                j -= 1;
            }
            LEFT => j -= 1,
            UP => i -= 1,
            _ => unreachable!("backtrack left the reachable region"),
        }
    }
    pairs.reverse();
    Ok(WarpPath { pairs, cost })
}

/// Target-frame window per source row. Without a band every row spans all targets.
fn band_ranges(n: usize, m: usize, band: Option<usize>) -> Vec<Range<usize>> {
    match band {
        Some(b) if n > 1 && m > 1 => {
            let den = (n - 1) as i128;
            let slope = (m - 1) as i128;
            let b = b as i128;
            (0..n)
                .map(|i| {
                    let center = i as i128 * slope;
                    // lo = ceil((center - b·den) / den), hi = floor((center + b·den) / den)
                    let lo_num = center - b * den;
                    let lo = if lo_num <= 0 { 0 } else { (lo_num + den - 1) / den };
                    let hi = ((center + b * den) / den).min(m as i128 - 1);
                    lo as usize..hi as usize + 1
                })
                .collect()
        }
        _ => vec![0..m; n],
    }
}

/// Frames whose warp is degenerate: `S1` collapses more than `w` target frames
/// onto one source frame, `S2` collects source runs of more than `w'` frames
/// collapsed onto one target frame.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SingularReport {
    pub s1: Vec<usize>,
    pub s2: Vec<usize>,
    pub w: usize,
    pub w_prime: usize,
    #[serde(skip)]
    singular: Vec<bool>,
}

impl SingularReport {
    /// A report with no singular frames.
    pub fn none(source_len: usize, w: usize, w_prime: usize) -> Self {
        SingularReport {
            s1: Vec::new(),
            s2: Vec::new(),
            w,
            w_prime,
            singular: vec![false; source_len],
        }
    }

    /// Whether source frame `t` is in `S1 ∪ S2`.
    #[inline]
    pub fn is_singular(&self, t: usize) -> bool {
        self.singular[t]
    }

    pub fn source_len(&self) -> usize {
        self.singular.len()
    }

    pub fn singular_count(&self) -> usize {
        self.singular.iter().filter(|&&s| s).count()
    }
}

pub const DEFAULT_W: usize = 3;
pub const DEFAULT_W_PRIME: usize = 100;

pub fn singular_points(path: &WarpPath, w: usize, w_prime: usize) -> Result<SingularReport> {
    if w == 0 || w_prime == 0 {
        return Err(Error::InvalidConfig(format!("singular-point windows must be ≥ 1, got w={w} w'={w_prime}")));
    }
    let n = path.source_len();
    let mut singular = vec![false; n];
    let s1: Vec<usize> = path
        .source_spans()
        .iter()
        .enumerate()
        .filter(|(_, r)| r.len() > w)
        .map(|(i, _)| i)
        .collect();
    let mut in_s2 = vec![false; n];
    for r in path.target_spans() {
        if r.len() > w_prime {
            in_s2[r].iter_mut().for_each(|v| *v = true);
        }
    }
    let s2: Vec<usize> = (0..n).filter(|&i| in_s2[i]).collect();
    for &i in s1.iter().chain(&s2) {
        singular[i] = true;
    }
    Ok(SingularReport {
        s1,
        s2,
        w,
        w_prime,
        singular,
    })
}
