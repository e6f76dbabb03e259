//! TOML schema of `noteem em` runs. Relative paths resolve against the
//! config file's directory.

use std::path::{Path, PathBuf};

use noteem_core::descriptor::DescriptorWeights;
use noteem_core::dtw::{Distance, DtwOptions};
use noteem_core::em::{EmConfig, MStepConfig};
use noteem_core::labeler::{LocalMaxConfig, PseudoLabelConfig};
use noteem_core::midi::InstrumentMap;
use noteem_core::pipeline::LabelingConfig;
use noteem_core::synth::{ToyTrainConfig, CorpusSpec};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TranscriberKind {
    /// Fixed predictions read from each piece's stack file.
    #[default]
    Stacks,
    /// The built-in linear transcriber on features rendered from the performance.
    Toy,
    /// Noisy oracle predictions of the performance.
    Oracle,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelMode {
    /// Score alignment with keep-best relabeling.
    #[default]
    Em,
    /// Thresholded predictions of the current model.
    Threshold,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LabelingSection {
    pub w: usize,
    pub w_prime: usize,
    pub onset_weight: f64,
    pub frame_weight: f64,
    pub offset_weight: f64,
    pub distance: Distance,
    pub band: Option<usize>,
    pub pseudo: bool,
    pub t_pos: f32,
    pub t_neg: f32,
    pub local_max: bool,
    pub local_max_window: usize,
    pub local_max_sweeps: usize,
    pub local_max_offsets: bool,
}

impl Default for LabelingSection {
    fn default() -> Self {
        let l = LabelingConfig::default();
        let lm = LocalMaxConfig::default();
        LabelingSection {
            w: l.w,
            w_prime: l.w_prime,
            onset_weight: l.weights.onset,
            frame_weight: l.weights.frame,
            offset_weight: l.weights.offset,
            distance: l.dtw.distance,
            band: l.dtw.band,
            pseudo: true,
            t_pos: l.pseudo.t_pos,
            t_neg: l.pseudo.t_neg,
            local_max: true,
            local_max_window: lm.window,
            local_max_sweeps: lm.sweeps,
            local_max_offsets: lm.offsets,
        }
    }
}

impl LabelingSection {
    pub fn to_config(&self) -> CliResult<LabelingConfig> {
        let weights = DescriptorWeights::new(self.onset_weight, self.frame_weight, self.offset_weight)
            .map_err(|e| CliError::from_core("labeling weights", e))?;
        let cfg = LabelingConfig {
            weights,
            dtw: DtwOptions {
                distance: self.distance,
                band: self.band,
            },
            w: self.w,
            w_prime: self.w_prime,
            local_max: self.local_max.then_some(LocalMaxConfig {
                window: self.local_max_window,
                sweeps: self.local_max_sweeps,
                offsets: self.local_max_offsets,
            }),
            pseudo: PseudoLabelConfig {
                t_pos: self.t_pos,
                t_neg: self.t_neg,
                enabled: self.pseudo,
                ..PseudoLabelConfig::default()
            },
        };
        cfg.validate().map_err(|e| CliError::from_core("labeling", e))?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToySection {
    pub pretrain_pieces: usize,
    pub pretrain_steps: usize,
    pub pretrain: CorpusSpec,
    pub learning_rate: f32,
    pub batch_frames: usize,
    /// `recorded` or `synthetic` rendering of the manifest's performances.
    pub render: String,
}

impl Default for ToySection {
    fn default() -> Self {
        let t = ToyTrainConfig::default();
        ToySection {
            pretrain_pieces: 8,
            pretrain_steps: 3000,
            pretrain: CorpusSpec {
                notes: 130,
                ..CorpusSpec::default()
            },
            learning_rate: t.learning_rate,
            batch_frames: t.batch_frames,
            render: "recorded".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleSection {
    pub miss_rate: f64,
    pub fp_rate: f64,
    pub prob_noise_std: f64,
    /// Fidelity after 0, 1, 2, … training calls; the last value persists.
    pub fidelity_schedule: Vec<f64>,
    pub equivariant: bool,
}

impl Default for OracleSection {
    fn default() -> Self {
        let n = noteem_core::synth::OracleNoise::default();
        OracleSection {
            miss_rate: n.miss_rate,
            fp_rate: n.fp_rate,
            prob_noise_std: n.prob_noise_std,
            fidelity_schedule: vec![n.fidelity],
            equivariant: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    pub manifest: PathBuf,
    #[serde(default = "default_onset_tol")]
    pub onset_tol: f64,
    #[serde(default = "half")]
    pub onset_threshold: f32,
    #[serde(default = "half")]
    pub frame_threshold: f32,
}

fn default_onset_tol() -> f64 {
    noteem_core::metrics::DEFAULT_ONSET_TOL
}

fn half() -> f32 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub manifest: PathBuf,
    pub out: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub transcriber: TranscriberKind,
    #[serde(default)]
    pub label_mode: LabelMode,
    #[serde(default = "half")]
    pub threshold: f32,
    #[serde(default = "default_iterations")]
    pub max_iterations: usize,
    #[serde(default)]
    pub label_schedule: Option<Vec<usize>>,
    /// Defaults to 1 for instrument-sensitive runs and 0 otherwise.
    #[serde(default)]
    pub pseudo_from_labeling: Option<usize>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// `pitch`, `musicnet` or `identity:N`.
    #[serde(default = "default_instruments")]
    pub instruments: String,
    #[serde(default)]
    pub labeling: LabelingSection,
    #[serde(default)]
    pub m_step: MStepConfig,
    #[serde(default)]
    pub toy: ToySection,
    #[serde(default)]
    pub oracle: OracleSection,
    #[serde(default)]
    pub eval: Option<EvalSection>,
}

fn default_iterations() -> usize {
    EmConfig::default().max_iterations
}

fn default_epsilon() -> f64 {
    EmConfig::default().epsilon
}

fn default_instruments() -> String {
    "pitch".into()
}

impl RunConfig {
    /// Parses the file and makes relative paths absolute against its directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::read(path, e))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.manifest = base.join(&cfg.manifest);
        cfg.out = base.join(&cfg.out);
        if let Some(eval) = &mut cfg.eval {
            eval.manifest = base.join(&eval.manifest);
        }
        Ok(cfg)
    }

    pub fn instrument_map(&self) -> CliResult<InstrumentMap> {
        parse_instrument_map(&self.instruments)
    }

    pub fn em_config(&self, imap: &InstrumentMap) -> CliResult<EmConfig> {
        let cfg = EmConfig {
            labeling: self.labeling.to_config()?,
            m_step: self.m_step.clone(),
            max_iterations: self.max_iterations,
            label_schedule: self.label_schedule.clone(),
            pseudo_from_labeling: self
                .pseudo_from_labeling
                .unwrap_or(usize::from(imap.is_instrument_sensitive())),
            epsilon: self.epsilon,
            parallelism: Default::default(),
        };
        cfg.validate().map_err(|e| CliError::from_core("config", e))?;
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(CliError::input(format!("threshold {} outside [0, 1]", self.threshold)));
        }
        Ok(cfg)
    }
}

/// `pitch`, `musicnet`, or `identity:N`.
pub fn parse_instrument_map(name: &str) -> CliResult<InstrumentMap> {
    match name {
        "pitch" => Ok(InstrumentMap::pitch_only()),
        "musicnet" => Ok(InstrumentMap::musicnet_with_guitar()),
        other => {
            let n = other
                .strip_prefix("identity:")
                .and_then(|n| n.parse::<usize>().ok())
                .ok_or_else(|| CliError::input(format!("unknown instrument map '{other}'")))?;
            InstrumentMap::identity(n).map_err(|e| CliError::from_core("instrument map", e))
        }
    }
}
