use std::io::Write;

use noteem_core::descriptor::DescriptorWeights;
use noteem_core::dtw::DtwOptions;
use noteem_core::labeler::{LocalMaxConfig, PseudoLabelConfig};
use noteem_core::midi::InstrumentMap;
use noteem_core::pipeline::{label_piece, LabelSummary, LabelingConfig};
use noteem_core::ClassLayout;
use serde::Serialize;

use super::emit;
use crate::config::parse_instrument_map;
use crate::error::{CliError, CliResult};
use crate::io::{read_midi, read_stack, write_json, write_label_file};
use crate::AlignArgs;

#[derive(Debug, Serialize)]
pub struct AlignSummary {
    #[serde(flatten)]
    pub labels: LabelSummary,
    pub weights: DescriptorWeights,
    pub t_pos: f32,
    pub t_neg: f32,
}

/// Instrument map matching a stack's class layout.
pub fn map_for_layout(layout: ClassLayout) -> CliResult<InstrumentMap> {
    match layout.instruments() {
        1 => Ok(InstrumentMap::pitch_only()),
        12 => Ok(InstrumentMap::musicnet_with_guitar()),
        n => InstrumentMap::identity(n).map_err(|e| CliError::from_core("stack layout", e)),
    }
}

pub fn labeling_config(args: &AlignArgs) -> CliResult<LabelingConfig> {
    let weights =
        DescriptorWeights::new(args.a, args.b, args.c).map_err(|e| CliError::from_core("descriptor weights", e))?;
    let cfg = LabelingConfig {
        weights,
        dtw: DtwOptions {
            band: args.band,
            ..DtwOptions::default()
        },
        w: args.w,
        w_prime: args.w_prime,
        local_max: (!args.no_local_max).then(LocalMaxConfig::default),
        pseudo: PseudoLabelConfig {
            t_pos: args.t_pos,
            t_neg: args.t_neg,
            enabled: !args.no_pseudo,
            ..PseudoLabelConfig::default()
        },
    };
    cfg.validate().map_err(|e| CliError::from_core("options", e))?;
    Ok(cfg)
}

pub fn run(args: &AlignArgs, out: &mut dyn Write) -> CliResult<()> {
    let cfg = labeling_config(args)?;
    let stack = read_stack(&args.stack)?;
    let imap = match &args.instruments {
        Some(name) => parse_instrument_map(name)?,
        None => map_for_layout(stack.layout)?,
    };
    let score = read_midi(&args.midi, &imap)?;
    let outcome = label_piece(&stack, &score, &cfg, !args.no_pseudo)
        .map_err(|e| CliError::from_core(format!("aligning {}", args.midi.display()), e))?;
    if let Some(path) = &args.out {
        write_label_file(path, &outcome.grid)?;
    }
    let summary = AlignSummary {
        labels: outcome.summary,
        weights: cfg.weights,
        t_pos: cfg.pseudo.t_pos,
        t_neg: cfg.pseudo.t_neg,
    };
    if let Some(path) = &args.summary {
        write_json(path, &summary)?;
    }
    let mut text = serde_json::to_string_pretty(&summary).map_err(|e| CliError::io(e.to_string()))?;
    text.push('\n');
    emit(out, &text)
}
