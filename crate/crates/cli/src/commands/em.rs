use std::io::Write;

use noteem_core::em::{run as run_em, run_self_training, EmConfig, EmOutcome, FixedPredictions, Piece, TrainReport, Transcriber, TrainingExample};
use noteem_core::labeler::LabelGrid;
use noteem_core::metrics::{evaluate_corpus, CorpusReport, EvalOptions, MetricFamily};
use noteem_core::midi::InstrumentMap;
use noteem_core::par::Parallelism;
use noteem_core::pipeline::LabelSummary;
use noteem_core::roll::rasterize;
use noteem_core::synth::{
    derive_seed, synth_piece, OracleNoise, OracleTranscriber, ToyInput, ToyRender, ToyTrainConfig, ToyTranscriber,
};
use noteem_core::{ClassLayout, FrameClock, NoteSequence};
use serde::Serialize;

use super::emit;
use crate::config::{EvalSection, LabelMode, RunConfig, TranscriberKind};
use crate::error::{CliError, CliResult};
use crate::io::{read_midi, read_stack, write_bytes, write_json, write_label_file};
use crate::manifest::Manifest;
use crate::EmArgs;

pub const COST_HISTORY: &str = "cost_history.csv";
pub const SUMMARY: &str = "summary.json";
pub const EVAL: &str = "eval.json";
pub const LABEL_DIR: &str = "labels";

#[derive(Debug, Serialize)]
struct PieceReport<'a> {
    id: &'a str,
    cost: Option<f64>,
    summary: Option<&'a LabelSummary>,
    error: Option<&'a str>,
}

#[derive(Debug, Serialize)]
struct RunSummary<'a> {
    transcriber: TranscriberKind,
    label_mode: LabelMode,
    seed: u64,
    converged: bool,
    labelings: usize,
    history: &'a [noteem_core::em::EStepReport],
    training: &'a [TrainReport],
    pieces: Vec<PieceReport<'a>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pretraining: Option<TrainReport>,
}

struct Corpus<I> {
    pieces: Vec<Piece<I>>,
    eval: Vec<(I, NoteSequence)>,
}

pub fn run(args: &EmArgs, out: &mut dyn Write) -> CliResult<()> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let imap = cfg.instrument_map()?;
    let em_cfg = cfg.em_config(&imap)?;
    let manifest = Manifest::load(&cfg.manifest)?;
    if manifest.pieces.is_empty() {
        return Err(CliError::input(format!("{} lists no pieces", cfg.manifest.display())));
    }
    let clock = manifest.clock()?;
    let eval_manifest = cfg.eval.as_ref().map(|e| Manifest::load(&e.manifest)).transpose()?;

    match cfg.transcriber {
        TranscriberKind::Stacks => {
            let corpus = load_corpus(&manifest, eval_manifest.as_ref(), &imap, |p| read_stack(p.require_stack()?))?;
            execute(&cfg, &em_cfg, corpus, FixedPredictions, None, clock, out)
        }
        TranscriberKind::Oracle => {
            let corpus = load_corpus(&manifest, eval_manifest.as_ref(), &imap, |p| {
                read_midi(p.require_performance()?, &imap)
            })?;
            let layout = ClassLayout::new(imap.class_count()).map_err(|e| CliError::from_core("instrument map", e))?;
            let o = &cfg.oracle;
            let noise = OracleNoise {
                miss_rate: o.miss_rate,
                fp_rate: o.fp_rate,
                prob_noise_std: o.prob_noise_std,
                fidelity: o.fidelity_schedule.first().copied().unwrap_or(1.0),
                seed: cfg.seed,
                equivariant: o.equivariant,
            };
            noise.validate().map_err(|e| CliError::from_core("oracle", e))?;
            let layout = if imap.is_instrument_sensitive() { layout } else { ClassLayout::pitch_only() };
            let t = OracleTranscriber::new(clock, layout, noise, o.fidelity_schedule.clone());
            execute(&cfg, &em_cfg, corpus, t, None, clock, out)
        }
        TranscriberKind::Toy => {
            if imap.is_instrument_sensitive() {
                return Err(CliError::input("the toy transcriber is pitch-only; use instruments = \"pitch\""));
            }
            let render = match cfg.toy.render.as_str() {
                "recorded" => ToyRender::recorded,
                "synthetic" => ToyRender::synthetic,
                other => return Err(CliError::input(format!("unknown toy render '{other}'"))),
            };
            let corpus = load_corpus(&manifest, eval_manifest.as_ref(), &imap, |p| {
                let perf = read_midi(p.require_performance()?, &imap)?;
                Ok(ToyInput::new(perf, &clock, render(derive_seed(p.seed, cfg.seed))))
            })?;
            let (model, report) = pretrain_toy(&cfg, clock)?;
            execute(&cfg, &em_cfg, corpus, model, Some(report), clock, out)
        }
    }
}

fn load_corpus<I>(
    manifest: &Manifest,
    eval: Option<&Manifest>,
    imap: &InstrumentMap,
    input: impl Fn(&crate::manifest::ManifestPiece) -> CliResult<I>,
) -> CliResult<Corpus<I>> {
    let mut pieces = Vec::with_capacity(manifest.pieces.len());
    for p in &manifest.pieces {
        pieces.push(Piece {
            id: p.id.clone(),
            score: read_midi(&p.score, imap)?,
            input: input(p)?,
        });
    }
    let mut held_out = Vec::new();
    if let Some(m) = eval {
        for p in &m.pieces {
            let truth = read_midi(p.require_performance()?, imap)?;
            held_out.push((input(p)?, truth));
        }
    }
    Ok(Corpus {
        pieces,
        eval: held_out,
    })
}

/// Supervised training on generated pieces rendered in the synthetic timbre.
pub fn pretrain_toy(cfg: &RunConfig, clock: FrameClock) -> CliResult<(ToyTranscriber, TrainReport)> {
    let t = &cfg.toy;
    let mut model = ToyTranscriber::new(
        clock,
        ToyTrainConfig {
            learning_rate: t.learning_rate,
            batch_frames: t.batch_frames,
            seed: cfg.seed,
            ..ToyTrainConfig::default()
        },
    );
    if t.pretrain_pieces == 0 || t.pretrain_steps == 0 {
        return Ok((model, TrainReport::default()));
    }
    let data = Parallelism::default()
        .map_range(t.pretrain_pieces, |i| {
            let seed = derive_seed(cfg.seed, 1000 + i as u64);
            let sp = synth_piece(&t.pretrain, seed)?;
            let input = ToyInput::new(sp.performance, &clock, ToyRender::synthetic(derive_seed(seed, 5)));
            let roll = rasterize(&input.performance, &clock, ClassLayout::pitch_only(), input.frames)?;
            Ok((input, LabelGrid::from_roll(&roll)))
        })
        .into_iter()
        .collect::<noteem_core::Result<Vec<_>>>()
        .map_err(|e| CliError::from_core("pretraining corpus", e))?;
    let examples: Vec<TrainingExample<'_, ToyInput>> = data
        .iter()
        .map(|(input, labels)| TrainingExample {
            input,
            pitch_shift: 0,
            labels,
        })
        .collect();
    let report = model
        .train(&examples, t.pretrain_steps)
        .map_err(|e| CliError::from_core("pretraining", e))?;
    log::info!("pretrained toy transcriber: {} steps, final loss {:.5}", report.steps, report.final_loss);
    Ok((model, report))
}

fn execute<T>(
    cfg: &RunConfig,
    em_cfg: &EmConfig,
    corpus: Corpus<T::Input>,
    mut transcriber: T,
    pretraining: Option<TrainReport>,
    clock: FrameClock,
    out: &mut dyn Write,
) -> CliResult<()>
where
    T: Transcriber + Sync,
{
    let outcome = match cfg.label_mode {
        LabelMode::Em => run_em(&corpus.pieces, &mut transcriber, em_cfg),
        LabelMode::Threshold => run_self_training(&corpus.pieces, &mut transcriber, em_cfg, cfg.threshold),
    }
    .map_err(|e| CliError::from_core("em", e))?;

    let label_dir = cfg.out.join(LABEL_DIR);
    for (piece, state) in corpus.pieces.iter().zip(&outcome.state.pieces) {
        if let Some(grid) = &state.labels {
            write_label_file(&label_dir.join(format!("{}.nel", piece.id)), grid)?;
        }
    }
    write_bytes(&cfg.out.join(COST_HISTORY), &cost_history_csv(&corpus.pieces, &outcome)?)?;
    let summary = RunSummary {
        transcriber: cfg.transcriber,
        label_mode: cfg.label_mode,
        seed: cfg.seed,
        converged: outcome.converged,
        labelings: outcome.state.labelings,
        history: &outcome.history,
        training: &outcome.training,
        pieces: corpus
            .pieces
            .iter()
            .zip(&outcome.state.pieces)
            .map(|(p, s)| PieceReport {
                id: &p.id,
                cost: s.cost.is_finite().then_some(s.cost),
                summary: s.summary.as_ref(),
                error: s.last_error.as_deref(),
            })
            .collect(),
        pretraining,
    };
    write_json(&cfg.out.join(SUMMARY), &summary)?;

    let mut text = format!(
        "{} labelings, {} training rounds; final mean cost {}\n",
        outcome.state.labelings,
        outcome.training.len(),
        outcome.state.mean_cost().map_or("n/a".to_string(), |c| format!("{c:.6}"))
    );
    if let Some(section) = &cfg.eval {
        let report = evaluate_held_out(&transcriber, &corpus.eval, section, clock)?;
        write_json(&cfg.out.join(EVAL), &report)?;
        if let Some(note) = &report.note {
            text.push_str(&format!(
                "held-out note F1 {:.4} (micro), {:.4} (macro) over {} pieces\n",
                note.micro.f1, note.macro_f1, note.pieces
            ));
        }
    }
    emit(out, &text)
}

fn cost_history_csv<I>(pieces: &[Piece<I>], outcome: &EmOutcome) -> CliResult<Vec<u8>> {
    let fail = |e: csv::Error| CliError::io(format!("cost history: {e}"));
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["iteration".to_string(), "mean_d".to_string()];
    header.extend(pieces.iter().map(|p| p.id.clone()));
    w.write_record(&header).map_err(fail)?;
    let cell = |v: f64| if v.is_finite() { format!("{v}") } else { String::new() };
    for row in &outcome.history {
        let mut rec = vec![row.iteration.to_string(), row.mean_cost.map_or(String::new(), cell)];
        rec.extend(row.costs.iter().map(|&c| cell(c)));
        w.write_record(&rec).map_err(fail)?;
    }
    w.into_inner().map_err(|e| CliError::io(format!("cost history: {e}")))
}

/// Decodes the trained model's predictions and scores them against the true performances.
pub fn evaluate_held_out<T>(
    transcriber: &T,
    pieces: &[(T::Input, NoteSequence)],
    section: &EvalSection,
    clock: FrameClock,
) -> CliResult<CorpusReport>
where
    T: Transcriber + Sync,
{
    let pairs = Parallelism::default()
        .map(pieces, |(input, truth)| {
            let stack = transcriber.predict(input, 0)?;
            Ok((truth.clone(), stack.decode_notes(section.onset_threshold, section.frame_threshold)))
        })
        .into_iter()
        .collect::<noteem_core::Result<Vec<_>>>()
        .map_err(|e| CliError::from_core("held-out prediction", e))?;
    let opts = EvalOptions {
        families: vec![MetricFamily::Note, MetricFamily::Frame, MetricFamily::NoteWithOffset],
        onset_tol: section.onset_tol,
        ..EvalOptions::default()
    };
    evaluate_corpus(&pairs, &clock, &opts, Parallelism::default()).map_err(|e| CliError::from_core("held-out scoring", e))
}

