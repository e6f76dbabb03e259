use std::io::Write;
use std::path::PathBuf;

use noteem_core::midi::{read_notes, write_smf, InstrumentMap};
use noteem_core::par::Parallelism;
use noteem_core::synth::{derive_seed, oracle_predict, synth_piece, CorpusSpec, OracleNoise};
use noteem_core::{ClassLayout, FrameClock, NoteSequence};

use super::emit;
use crate::error::{CliError, CliResult};
use crate::formats::encode_stack;
use crate::io::{write_bytes, write_json};
use crate::manifest::{Manifest, ManifestPiece};
use crate::SynthArgs;

pub const MANIFEST_NAME: &str = "manifest.json";

struct Generated {
    piece: ManifestPiece,
    score_mid: Vec<u8>,
    performance_mid: Vec<u8>,
    stack: Vec<u8>,
}

/// Encodes through MIDI and back so the files and the stack agree tick for tick.
fn quantized(seq: &NoteSequence, imap: &InstrumentMap) -> noteem_core::Result<(Vec<u8>, NoteSequence)> {
    let bytes = write_smf(seq, imap)?;
    let (back, _) = read_notes(&bytes, imap)?;
    Ok((bytes, back))
}

fn generate(args: &SynthArgs, spec: &CorpusSpec, clock: &FrameClock, index: usize) -> noteem_core::Result<Generated> {
    let seed = derive_seed(args.seed, index as u64);
    let imap = InstrumentMap::pitch_only();
    let sp = synth_piece(spec, seed)?;
    let (score_mid, _) = quantized(&sp.score, &imap)?;
    let (performance_mid, performance) = quantized(&sp.performance, &imap)?;
    let noise = OracleNoise {
        miss_rate: args.miss_rate,
        fp_rate: args.fp_rate,
        prob_noise_std: args.prob_noise_std,
        fidelity: args.fidelity,
        seed: derive_seed(seed, 10),
        equivariant: false,
    };
    let stack = oracle_predict(&performance, clock, ClassLayout::pitch_only(), &noise)?;
    let id = format!("piece_{index:03}");
    let dir = PathBuf::from(&id);
    Ok(Generated {
        piece: ManifestPiece {
            score: dir.join("score.mid"),
            stack: Some(dir.join("stack.nem")),
            performance: args.truth.then(|| dir.join("performance.mid")),
            seed,
            id,
        },
        score_mid,
        performance_mid,
        stack: encode_stack(&stack)?,
    })
}

pub fn run(args: &SynthArgs, out: &mut dyn Write) -> CliResult<()> {
    if args.pieces == 0 {
        return Err(CliError::input("--pieces must be at least 1"));
    }
    if args.notes == 0 {
        return Err(CliError::input("--notes must be at least 1"));
    }
    let base = if args.warp_only {
        CorpusSpec::warp_only()
    } else {
        CorpusSpec::default()
    };
    let spec = CorpusSpec {
        notes: args.notes,
        duration_jitter: args.duration_jitter,
        ..base
    };
    let clock = FrameClock::default();
    let generated = Parallelism::default()
        .map_range(args.pieces, |i| generate(args, &spec, &clock, i))
        .into_iter()
        .collect::<noteem_core::Result<Vec<_>>>()
        .map_err(|e| CliError::from_core("synth", e))?;

    let mut pieces = Vec::with_capacity(generated.len());
    for g in generated {
        write_bytes(&args.out.join(&g.piece.score), &g.score_mid)?;
        if let Some(stack) = &g.piece.stack {
            write_bytes(&args.out.join(stack), &g.stack)?;
        }
        if let Some(perf) = &g.piece.performance {
            write_bytes(&args.out.join(perf), &g.performance_mid)?;
        }
        pieces.push(g.piece);
    }
    let manifest = Manifest {
        sample_rate: clock.sample_rate(),
        hop: clock.hop(),
        instruments: "pitch".into(),
        pieces,
    };
    let path = args.out.join(MANIFEST_NAME);
    write_json(&path, &manifest)?;
    emit(out, &format!("wrote {} pieces to {}\n", manifest.pieces.len(), path.display()))
}
