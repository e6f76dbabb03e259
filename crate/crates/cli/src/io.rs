//! File helpers that attach paths and exit codes to failures.

use std::fs;
use std::path::Path;

use noteem_core::labeler::LabelGrid;
use noteem_core::midi::{read_notes, write_smf, InstrumentMap};
use noteem_core::{ActivationStack, NoteSequence};
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::formats::{decode_labels, decode_stack, encode_labels, encode_stack, write_atomic};

pub fn read_bytes(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::read(path, e))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> CliResult<()> {
    write_atomic(path, bytes).map_err(|e| CliError::write(path, e))
}

pub fn read_stack(path: &Path) -> CliResult<ActivationStack> {
    decode_stack(&read_bytes(path)?).map_err(|e| CliError::from_core(path.display(), e))
}

pub fn write_stack(path: &Path, stack: &ActivationStack) -> CliResult<()> {
    let bytes = encode_stack(stack).map_err(|e| CliError::from_core(path.display(), e))?;
    write_bytes(path, &bytes)
}

pub fn read_label_file(path: &Path) -> CliResult<LabelGrid> {
    decode_labels(&read_bytes(path)?).map_err(|e| CliError::from_core(path.display(), e))
}

pub fn write_label_file(path: &Path, grid: &LabelGrid) -> CliResult<()> {
    let bytes = encode_labels(grid).map_err(|e| CliError::from_core(path.display(), e))?;
    write_bytes(path, &bytes)
}

pub fn read_midi(path: &Path, imap: &InstrumentMap) -> CliResult<NoteSequence> {
    let (seq, report) = read_notes(&read_bytes(path)?, imap).map_err(|e| CliError::from_core(path.display(), e))?;
    if report.dropped_out_of_range + report.dropped_ignored + report.dropped_empty > 0 {
        log::warn!("{}: {report:?}", path.display());
    }
    Ok(seq)
}

pub fn write_midi(path: &Path, seq: &NoteSequence, imap: &InstrumentMap) -> CliResult<()> {
    let bytes = write_smf(seq, imap).map_err(|e| CliError::from_core(path.display(), e))?;
    write_bytes(path, &bytes)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::io(e.to_string()))?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}
