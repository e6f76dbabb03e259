pub mod align;
pub mod em;
pub mod eval;
pub mod synth;

use std::io::Write;

use crate::error::{CliError, CliResult};

pub(crate) fn emit(out: &mut dyn Write, text: &str) -> CliResult<()> {
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| CliError::io(format!("cannot write output: {e}")))
}
