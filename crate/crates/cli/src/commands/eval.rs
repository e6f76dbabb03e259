use std::io::Write;

use noteem_core::metrics::{evaluate, EvalOptions, MetricFamily};
use noteem_core::FrameClock;

use super::emit;
use crate::config::parse_instrument_map;
use crate::error::{CliError, CliResult};
use crate::io::{read_midi, write_json};
use crate::{EvalArgs, OutputFormat};

pub fn parse_families(list: &str) -> CliResult<Vec<MetricFamily>> {
    let mut out = Vec::new();
    for name in list.split(',').filter(|s| !s.trim().is_empty()) {
        let f = MetricFamily::parse(name).ok_or_else(|| CliError::input(format!("unknown metric '{}'", name.trim())))?;
        if !out.contains(&f) {
            out.push(f);
        }
    }
    if out.is_empty() {
        return Err(CliError::input("no metrics requested"));
    }
    Ok(out)
}

pub fn run(args: &EvalArgs, out: &mut dyn Write) -> CliResult<()> {
    let families = parse_families(&args.metrics)?;
    for (name, v) in [
        ("onset-tol", args.onset_tol),
        ("offset-tol-s", args.offset_tol_s),
        ("offset-tol-pct", args.offset_tol_pct),
    ] {
        if !(v > 0.0) {
            return Err(CliError::input(format!("--{name} must be positive")));
        }
    }
    let clock = FrameClock::new(args.sample_rate, args.hop).map_err(|e| CliError::from_core("clock", e))?;
    let imap = parse_instrument_map(&args.instruments)?;
    let reference = read_midi(&args.reference, &imap)?;
    let estimate = read_midi(&args.est, &imap)?;
    let opts = EvalOptions {
        families,
        onset_tol: args.onset_tol,
        offset_tol_s: args.offset_tol_s,
        offset_tol_pct: args.offset_tol_pct,
        offset_sweep: args.offset_sweep,
    };
    let report = evaluate(&reference, &estimate, &clock, &opts).map_err(|e| CliError::from_core("evaluation", e))?;
    if let Some(path) = &args.json {
        write_json(path, &report)?;
    }
    let text = match args.format {
        OutputFormat::Table => report.to_string(),
        OutputFormat::Json => serde_json::to_string_pretty(&report).map_err(|e| CliError::io(e.to_string()))? + "\n",
    };
    emit(out, &text)
}
