//! `noteem`: align scores to transcriber output, run label refinement,
//! score transcriptions and generate synthetic benchmarks.

pub mod commands;
pub mod config;
pub mod error;
pub mod formats;
pub mod io;
pub mod manifest;

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use error::{exit, CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "noteem", version, about = "Score-aligned label generation for note transcription")]
pub struct Cli {
    /// Worker threads; 0 uses every logical core.
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,

    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Align a score to a prediction stack and write labels.
    Align(AlignArgs),
    /// Run label refinement and training over a corpus.
    Em(EmArgs),
    /// Score an estimated transcription against a reference.
    Eval(EvalArgs),
    /// Generate a synthetic benchmark corpus.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Args)]
pub struct AlignArgs {
    #[arg(long)]
    pub stack: PathBuf,
    #[arg(long)]
    pub midi: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub w: usize,
    #[arg(long = "w-prime", default_value_t = 100)]
    pub w_prime: usize,
    /// Onset weight of the alignment descriptor.
    #[arg(long = "A", default_value_t = 100.0)]
    pub a: f64,
    /// Frame weight of the alignment descriptor.
    #[arg(long = "B", default_value_t = 0.01)]
    pub b: f64,
    /// Offset weight of the alignment descriptor.
    #[arg(long = "C", default_value_t = 0.001)]
    pub c: f64,
    #[arg(long = "t-pos", default_value_t = 0.75)]
    pub t_pos: f32,
    #[arg(long = "t-neg", default_value_t = 0.01)]
    pub t_neg: f32,
    #[arg(long = "no-pseudo")]
    pub no_pseudo: bool,
    #[arg(long = "no-local-max")]
    pub no_local_max: bool,
    /// Sakoe-Chiba band half-width in frames.
    #[arg(long)]
    pub band: Option<usize>,
    /// `pitch`, `musicnet` or `identity:N`; inferred from the stack when omitted.
    #[arg(long)]
    pub instruments: Option<String>,
    /// Label file to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the JSON summary here.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Accepted for uniformity; alignment is deterministic.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct EmArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum OutputFormat {
    Table,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long = "ref")]
    pub reference: PathBuf,
    #[arg(long)]
    pub est: PathBuf,
    /// Comma-separated families: note, frame, offset, instrument.
    #[arg(long, default_value = "note,frame,offset")]
    pub metrics: String,
    #[arg(long = "offset-sweep")]
    pub offset_sweep: bool,
    #[arg(long = "onset-tol", default_value_t = 0.05)]
    pub onset_tol: f64,
    #[arg(long = "offset-tol-s", default_value_t = 0.05)]
    pub offset_tol_s: f64,
    #[arg(long = "offset-tol-pct", default_value_t = 0.20)]
    pub offset_tol_pct: f64,
    /// `pitch`, `musicnet` or `identity:N`.
    #[arg(long, default_value = "pitch")]
    pub instruments: String,
    #[arg(long, value_enum, default_value_t = OutputFormat::Table)]
    pub format: OutputFormat,
    /// Also write the JSON report here.
    #[arg(long)]
    pub json: Option<PathBuf>,
    #[arg(long = "sample-rate", default_value_t = 16000)]
    pub sample_rate: u32,
    #[arg(long, default_value_t = 512)]
    pub hop: u32,
    /// Accepted for uniformity; scoring is deterministic.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub pieces: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Notes per score.
    #[arg(long, default_value_t = 260)]
    pub notes: usize,
    /// Also write each ground-truth performance as MIDI.
    #[arg(long)]
    pub truth: bool,
    /// Perform the score's notes exactly (tempo warp and jitter only).
    #[arg(long = "warp-only")]
    pub warp_only: bool,
    #[arg(long = "duration-jitter", default_value_t = 0.0)]
    pub duration_jitter: f64,
    #[arg(long = "miss-rate", default_value_t = 0.1)]
    pub miss_rate: f64,
    #[arg(long = "fp-rate", default_value_t = 1e-5)]
    pub fp_rate: f64,
    #[arg(long = "prob-noise-std", default_value_t = 0.05)]
    pub prob_noise_std: f64,
    #[arg(long, default_value_t = 0.8)]
    pub fidelity: f64,
}

/// Runs a parsed command line, writing human-readable output to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> CliResult<()> {
    #[cfg(feature = "parallel")]
    {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build()
            .map_err(|e| CliError::io(format!("cannot start worker pool: {e}")))?;
        let mut buf = Vec::new();
        let result = pool.install(|| dispatch(cli, &mut buf));
        out.write_all(&buf).map_err(|e| CliError::io(format!("cannot write output: {e}")))?;
        result
    }
    #[cfg(not(feature = "parallel"))]
    {
        dispatch(cli, out)
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> CliResult<()> {
    match &cli.command {
        Command::Align(a) => commands::align::run(a, out),
        Command::Em(a) => commands::em::run(a, out),
        Command::Eval(a) => commands::eval::run(a, out),
        Command::Synth(a) => commands::synth::run(a, out),
    }
}
