//! Piece list shared by `synth`, `em` and evaluation.

use std::path::{Path, PathBuf};

use noteem_core::FrameClock;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestPiece {
    pub id: String,
    /// Score the piece is labeled from.
    pub score: PathBuf,
    /// Transcriber predictions for the performance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stack: Option<PathBuf>,
    /// Ground-truth performance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub performance: Option<PathBuf>,
    /// Seed for anything derived from this piece (e.g. feature noise).
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub sample_rate: u32,
    pub hop: u32,
    #[serde(default = "pitch")]
    pub instruments: String,
    pub pieces: Vec<ManifestPiece>,
}

fn pitch() -> String {
    "pitch".into()
}

impl Manifest {
    /// Loads a manifest and resolves piece paths against its directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::read(path, e))?;
        let mut m: Manifest =
            serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in &mut m.pieces {
            p.score = base.join(&p.score);
            p.stack = p.stack.as_ref().map(|s| base.join(s));
            p.performance = p.performance.as_ref().map(|s| base.join(s));
        }
        Ok(m)
    }

    pub fn clock(&self) -> CliResult<FrameClock> {
        FrameClock::new(self.sample_rate, self.hop).map_err(|e| CliError::from_core("manifest clock", e))
    }
}

impl ManifestPiece {
    pub fn require_stack(&self) -> CliResult<&Path> {
        self.stack
            .as_deref()
            .ok_or_else(|| CliError::input(format!("piece {} has no stack file", self.id)))
    }

    pub fn require_performance(&self) -> CliResult<&Path> {
        self.performance
            .as_deref()
            .ok_or_else(|| CliError::input(format!("piece {} has no performance file", self.id)))
    }
}
