//! Run artifacts are built fully in memory and written in one step, so a
//! failed run never leaves partial output behind.

use anyhow::Context;
use std::path::Path;

/// Relative path → file bytes, plus the human summary echoed to stdout.
pub struct RunArtifacts {
    pub files: Vec<(String, Vec<u8>)>,
    pub summary: String,
}

impl RunArtifacts {
    pub fn new() -> Self {
        Self {
            files: Vec::new(),
            summary: String::new(),
        }
    }

    pub fn add(&mut self, rel_path: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((rel_path.into(), bytes));
    }
}

impl Default for RunArtifacts {
    fn default() -> Self {
        Self::new()
    }
}

/// Write every artifact under `out_dir`, staging into a scratch directory
/// first and renaming files into place only after all of them exist.
pub fn write_artifacts(out_dir: &Path, artifacts: &RunArtifacts) -> anyhow::Result<()> {
    let staging = out_dir.join(format!(".staging-{}", std::process::id()));
    let result = (|| -> anyhow::Result<()> {
        for (rel, bytes) in &artifacts.files {
            let staged = staging.join(rel);
            if let Some(parent) = staged.parent() {
                std::fs::create_dir_all(parent)
                    .with_context(|| format!("creating {}", parent.display()))?;
            }
            std::fs::write(&staged, bytes)
                .with_context(|| format!("writing {}", staged.display()))?;
        }
        for (rel, _) in &artifacts.files {
            let staged = staging.join(rel);
            let target = out_dir.join(rel);
            if let Some(parent) = target.parent() {
                std::fs::create_dir_all(parent)
                    .with_context(|| format!("creating {}", parent.display()))?;
            }
            std::fs::rename(&staged, &target)
                .with_context(|| format!("moving {} into place", target.display()))?;
        }
        Ok(())
    })();
    std::fs::remove_dir_all(&staging).ok();
    result
}
