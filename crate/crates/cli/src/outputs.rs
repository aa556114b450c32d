//! Deterministic artifact writing: fixed-precision CSV, JSON summaries, and
//! a manifest of content hashes per run.

use crate::{CliError, CliResult};
use codimlab_core::numeric::fnv1a64;
use std::io::Write;
use std::path::{Path, PathBuf};

pub struct Artifacts {
    dir: PathBuf,
    entries: Vec<(String, u64)>,
}

impl Artifacts {
    pub fn new(dir: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Config(format!("cannot create output dir: {e}")))?;
        Ok(Artifacts { dir: dir.to_path_buf(), entries: Vec::new() })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> CliResult<PathBuf> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents)
            .map_err(|e| CliError::Internal(format!("write {name}: {e}")))?;
        self.entries.push((name.to_string(), fnv1a64(contents.as_bytes())));
        Ok(path)
    }

    /// Writes manifest.json listing every artifact with its content hash.
    pub fn finish(mut self, extra: serde_json::Value) -> CliResult<PathBuf> {
        let manifest = serde_json::json!({
            "artifacts": self.entries.iter().map(|(name, hash)| {
                serde_json::json!({ "path": name, "fnv1a64": format!("{hash:016x}") })
            }).collect::<Vec<_>>(),
            "meta": extra,
        });
        let text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| CliError::Internal(e.to_string()))?;
        let path = self.dir.join("manifest.json");
        std::fs::write(&path, &text)
            .map_err(|e| CliError::Internal(format!("write manifest: {e}")))?;
        self.entries.push(("manifest.json".into(), fnv1a64(text.as_bytes())));
        Ok(path)
    }
}

/// Formats a float with full round-trip precision, stable across runs.
pub fn fmt(v: f64) -> String {
    format!("{v:.17e}")
}

/// Builds a CSV string from a header and rows of formatted fields.
pub fn csv(header: &str, rows: &[Vec<String>]) -> String {
    let mut out = String::with_capacity(rows.len() * 64 + header.len() + 1);
    out.push_str(header);
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Writes either pretty JSON to stdout or a human summary line.
pub fn emit(json_mode: bool, human: &str, value: &serde_json::Value) -> CliResult<()> {
    let mut stdout = std::io::stdout().lock();
    if json_mode {
        serde_json::to_writer_pretty(&mut stdout, value)
            .map_err(|e| CliError::Internal(e.to_string()))?;
        writeln!(stdout).ok();
    } else {
        writeln!(stdout, "{human}").ok();
    }
    Ok(())
}
