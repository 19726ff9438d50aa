//! Artifact emission: every produced file is recorded with a content
//! digest in a manifest, so reruns can be compared byte for byte.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
    Svg,
}

impl Format {
    pub fn parse_list(text: &str) -> Result<Vec<Format>> {
        let mut formats = Vec::new();
        for part in text.split(',') {
            let format = match part.trim() {
                "json" => Format::Json,
                "csv" => Format::Csv,
                "svg" => Format::Svg,
                other => anyhow::bail!("unknown format {other:?} (expected json, csv, svg)"),
            };
            if !formats.contains(&format) {
                formats.push(format);
            }
        }
        Ok(formats)
    }
}

#[derive(Debug, Serialize)]
struct ManifestEntry {
    path: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    seed: u64,
    engine: &'a str,
    artifacts: Vec<ManifestEntry>,
}

/// Writes artifacts under one output directory and tracks their digests.
pub struct ArtifactWriter {
    out_dir: PathBuf,
    formats: Vec<Format>,
    entries: Vec<ManifestEntry>,
}

impl ArtifactWriter {
    pub fn new(out_dir: &Path, formats: Vec<Format>) -> Result<Self> {
        fs::create_dir_all(out_dir)
            .with_context(|| format!("cannot create output directory {}", out_dir.display()))?;
        Ok(ArtifactWriter {
            out_dir: out_dir.to_path_buf(),
            formats,
            entries: Vec::new(),
        })
    }

    fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.out_dir.join(name);
        fs::write(&path, bytes).with_context(|| format!("cannot write {}", path.display()))?;
        let digest = Sha256::digest(bytes);
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        self.entries.push(ManifestEntry {
            path: name.to_string(),
            sha256: hex,
        });
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        if !self.formats.contains(&Format::Json) {
            return Ok(());
        }
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    pub fn csv(&mut self, name: &str, content: &str) -> Result<()> {
        if !self.formats.contains(&Format::Csv) {
            return Ok(());
        }
        self.write_bytes(name, content.as_bytes())
    }

    pub fn svg(&mut self, name: &str, content: &str) -> Result<()> {
        if !self.formats.contains(&Format::Svg) {
            return Ok(());
        }
        self.write_bytes(name, content.as_bytes())
    }

    /// Writes the manifest itself (always emitted) and returns its path.
    pub fn finish(mut self, seed: u64, engine: &str) -> Result<PathBuf> {
        self.entries.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = Manifest {
            seed,
            engine,
            artifacts: self.entries,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        let path = self.out_dir.join("manifest.json");
        fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(path)
    }
}
