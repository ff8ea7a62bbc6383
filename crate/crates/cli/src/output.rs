//! Report writing: atomic file replacement and the versioned JSON envelope.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

/// Version stamped into every JSON report; bumped with the schemas in
/// `schemas/`.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema: &'a str,
    schema_version: u32,
    #[serde(flatten)]
    body: &'a T,
}

/// Collects written paths so the command can list them on stdout.
pub struct Sink {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Sink {
    pub fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(Self { dir: dir.to_path_buf(), written: Vec::new() })
    }

    /// Writes `bytes` to `name` via a temporary file in the same directory
    /// and a rename, so readers never see a partial report.
    pub fn bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)
            .with_context(|| format!("creating temporary file in {}", self.dir.display()))?;
        tmp.write_all(bytes)?;
        tmp.as_file().sync_all()?;
        tmp.persist(&path).with_context(|| format!("replacing {}", path.display()))?;
        self.written.push(path);
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, kind: &str, body: &T) -> Result<()> {
        let env = Envelope { schema: kind, schema_version: SCHEMA_VERSION, body };
        let mut text = serde_json::to_string_pretty(&env)?;
        text.push('\n');
        self.bytes(name, text.as_bytes())
    }

    /// Renders CSV through a writer callback and stores it atomically.
    pub fn csv(&mut self, name: &str, render: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        render(&mut buf)?;
        self.bytes(name, &buf)
    }

    pub fn finish(self) {
        let stdout = std::io::stdout();
        let mut out = stdout.lock();
        for p in self.written {
            let _ = writeln!(out, "{}", p.display());
        }
    }
}

/// Keeps region names usable inside file names.
pub fn file_token(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}
