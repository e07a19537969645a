use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Output files collected in memory and written only once a command has
/// fully succeeded. Each file goes through a temporary file in the target
/// directory and an atomic rename.
#[derive(Debug, Default)]
pub struct OutputSet {
    files: Vec<(String, Vec<u8>)>,
}

impl OutputSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, bytes: impl Into<Vec<u8>>) {
        self.files.push((name.into(), bytes.into()));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|(n, _)| n.as_str())
    }

    pub fn commit(self, dir: &Path) -> Result<Vec<PathBuf>> {
        let io = |path: &Path| {
            let path = path.display().to_string();
            move |source: std::io::Error| Error::Io { path, source }
        };
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        let mut written = Vec::with_capacity(self.files.len());
        for (name, bytes) in self.files {
            let target = dir.join(&name);
            let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io(dir))?;
            tmp.write_all(&bytes).map_err(io(&target))?;
            tmp.persist(&target).map_err(|e| Error::Io { path: target.display().to_string(), source: e.error })?;
            written.push(target);
        }
        Ok(written)
    }
}
