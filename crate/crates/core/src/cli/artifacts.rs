use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use tempfile::NamedTempFile;

use super::{AppError, AppResult};

/// Writes `path` through a temporary file in the same directory that is
/// renamed into place only after `fill` succeeds.
pub(crate) fn write_atomic<F>(path: &Path, fill: F) -> AppResult<()>
where
    F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
{
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let tmp = NamedTempFile::new_in(dir).map_err(|e| AppError::io(dir, e))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        fill(&mut w).map_err(|e| AppError::io(path, e))?;
        w.flush().map_err(|e| AppError::io(path, e))?;
    }
    tmp.persist(path).map_err(|e| AppError::io(path, e.error))?;
    Ok(())
}

/// Output directory plus a log of what was written.
#[derive(Debug)]
pub struct ArtifactWriter {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl ArtifactWriter {
    pub fn new(dir: &Path) -> AppResult<Self> {
        std::fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
        Ok(Self { dir: dir.to_path_buf(), written: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write<F>(&mut self, name: &str, fill: F) -> AppResult<()>
    where
        F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
    {
        let path = self.dir.join(name);
        write_atomic(&path, fill)?;
        self.written.push(path);
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> AppResult<()> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| AppError::Io { path: self.dir.join(name), message: e.to_string() })?;
        text.push('\n');
        self.write(name, |w| w.write_all(text.as_bytes()))
    }

    pub fn into_written(self) -> Vec<PathBuf> {
        self.written
    }
}
