//! All-or-nothing output directories.

use anyhow::{Context, Result};
use std::fs;
use std::path::{Path, PathBuf};

/// Files are written into a hidden sibling of the destination and only moved
/// into place by [`Staging::commit`]. Dropping without committing removes
/// everything written so far.
pub struct Staging {
    dir: PathBuf,
    dest: PathBuf,
    committed: bool,
}

impl Staging {
    pub fn new(dest: &Path) -> Result<Self> {
        let parent = match dest.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        let name = dest.file_name().context("output path has no final component")?.to_string_lossy().into_owned();
        let dir = parent.join(format!(".{name}.partial-{}", std::process::id()));
        if dir.exists() {
            fs::remove_dir_all(&dir)?;
        }
        fs::create_dir(&dir).with_context(|| format!("cannot create output next to {}", dest.display()))?;
        Ok(Self { dir, dest: dest.to_path_buf(), committed: false })
    }

    /// Path inside the staging area.
    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write(&self, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
        let p = self.path(name);
        fs::write(&p, contents).with_context(|| format!("writing {}", p.display()))?;
        Ok(self.dest.join(name))
    }

    /// Final location of `name` once committed.
    pub fn final_path(&self, name: &str) -> PathBuf {
        self.dest.join(name)
    }

    /// Move the staged files into the destination, replacing same-named files.
    pub fn commit(mut self) -> Result<()> {
        if !self.dest.exists() {
            fs::rename(&self.dir, &self.dest).with_context(|| format!("moving output to {}", self.dest.display()))?;
        } else {
            for entry in fs::read_dir(&self.dir)? {
                let entry = entry?;
                fs::rename(entry.path(), self.dest.join(entry.file_name()))?;
            }
            fs::remove_dir(&self.dir)?;
        }
        self.committed = true;
        Ok(())
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.dir);
        }
    }
}
