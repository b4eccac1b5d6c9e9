//! Staged outputs: every file is written next to its destination under a
//! temporary name and renamed only once all outputs of a command are ready.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

#[derive(Debug, Default)]
pub struct Outputs {
    staged: Vec<(PathBuf, PathBuf)>,
    stdout: Vec<u8>,
}

fn temp_name(path: &Path) -> PathBuf {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!(".{name}.partial-{}", std::process::id()))
}

impl Outputs {
    pub fn new() -> Self {
        Outputs::default()
    }

    /// Stage `bytes` for `path`, or for standard output when `path` is `None`.
    pub fn add(&mut self, path: Option<&Path>, bytes: &[u8]) -> Result<()> {
        let Some(path) = path else {
            self.stdout.extend_from_slice(bytes);
            return Ok(());
        };
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        let tmp = temp_name(path);
        fs::write(&tmp, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.staged.push((tmp, path.to_path_buf()));
        Ok(())
    }

    pub fn commit(mut self) -> Result<()> {
        for (tmp, dest) in std::mem::take(&mut self.staged) {
            fs::rename(&tmp, &dest).with_context(|| format!("writing {}", dest.display()))?;
            log::info!("wrote {}", dest.display());
        }
        let mut out = std::io::stdout().lock();
        out.write_all(&self.stdout)?;
        out.flush()?;
        Ok(())
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        for (tmp, _) in &self.staged {
            let _ = fs::remove_file(tmp);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nothing_lands_without_commit() {
        let dir = std::env::temp_dir().join(format!("procmine-out-{}", std::process::id()));
        let target = dir.join("a.txt");
        {
            let mut o = Outputs::new();
            o.add(Some(&target), b"x").unwrap();
        }
        assert!(!target.exists());
        assert_eq!(fs::read_dir(&dir).unwrap().count(), 0);
        let mut o = Outputs::new();
        o.add(Some(&target), b"x").unwrap();
        o.commit().unwrap();
        assert_eq!(fs::read(&target).unwrap(), b"x");
        fs::remove_dir_all(&dir).unwrap();
    }
}
