//! All-or-nothing output: artifacts are written into a hidden staging
//! directory next to the destination and moved into place only once every
//! file has been produced.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use tempfile::TempDir;

use crate::error::{CliError, CliResult};

pub struct Staging {
    dest: PathBuf,
    tmp: TempDir,
    files: Vec<PathBuf>,
}

impl Staging {
    pub fn new(dest: &Path) -> CliResult<Self> {
        let parent = match dest.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        fs::create_dir_all(&parent).map_err(|e| CliError::output(&parent, e))?;
        let tmp = tempfile::Builder::new()
            .prefix(".backdrop-staging-")
            .tempdir_in(&parent)
            .map_err(|e| CliError::output(dest, e))?;
        Ok(Self {
            dest: dest.to_path_buf(),
            tmp,
            files: Vec::new(),
        })
    }

    /// Staged location for `rel`; parent directories are created.
    pub fn path(&mut self, rel: impl AsRef<Path>) -> CliResult<PathBuf> {
        let rel = rel.as_ref().to_path_buf();
        let p = self.tmp.path().join(&rel);
        if let Some(dir) = p.parent() {
            fs::create_dir_all(dir).map_err(|e| CliError::output(dir, e))?;
        }
        self.files.push(rel);
        Ok(p)
    }

    pub fn write_json(&mut self, rel: impl AsRef<Path>, value: &impl Serialize) -> CliResult<()> {
        let p = self.path(rel)?;
        write_json(&p, value)
    }

    /// Moves every staged file under the destination directory.
    pub fn commit(self) -> CliResult<()> {
        fs::create_dir_all(&self.dest).map_err(|e| CliError::output(&self.dest, e))?;
        for rel in &self.files {
            let target = self.dest.join(rel);
            if let Some(dir) = target.parent() {
                fs::create_dir_all(dir).map_err(|e| CliError::output(dir, e))?;
            }
            fs::rename(self.tmp.path().join(rel), &target).map_err(|e| CliError::output(&target, e))?;
        }
        Ok(())
    }
}

pub fn json_bytes(value: &impl Serialize) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("reports serialize");
    bytes.push(b'\n');
    bytes
}

pub fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    fs::write(path, json_bytes(value)).map_err(|e| CliError::output(path, e))
}

/// Writes a standalone report file atomically.
pub fn write_json_atomic(path: &Path, value: &impl Serialize) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::output(dir, e))?;
    }
    backdrop::io::write_atomic(path, &json_bytes(value)).map_err(|e| CliError::output(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nothing_appears_until_commit() {
        let root = tempfile::tempdir().unwrap();
        let dest = root.path().join("out");
        let mut s = Staging::new(&dest).unwrap();
        s.write_json("a/report.json", &serde_json::json!({"k": 1})).unwrap();
        assert!(!dest.exists());
        s.commit().unwrap();
        assert!(dest.join("a/report.json").is_file());
        let names: Vec<_> = fs::read_dir(root.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names, vec![std::ffi::OsString::from("out")]);
    }

    #[test]
    fn dropped_staging_leaves_no_trace() {
        let root = tempfile::tempdir().unwrap();
        let dest = root.path().join("out");
        {
            let mut s = Staging::new(&dest).unwrap();
            s.write_json("r.json", &1).unwrap();
        }
        assert_eq!(fs::read_dir(root.path()).unwrap().count(), 0);
    }
}
