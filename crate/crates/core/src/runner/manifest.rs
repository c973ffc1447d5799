use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::RunError;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Path relative to the output directory, `/`-separated.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub status: String,
    pub exit_code: i32,
    /// Seconds since the Unix epoch.
    pub finished_unix: u64,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
}

/// Provenance of an output directory: the config of the last command, the
/// outcome of every stage run so far and a checksum for every artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config: serde_json::Value,
    pub stages: BTreeMap<String, StageRecord>,
    pub files: Vec<FileEntry>,
}

pub fn sha256_file(path: &Path) -> Result<String, RunError> {
    let bytes = fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn collect(dir: &Path, root: &Path, out: &mut Vec<PathBuf>) -> Result<(), RunError> {
    for entry in fs::read_dir(dir)? {
        let p = entry?.path();
        if p.is_dir() {
            collect(&p, root, out)?;
        } else if p.strip_prefix(root).map(|r| r != Path::new(MANIFEST)).unwrap_or(false) {
            out.push(p);
        }
    }
    Ok(())
}

fn relative(p: &Path, root: &Path) -> String {
    p.strip_prefix(root)
        .unwrap_or(p)
        .components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

impl Manifest {
    pub fn new(config: serde_json::Value) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config,
            stages: BTreeMap::new(),
            files: Vec::new(),
        }
    }

    pub fn load(out: &Path) -> Result<Option<Self>, RunError> {
        let path = out.join(MANIFEST);
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path)?;
        serde_json::from_str(&text)
            .map(Some)
            .map_err(|e| RunError::Integrity(format!("{}: {e}", path.display())))
    }

    /// Existing manifest with the config replaced, or a fresh one.
    pub fn open(out: &Path, config: serde_json::Value) -> Result<Self, RunError> {
        Ok(match Self::load(out)? {
            Some(mut m) => {
                m.config = config;
                m
            }
            None => Self::new(config),
        })
    }

    pub fn record(&mut self, stage: &str, status: &str, exit_code: i32, note: impl Into<String>) {
        self.stages.insert(
            stage.into(),
            StageRecord {
                status: status.into(),
                exit_code,
                finished_unix: std::time::SystemTime::now()
                    .duration_since(std::time::UNIX_EPOCH)
                    .map_or(0, |d| d.as_secs()),
                note: note.into(),
            },
        );
    }

    /// Rehashes every file under `out` and writes the manifest.
    pub fn save(&mut self, out: &Path) -> Result<(), RunError> {
        let mut paths = Vec::new();
        collect(out, out, &mut paths)?;
        let mut files = paths
            .iter()
            .map(|p| {
                Ok(FileEntry {
                    path: relative(p, out),
                    bytes: fs::metadata(p)?.len(),
                    sha256: sha256_file(p)?,
                })
            })
            .collect::<Result<Vec<_>, RunError>>()?;
        files.sort_by(|a, b| a.path.cmp(&b.path));
        self.files = files;
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(out.join(MANIFEST), text + "\n")?;
        Ok(())
    }

    /// Every listed file exists with its recorded checksum, and every name in `required` is listed.
    pub fn verify(&self, out: &Path, required: &[&str]) -> Result<(), RunError> {
        let mut problems = Vec::new();
        for name in required {
            if !self.files.iter().any(|f| f.path == *name) {
                problems.push(format!("{name}: not in manifest"));
            }
        }
        for f in &self.files {
            let p = out.join(&f.path);
            if !p.exists() {
                problems.push(format!("{}: missing", f.path));
                continue;
            }
            let sum = sha256_file(&p)?;
            if sum != f.sha256 {
                problems.push(format!("{}: checksum {} != recorded {}", f.path, &sum[..12], &f.sha256[..12.min(f.sha256.len())]));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(RunError::Integrity(problems.join("; ")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detects_tampering() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("a.txt"), "one").unwrap();
        fs::create_dir(dir.path().join("sub")).unwrap();
        fs::write(dir.path().join("sub/b.txt"), "two").unwrap();
        let mut m = Manifest::new(serde_json::json!({}));
        m.save(dir.path()).unwrap();
        assert_eq!(m.files.len(), 2);
        assert_eq!(m.files[1].path, "sub/b.txt");
        m.verify(dir.path(), &["a.txt"]).unwrap();
        fs::write(dir.path().join("sub/b.txt"), "tampered").unwrap();
        let err = m.verify(dir.path(), &[]).unwrap_err();
        assert!(matches!(err, RunError::Integrity(ref s) if s.contains("sub/b.txt")));
        assert!(m.verify(dir.path(), &["c.txt"]).is_err());
    }
}
