//! A run directory of inputs, prompts, answers, rule lists, reports and
//! emitted code, with a SHA-256 manifest over every file.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub run_id: String,
    pub iterations: usize,
    pub files: Vec<ManifestEntry>,
}

#[derive(Debug, thiserror::Error)]
pub enum LedgerError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: invalid manifest: {message}")]
    Manifest { path: PathBuf, message: String },
    #[error("{0} is changed or missing since the manifest was written")]
    Tampered(String),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> LedgerError + '_ {
    move |source| LedgerError::Io { path: path.to_path_buf(), source }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// A ledger being written. Paths are relative to the run directory and use
/// `/` separators.
pub struct RunLedger {
    run_id: String,
    dir: PathBuf,
    files: BTreeMap<String, (String, u64)>,
    iterations: usize,
}

/// `YYYYmmddTHHMMSSZ-xxxxxx`.
pub fn new_run_id() -> String {
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%SZ");
    let suffix: u32 = rand::rng().random_range(0..0x100_0000);
    format!("{stamp}-{suffix:06x}")
}

pub fn iteration_dir(n: usize) -> String {
    format!("iterations/{n}")
}

impl RunLedger {
    /// Creates `<parent>/<run id>/`.
    pub fn create(parent: &Path) -> Result<RunLedger, LedgerError> {
        let run_id = new_run_id();
        let dir = parent.join(&run_id);
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        Ok(RunLedger { run_id, dir, files: BTreeMap::new(), iterations: 0 })
    }

    pub fn run_id(&self) -> &str {
        &self.run_id
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, rel: &str, bytes: impl AsRef<[u8]>) -> Result<(), LedgerError> {
        let bytes = bytes.as_ref();
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
        fs::write(&path, bytes).map_err(io_err(&path))?;
        self.files.insert(rel.to_string(), (sha256_hex(bytes), bytes.len() as u64));
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<(), LedgerError> {
        let mut text = serde_json::to_string_pretty(value).expect("ledger values serialize");
        text.push('\n');
        self.write(rel, text)
    }

    /// Starts iteration `n`, which must follow the previous one.
    pub fn begin_iteration(&mut self) -> usize {
        self.iterations += 1;
        self.iterations
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Writes the manifest and returns the run directory.
    pub fn finish(self) -> Result<PathBuf, LedgerError> {
        let manifest = Manifest {
            run_id: self.run_id.clone(),
            iterations: self.iterations,
            files: self
                .files
                .iter()
                .map(|(p, (h, b))| ManifestEntry { path: p.clone(), sha256: h.clone(), bytes: *b })
                .collect(),
        };
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        let path = self.dir.join(MANIFEST);
        fs::write(&path, text).map_err(io_err(&path))?;
        Ok(self.dir)
    }
}

/// A finished ledger opened for reading.
pub struct LedgerReader {
    pub dir: PathBuf,
    pub manifest: Manifest,
}

impl LedgerReader {
    pub fn open(dir: &Path) -> Result<LedgerReader, LedgerError> {
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let manifest: Manifest = serde_json::from_str(&text)
            .map_err(|e| LedgerError::Manifest { path: path.clone(), message: e.to_string() })?;
        Ok(LedgerReader { dir: dir.to_path_buf(), manifest })
    }

    pub fn contains(&self, rel: &str) -> bool {
        self.manifest.files.iter().any(|f| f.path == rel)
    }

    /// The bytes of `rel`, checked against the manifest hash.
    pub fn read(&self, rel: &str) -> Result<Vec<u8>, LedgerError> {
        let entry = self.manifest.files.iter().find(|f| f.path == rel).ok_or_else(|| LedgerError::Tampered(rel.into()))?;
        let path = self.dir.join(rel);
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        if sha256_hex(&bytes) != entry.sha256 {
            return Err(LedgerError::Tampered(rel.into()));
        }
        Ok(bytes)
    }

    pub fn read_string(&self, rel: &str) -> Result<String, LedgerError> {
        let bytes = self.read(rel)?;
        String::from_utf8(bytes).map_err(|_| LedgerError::Tampered(rel.into()))
    }

    /// Every manifest entry whose file no longer matches.
    pub fn verify(&self) -> Vec<String> {
        self.manifest.files.iter().filter(|f| self.read(&f.path).is_err()).map(|f| f.path.clone()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_covers_every_file() {
        let tmp = tempfile::tempdir().unwrap();
        let mut l = RunLedger::create(tmp.path()).unwrap();
        l.write("inputs/a.txt", "alpha").unwrap();
        assert_eq!(l.begin_iteration(), 1);
        l.write_json("iterations/1/x.json", &vec![1, 2]).unwrap();
        let dir = l.finish().unwrap();
        let r = LedgerReader::open(&dir).unwrap();
        assert_eq!(r.manifest.files.len(), 2);
        assert_eq!(r.manifest.iterations, 1);
        assert_eq!(r.read_string("inputs/a.txt").unwrap(), "alpha");
        assert!(r.verify().is_empty());
        assert_eq!(r.manifest.files[0].sha256, sha256_hex(b"alpha"));
    }

    #[test]
    fn edits_are_detected() {
        let tmp = tempfile::tempdir().unwrap();
        let mut l = RunLedger::create(tmp.path()).unwrap();
        l.write("a.txt", "alpha").unwrap();
        let dir = l.finish().unwrap();
        fs::write(dir.join("a.txt"), "beta").unwrap();
        let r = LedgerReader::open(&dir).unwrap();
        assert_eq!(r.verify(), vec!["a.txt".to_string()]);
    }

    #[test]
    fn run_ids_have_a_stamp_and_suffix() {
        let id = new_run_id();
        let (stamp, suffix) = id.split_once('-').unwrap();
        assert_eq!(stamp.len(), 16);
        assert_eq!(suffix.len(), 6);
    }
}
