//! Versioned, checksummed artifact files.
//!
//! Every artifact is a single header line followed by the body:
//!
//! ```text
//! TRIAGE <kind> v<version> sha256:<hex digest of body>
//! <body bytes>
//! ```
//!
//! Readers check the kind and version before the checksum and never guess
//! at an unknown version.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::classifiers::TrainedModel;
use crate::error::{Result, TriageError};
use crate::features::Vocabulary;

pub const MAGIC: &str = "TRIAGE";
pub const MODEL_KIND: &str = "model";
pub const MODEL_VERSION: u32 = 1;

pub fn checksum(body: &[u8]) -> String {
    hex::encode(Sha256::digest(body))
}

/// Writes `body` behind a header line and returns the body checksum.
pub fn write_artifact(path: &Path, kind: &str, version: u32, body: &[u8]) -> Result<String> {
    let digest = checksum(body);
    let mut bytes = format!("{MAGIC} {kind} v{version} sha256:{digest}\n").into_bytes();
    bytes.extend_from_slice(body);
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| TriageError::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| TriageError::io(path, e))?;
    Ok(digest)
}

/// Reads an artifact written by [`write_artifact`], verifying kind, version
/// and checksum, and returns the body.
pub fn read_artifact(path: &Path, kind: &str, supported: u32) -> Result<Vec<u8>> {
    let bytes = fs::read(path).map_err(|e| TriageError::io(path, e))?;
    let corrupt = |reason: &str| TriageError::Corrupt { path: path.to_path_buf(), reason: reason.into() };

    let newline = bytes.iter().position(|&b| b == b'\n').ok_or_else(|| corrupt("missing header"))?;
    let header = std::str::from_utf8(&bytes[..newline]).map_err(|_| corrupt("header is not UTF-8"))?;
    let fields: Vec<&str> = header.split(' ').collect();
    let [magic, found_kind, version, digest] = fields[..] else {
        return Err(corrupt("malformed header"));
    };
    if magic != MAGIC {
        return Err(corrupt("bad magic"));
    }
    if found_kind != kind {
        return Err(corrupt(&format!("expected a {kind} artifact, found {found_kind:?}")));
    }
    let found: u32 = version
        .strip_prefix('v')
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| corrupt("malformed version"))?;
    if found != supported {
        return Err(TriageError::UnsupportedVersion {
            path: path.to_path_buf(),
            kind: kind.to_string(),
            found,
            supported,
        });
    }
    let expected = digest.strip_prefix("sha256:").ok_or_else(|| corrupt("malformed checksum"))?;
    let body = bytes[newline + 1..].to_vec();
    if checksum(&body) != expected {
        return Err(corrupt("checksum mismatch"));
    }
    Ok(body)
}

/// Saves a model as canonical JSON and returns its checksum.
pub fn save_model(model: &TrainedModel, path: &Path) -> Result<String> {
    write_artifact(path, MODEL_KIND, MODEL_VERSION, &model.canonical_bytes()?)
}

pub fn load_model(path: &Path) -> Result<TrainedModel> {
    let body = read_artifact(path, MODEL_KIND, MODEL_VERSION)?;
    serde_json::from_slice(&body).map_err(|e| TriageError::Corrupt {
        path: path.to_path_buf(),
        reason: format!("model body does not decode: {e}"),
    })
}

/// Directory layout for persisted artifacts:
/// `models/`, `vocabularies/`, `reports/`, `corpora/`.
#[derive(Debug, Clone)]
pub struct ArtifactStore {
    root: PathBuf,
}

impl ArtifactStore {
    pub const SUBDIRS: [&'static str; 4] = ["models", "vocabularies", "reports", "corpora"];

    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        for sub in Self::SUBDIRS {
            let dir = root.join(sub);
            fs::create_dir_all(&dir).map_err(|e| TriageError::io(&dir, e))?;
        }
        Ok(ArtifactStore { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn model_path(&self, name: &str) -> PathBuf {
        self.root.join("models").join(format!("{name}.model"))
    }

    pub fn vocabulary_path(&self, name: &str) -> PathBuf {
        self.root.join("vocabularies").join(format!("{name}.vocab"))
    }

    pub fn report_dir(&self, name: &str) -> PathBuf {
        self.root.join("reports").join(name)
    }

    pub fn corpus_dir(&self, name: &str) -> PathBuf {
        self.root.join("corpora").join(name)
    }

    pub fn save_model(&self, name: &str, model: &TrainedModel) -> Result<String> {
        save_model(model, &self.model_path(name))
    }

    pub fn load_model(&self, name: &str) -> Result<TrainedModel> {
        load_model(&self.model_path(name))
    }

    pub fn save_vocabulary(&self, name: &str, vocab: &Vocabulary) -> Result<String> {
        vocab.save(&self.vocabulary_path(name))
    }

    pub fn load_vocabulary(&self, name: &str) -> Result<Vocabulary> {
        Vocabulary::load(&self.vocabulary_path(name))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_tamper_detection() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.bin");
        let digest = write_artifact(&path, "thing", 2, b"hello body").unwrap();
        assert_eq!(digest, checksum(b"hello body"));
        assert_eq!(read_artifact(&path, "thing", 2).unwrap(), b"hello body");

        assert!(matches!(
            read_artifact(&path, "other", 2),
            Err(TriageError::Corrupt { .. })
        ));
        assert!(matches!(
            read_artifact(&path, "thing", 1),
            Err(TriageError::UnsupportedVersion { found: 2, supported: 1, .. })
        ));

        let mut bytes = fs::read(&path).unwrap();
        let last = bytes.len() - 1;
        bytes[last] ^= 0x01;
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_artifact(&path, "thing", 2), Err(TriageError::Corrupt { .. })));
    }

    #[test]
    fn garbage_headers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g");
        for content in ["", "no newline", "TRIAGE thing\nbody", "NOPE thing v1 sha256:00\n", "TRIAGE thing vX sha256:00\n"] {
            fs::write(&path, content).unwrap();
            assert!(matches!(read_artifact(&path, "thing", 1), Err(TriageError::Corrupt { .. })), "{content:?}");
        }
        assert!(matches!(
            read_artifact(&dir.path().join("missing"), "thing", 1),
            Err(TriageError::NotFound(_))
        ));
    }

    #[test]
    fn store_layout() {
        let dir = tempfile::tempdir().unwrap();
        let store = ArtifactStore::open(dir.path().join("store")).unwrap();
        for sub in ArtifactStore::SUBDIRS {
            assert!(store.root().join(sub).is_dir());
        }
        assert!(store.model_path("rf").ends_with("models/rf.model"));
    }
}
