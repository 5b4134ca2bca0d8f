use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use udf_core::Tolerances;

use crate::args::Command;
use crate::Failure;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Everything needed to reproduce a run, plus digests of what it wrote.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    /// Fully resolved invocation, with defaults filled in and the norm canonicalized.
    pub invocation: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<Vec<u64>>,
    pub seed: u64,
    pub tolerances: Tolerances,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub certified: bool,
    /// File name to lowercase hex SHA-256.
    pub outputs: BTreeMap<String, String>,
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Output directory that records a digest for every file written through it.
pub struct Outputs {
    dir: PathBuf,
    digests: BTreeMap<String, String>,
}

impl Outputs {
    /// The directory itself is created on the first write.
    pub fn new(dir: &Path) -> Self {
        Outputs {
            dir: dir.to_path_buf(),
            digests: BTreeMap::new(),
        }
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), Failure> {
        fs::create_dir_all(&self.dir)
            .map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", self.dir.display())))?;
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display())))?;
        self.digests.insert(name.to_string(), sha256_hex(contents.as_bytes()));
        Ok(())
    }

    pub fn document<T: Serialize>(&mut self, name: &str, kind: &str, body: &T) -> Result<(), Failure> {
        let text = udf_core::io::to_document(kind, body).map_err(|e| Failure::Runtime(e.to_string()))?;
        self.write(name, &text)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn into_digests(self) -> BTreeMap<String, String> {
        self.digests
    }
}

/// Names whose digests differ, or that appear on only one side.
pub fn digest_mismatches(expected: &BTreeMap<String, String>, actual: &BTreeMap<String, String>) -> Vec<String> {
    let mut names: Vec<&String> = expected.keys().chain(actual.keys()).collect();
    names.sort();
    names.dedup();
    names
        .into_iter()
        .filter(|k| expected.get(*k) != actual.get(*k))
        .cloned()
        .collect()
}
