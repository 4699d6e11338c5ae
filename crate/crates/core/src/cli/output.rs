//! In-memory artifacts and their atomic emission.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::CliError;

/// Shortest round-trip representation; `None` becomes an empty cell.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn fmt_cell(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// CSV body with a mandatory header and `\n` line endings.
pub struct Csv {
    body: String,
    columns: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut body = header.join(",");
        body.push('\n');
        Csv {
            body,
            columns: header.len(),
        }
    }

    pub fn row(&mut self, cells: &[Option<f64>]) {
        assert_eq!(cells.len(), self.columns, "row width");
        for (i, c) in cells.iter().enumerate() {
            if i > 0 {
                self.body.push(',');
            }
            let _ = write!(self.body, "{}", fmt_cell(*c));
        }
        self.body.push('\n');
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.body.into_bytes()
    }
}

/// A file to be written, relative to the run directory.
#[derive(Clone, Debug, PartialEq)]
pub struct Artifact {
    pub path: PathBuf,
    pub bytes: Vec<u8>,
}

impl Artifact {
    pub fn new(path: impl Into<PathBuf>, bytes: Vec<u8>) -> Self {
        Artifact {
            path: path.into(),
            bytes,
        }
    }

    pub fn json<T: Serialize>(path: impl Into<PathBuf>, value: &T) -> Self {
        let mut bytes = serde_json::to_vec_pretty(value).expect("serializable");
        bytes.push(b'\n');
        Artifact::new(path, bytes)
    }

    pub fn nested(mut self, dir: &Path) -> Self {
        self.path = dir.join(&self.path);
        self
    }

    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(&self.bytes))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FileRecord {
    pub path: String,
    pub bytes: usize,
    pub sha256: String,
}

impl FileRecord {
    pub fn of(a: &Artifact) -> Self {
        FileRecord {
            path: portable(&a.path),
            bytes: a.bytes.len(),
            sha256: a.digest(),
        }
    }
}

fn portable(p: &Path) -> String {
    p.components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

/// Writes `bytes` to `dest` through a sibling temporary file and a rename.
pub fn write_atomic(dest: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io = |source| CliError::Io {
        path: dest.to_path_buf(),
        source,
    };
    if let Some(dir) = dest.parent() {
        fs::create_dir_all(dir).map_err(io)?;
    }
    let name = dest
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = dest.with_file_name(format!(".{name}.tmp"));
    fs::write(&tmp, bytes).map_err(io)?;
    fs::rename(&tmp, dest).map_err(io)
}

pub fn write_all(root: &Path, artifacts: &[Artifact]) -> Result<Vec<FileRecord>, CliError> {
    let mut records = Vec::with_capacity(artifacts.len());
    for a in artifacts {
        write_atomic(&root.join(&a.path), &a.bytes)?;
        records.push(FileRecord::of(a));
    }
    Ok(records)
}
