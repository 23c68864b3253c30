//! Dataset container and the storage directory.
//!
//! A dataset is a JSON file `{"meta": {...}, "columns": {...}}` with scalar
//! metadata and equal-length columns of finite numbers. Complex traces are
//! stored as `<name>_re` / `<name>_im` column pairs. Datasets live at
//! `<root>/<session>/<label>.ds.json` and are written via temp-file + rename.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StorageError {
    #[error("dataset not found: {0}")]
    Missing(PathBuf),
    #[error("malformed dataset {path}: {reason}")]
    Malformed { path: PathBuf, reason: String },
    #[error("ragged columns: {0}")]
    Ragged(String),
    #[error("column {0} contains a non-finite value")]
    NonFinite(String),
    #[error("invalid name {0:?}: use letters, digits, '-', '_' or '.'")]
    InvalidName(String),
    #[error("path {0} is outside the storage root")]
    OutsideRoot(PathBuf),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Bool(bool),
    Number(f64),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Dataset {
    #[serde(default)]
    pub meta: BTreeMap<String, Scalar>,
    pub columns: BTreeMap<String, Vec<f64>>,
}

impl Dataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_column(mut self, name: impl Into<String>, values: Vec<f64>) -> Self {
        self.columns.insert(name.into(), values);
        self
    }

    pub fn with_meta(mut self, key: impl Into<String>, value: Scalar) -> Self {
        self.meta.insert(key.into(), value);
        self
    }

    pub fn rows(&self) -> usize {
        self.columns.values().next().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<(), StorageError> {
        let rows = self.rows();
        for (name, col) in &self.columns {
            if col.len() != rows {
                return Err(StorageError::Ragged(format!(
                    "column {name} has {} rows, expected {rows}",
                    col.len()
                )));
            }
            if col.iter().any(|v| !v.is_finite()) {
                return Err(StorageError::NonFinite(name.clone()));
            }
        }
        if let Some((k, _)) = self
            .meta
            .iter()
            .find(|(_, v)| matches!(v, Scalar::Number(x) if !x.is_finite()))
        {
            return Err(StorageError::NonFinite(format!("meta.{k}")));
        }
        Ok(())
    }
}

fn check_name(name: &str) -> Result<(), StorageError> {
    let ok = !name.is_empty()
        && name != "."
        && name != ".."
        && name.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(StorageError::InvalidName(name.to_string()))
    }
}

/// Write `dataset` to `path` atomically after validation.
pub fn save_dataset(path: &Path, dataset: &Dataset) -> Result<PathBuf, StorageError> {
    dataset.validate()?;
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    serde_json::to_writer(&mut tmp, dataset).map_err(io::Error::other)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(path.to_path_buf())
}

pub fn load_dataset(path: &Path) -> Result<Dataset, StorageError> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(StorageError::Missing(path.to_path_buf())),
        Err(e) => return Err(e.into()),
    };
    let ds: Dataset = serde_json::from_slice(&bytes).map_err(|e| StorageError::Malformed {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    ds.validate()?;
    Ok(ds)
}

/// A storage root shared by every session.
#[derive(Debug, Clone)]
pub struct Storage {
    root: PathBuf,
}

impl Storage {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn canonical_path(&self, session: &str, label: &str) -> Result<PathBuf, StorageError> {
        check_name(session)?;
        check_name(label)?;
        Ok(self.root.join(session).join(format!("{label}.ds.json")))
    }

    pub fn save(&self, session: &str, label: &str, dataset: &Dataset) -> Result<PathBuf, StorageError> {
        let path = self.canonical_path(session, label)?;
        save_dataset(&path, dataset)
    }

    /// Load a dataset by path. Relative paths resolve against the root;
    /// absolute paths must lie inside it.
    pub fn load(&self, path: impl AsRef<Path>) -> Result<Dataset, StorageError> {
        let resolved = self.resolve(path.as_ref())?;
        load_dataset(&resolved)
    }

    pub fn resolve(&self, path: &Path) -> Result<PathBuf, StorageError> {
        if path.components().any(|c| matches!(c, std::path::Component::ParentDir)) {
            return Err(StorageError::OutsideRoot(path.to_path_buf()));
        }
        let full = if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.root.join(path)
        };
        if !full.starts_with(&self.root) {
            return Err(StorageError::OutsideRoot(path.to_path_buf()));
        }
        Ok(full)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sweep() -> Dataset {
        Dataset::new()
            .with_column("freq", vec![4e9, 4.5e9, 5e9])
            .with_column("s21_re", vec![1.0, 0.1 + 0.2, -0.3])
            .with_column("s21_im", vec![0.0, 1e-17, std::f64::consts::PI])
            .with_meta("power_dbm", Scalar::Number(-20.0))
            .with_meta("instrument", Scalar::Text("vna".into()))
    }

    #[test]
    fn save_then_load_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let store = Storage::new(dir.path());
        let ds = sweep();
        let path = store.save("sess-1", "wide_scan", &ds).unwrap();
        assert_eq!(path, dir.path().join("sess-1").join("wide_scan.ds.json"));
        let back = store.load(&path).unwrap();
        assert_eq!(back, ds);
        for (a, b) in ds.columns["s21_re"].iter().zip(&back.columns["s21_re"]) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn missing_file() {
        let dir = tempfile::tempdir().unwrap();
        let store = Storage::new(dir.path());
        assert!(matches!(store.load("nope/none.ds.json"), Err(StorageError::Missing(_))));
    }

    #[test]
    fn nan_is_rejected_at_save() {
        let dir = tempfile::tempdir().unwrap();
        let store = Storage::new(dir.path());
        let ds = Dataset::new().with_column("x", vec![1.0, f64::NAN]);
        assert!(matches!(store.save("s", "bad", &ds), Err(StorageError::NonFinite(_))));
        assert!(!dir.path().join("s").join("bad.ds.json").exists());
    }

    #[test]
    fn ragged_columns_are_rejected() {
        let ds = Dataset::new().with_column("a", vec![1.0]).with_column("b", vec![1.0, 2.0]);
        assert!(matches!(ds.validate(), Err(StorageError::Ragged(_))));
    }

    #[test]
    fn malformed_container() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.ds.json");
        fs::write(&p, b"{\"columns\": 3}").unwrap();
        assert!(matches!(load_dataset(&p), Err(StorageError::Malformed { .. })));
    }

    #[test]
    fn traversal_is_refused() {
        let store = Storage::new("/tmp/store");
        assert!(store.canonical_path("..", "x").is_err());
        assert!(store.canonical_path("s", "a/b").is_err());
        assert!(matches!(store.resolve(Path::new("../etc/passwd")), Err(StorageError::OutsideRoot(_))));
        assert!(matches!(store.resolve(Path::new("/etc/passwd")), Err(StorageError::OutsideRoot(_))));
    }
}
