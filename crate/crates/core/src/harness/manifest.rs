//! CSV dataset manifests: `path,mos[,tag]` with paths relative to the file.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    /// Path as written in the manifest.
    pub name: String,
    /// Path resolved against the manifest directory.
    pub path: PathBuf,
    pub mos: Option<f64>,
    pub tag: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub name: String,
    pub entries: Vec<ManifestEntry>,
}

#[derive(Deserialize)]
struct Row {
    path: String,
    #[serde(default)]
    mos: Option<f64>,
    #[serde(default)]
    tag: Option<String>,
}

impl DatasetManifest {
    /// Reads a manifest; MOS values are optional here, see [`Self::require_mos`].
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| csv_error(path, e))?;
        let mut entries = Vec::new();
        let mut seen = HashSet::new();
        for (line, row) in reader.deserialize::<Row>().enumerate() {
            let row = row.map_err(|e| csv_error(path, e))?;
            if row.path.is_empty() {
                return Err(Error::Data(format!("{}: empty path on row {}", path.display(), line + 1)));
            }
            if let Some(m) = row.mos {
                if !m.is_finite() {
                    return Err(Error::Data(format!("{}: non-finite MOS for {}", path.display(), row.path)));
                }
            }
            if !seen.insert(row.path.clone()) {
                return Err(Error::Data(format!("{}: duplicate path {}", path.display(), row.path)));
            }
            entries.push(ManifestEntry {
                path: base.join(&row.path),
                name: row.path,
                mos: row.mos,
                tag: row.tag.filter(|t| !t.is_empty()),
            });
        }
        if entries.is_empty() {
            return Err(Error::Data(format!("{}: manifest has no entries", path.display())));
        }
        Ok(Self {
            name: path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
            entries,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn paths(&self) -> Vec<PathBuf> {
        self.entries.iter().map(|e| e.path.clone()).collect()
    }

    /// All MOS values; an error if any entry lacks one.
    pub fn require_mos(&self) -> Result<Vec<f64>> {
        self.entries
            .iter()
            .map(|e| {
                e.mos
                    .ok_or_else(|| Error::Data(format!("manifest {}: no MOS for {}", self.name, e.name)))
            })
            .collect()
    }

    /// `(min, max)` of the MOS values present.
    pub fn mos_bounds(&self) -> Option<(f64, f64)> {
        let mut it = self.entries.iter().filter_map(|e| e.mos);
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v))))
    }

    /// Writes the manifest back with the original relative paths.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let has_tag = self.entries.iter().any(|e| e.tag.is_some());
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        let mut header = vec!["path", "mos"];
        if has_tag {
            header.push("tag");
        }
        w.write_record(&header).map_err(|e| csv_error(path, e))?;
        for e in &self.entries {
            let mut rec = vec![e.name.clone(), e.mos.map(|m| m.to_string()).unwrap_or_default()];
            if has_tag {
                rec.push(e.tag.clone().unwrap_or_default());
            }
            w.write_record(&rec).map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!("checked io error"),
        }
    } else {
        Error::Data(format!("{}: {e}", path.display()))
    }
}
