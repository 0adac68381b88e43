//! JSON-lines dataset manifest: one record per image file.

use std::collections::HashSet;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::Spectrum;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Resolution {
    #[serde(rename = "64x512")]
    Hr,
    #[serde(rename = "32x256")]
    Lr,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestRecord {
    pub path: String,
    pub class_id: u32,
    pub spectrum: Spectrum,
    pub instance: u32,
    pub resolution: Resolution,
    pub split: Split,
}

#[derive(Clone, Debug, Default)]
pub struct DatasetManifest {
    pub records: Vec<ManifestRecord>,
    /// Directory that record paths are relative to.
    pub root: PathBuf,
}

impl DatasetManifest {
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for r in &self.records {
            if !seen.insert(r.path.as_str()) {
                return Err(Error::InvalidManifest(format!("duplicate path {}", r.path)));
            }
        }
        // A class-instance pair must sit entirely in one split.
        let mut split_of = std::collections::HashMap::new();
        for r in &self.records {
            let key = (r.class_id, r.instance);
            if *split_of.entry(key).or_insert(r.split) != r.split {
                return Err(Error::InvalidManifest(format!(
                    "class {} instance {} appears in both splits",
                    r.class_id, r.instance
                )));
            }
        }
        Ok(())
    }

    pub fn resolve(&self, record: &ManifestRecord) -> PathBuf {
        self.root.join(&record.path)
    }

    pub fn select(
        &self,
        split: Split,
        spectrum: Spectrum,
        resolution: Resolution,
    ) -> Vec<&ManifestRecord> {
        self.records
            .iter()
            .filter(|r| r.split == split && r.spectrum == spectrum && r.resolution == resolution)
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        for r in &self.records {
            serde_json::to_writer(&mut f, r)?;
            f.write_all(b"\n")?;
        }
        Ok(())
    }
}

pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let f = std::fs::File::open(path)?;
    let mut records = Vec::new();
    for line in std::io::BufReader::new(f).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str::<ManifestRecord>(&line)?);
    }
    let manifest = DatasetManifest {
        records,
        root: path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf(),
    };
    manifest.validate()?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(path: &str) -> ManifestRecord {
        ManifestRecord {
            path: path.into(),
            class_id: 0,
            spectrum: Spectrum::Vis,
            instance: 0,
            resolution: Resolution::Hr,
            split: Split::Train,
        }
    }

    #[test]
    fn duplicate_path_rejected() {
        let m = DatasetManifest {
            records: vec![record("a.pgm"), record("a.pgm")],
            root: PathBuf::new(),
        };
        assert!(m.validate().is_err());
    }

    #[test]
    fn jsonl_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("manifest.jsonl");
        let m = DatasetManifest { records: vec![record("a.pgm")], root: PathBuf::new() };
        m.save(&p).unwrap();
        let loaded = load_manifest(&p).unwrap();
        assert_eq!(loaded.records.len(), 1);
        assert_eq!(loaded.records[0].path, "a.pgm");
    }
}
