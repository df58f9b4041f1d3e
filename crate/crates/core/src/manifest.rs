//! JSON-lines dataset manifests.

use std::collections::HashSet;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One manifest line. Years are signed: CE positive, BCE negative.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub path: PathBuf,
    pub label_year: i32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub writer: Option<String>,
    /// Id of the sample this one was augmented from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Sample {
    pub fn is_augmented(&self) -> bool {
        self.source_id.is_some()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetManifest {
    pub entries: Vec<Sample>,
}

impl DatasetManifest {
    pub fn new(entries: Vec<Sample>) -> Result<Self> {
        let m = DatasetManifest { entries };
        m.validate()?;
        Ok(m)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let mut ids = HashSet::new();
        for e in &self.entries {
            if !ids.insert(e.id.as_str()) {
                return Err(Error::Manifest(format!("duplicate id {}", e.id)));
            }
        }
        for e in &self.entries {
            if let Some(src) = &e.source_id {
                if !ids.contains(src.as_str()) {
                    return Err(Error::Manifest(format!(
                        "{} references unknown source {src}",
                        e.id
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&Sample> {
        self.entries.iter().find(|e| e.id == id)
    }

    pub fn sources(&self) -> impl Iterator<Item = &Sample> {
        self.entries.iter().filter(|e| !e.is_augmented())
    }

    /// Sorted distinct label years.
    pub fn years(&self) -> Vec<i32> {
        let mut y: Vec<i32> = self.entries.iter().map(|e| e.label_year).collect();
        y.sort_unstable();
        y.dedup();
        y
    }

    /// Reads a manifest. Relative image paths resolve against the manifest's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let mut entries = Vec::new();
        for (lineno, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut s: Sample = serde_json::from_str(&line).map_err(|e| {
                Error::Manifest(format!("{}:{}: {e}", path.display(), lineno + 1))
            })?;
            if s.path.is_relative() {
                s.path = base.join(&s.path);
            }
            entries.push(s);
        }
        DatasetManifest::new(entries)
    }

    /// Writes one JSON object per line. Paths under the manifest's directory
    /// are stored relative to it; other relative paths are made absolute so
    /// that `load` resolves them to the same files.
    pub fn save(&self, path: &Path) -> Result<()> {
        let base = path.parent().unwrap_or(Path::new(""));
        let mut out = Vec::new();
        for e in &self.entries {
            let mut e = e.clone();
            if let Ok(rel) = e.path.strip_prefix(base) {
                e.path = rel.to_path_buf();
            } else if e.path.is_relative() {
                e.path = std::path::absolute(&e.path).map_err(|err| Error::io(&e.path, err))?;
            }
            serde_json::to_writer(&mut out, &e)?;
            out.push(b'\n');
        }
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&out).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(id: &str, year: i32) -> Sample {
        Sample {
            id: id.into(),
            path: PathBuf::from(format!("{id}.png")),
            label_year: year,
            writer: None,
            source_id: None,
            seed: None,
        }
    }

    #[test]
    fn rejects_duplicates_and_dangling_sources() {
        assert!(DatasetManifest::new(vec![sample("a", 1), sample("a", 2)]).is_err());
        let mut b = sample("b", 1);
        b.source_id = Some("zz".into());
        assert!(DatasetManifest::new(vec![sample("a", 1), b]).is_err());
    }

    #[test]
    fn round_trip_with_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = sample("a", -470);
        a.path = dir.path().join("img/a.png");
        a.writer = Some("w1".into());
        let mut b = sample("b", -470);
        b.path = dir.path().join("img/a.morph0.png");
        b.source_id = Some("a".into());
        b.seed = Some(7);
        let m = DatasetManifest::new(vec![a, b]).unwrap();
        let p = dir.path().join("m.jsonl");
        m.save(&p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.lines().next().unwrap().contains("\"path\":\"img/a.png\""));
        assert!(!text.lines().next().unwrap().contains("source_id"));
        assert_eq!(DatasetManifest::load(&p).unwrap(), m);
    }

    #[test]
    fn relative_paths_outside_the_manifest_dir_survive_a_move() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = sample("a", 1);
        a.path = PathBuf::from("pages/a.png");
        let p = dir.path().join("nested/m.jsonl");
        std::fs::create_dir_all(p.parent().unwrap()).unwrap();
        DatasetManifest::new(vec![a]).unwrap().save(&p).unwrap();
        let back = DatasetManifest::load(&p).unwrap();
        assert_eq!(back.entries[0].path, std::path::absolute("pages/a.png").unwrap());
    }
}
