//! Image reads routed through one place so an experiment can prove which
//! samples it looked at, and when.

use std::sync::Mutex;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use scriptdate::imgcore::{self, GrayImage};
use scriptdate::manifest::Sample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    /// Augmentation, feature extraction, codebook learning, CV and final fit.
    Training,
    /// Held-out evaluation, entered once every model is fitted.
    Testing,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Access {
    pub phase: Phase,
    pub id: String,
}

/// Reads sample images and records `(phase, id)` for each read, in call order.
#[derive(Debug)]
pub struct ImageStore {
    phase: Mutex<Phase>,
    log: Mutex<Vec<Access>>,
}

impl Default for ImageStore {
    fn default() -> Self {
        ImageStore {
            phase: Mutex::new(Phase::Training),
            log: Mutex::new(Vec::new()),
        }
    }
}

impl ImageStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn phase(&self) -> Phase {
        *self.phase.lock().expect("phase lock")
    }

    pub fn enter(&self, phase: Phase) {
        *self.phase.lock().expect("phase lock") = phase;
    }

    pub fn load_gray(&self, sample: &Sample) -> Result<GrayImage> {
        let phase = self.phase();
        self.log.lock().expect("log lock").push(Access {
            phase,
            id: sample.id.clone(),
        });
        imgcore::load_gray(&sample.path).with_context(|| format!("sample {}", sample.id))
    }

    pub fn log(&self) -> Vec<Access> {
        self.log.lock().expect("log lock").clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    #[test]
    fn records_phase_and_failure() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.png");
        GrayImage::filled(3, 2, 9).save_png(&path).unwrap();
        let s = Sample {
            id: "a".into(),
            path,
            label_year: 1,
            writer: None,
            source_id: None,
            seed: None,
        };
        let missing = Sample {
            id: "gone".into(),
            path: PathBuf::from("/nonexistent/x.png"),
            ..s.clone()
        };
        let store = ImageStore::new();
        store.load_gray(&s).unwrap();
        store.enter(Phase::Testing);
        let err = store.load_gray(&missing).unwrap_err();
        assert!(format!("{err:#}").contains("gone"));
        assert_eq!(
            store.log(),
            vec![
                Access { phase: Phase::Training, id: "a".into() },
                Access { phase: Phase::Testing, id: "gone".into() },
            ]
        );
    }
}
