//! Experiment configuration: one TOML document, with command-line overrides.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use scriptdate::augment::{MorphParams, MorphStage};
use scriptdate::codebook::{SomParams, SIZE_CANDIDATES};
use scriptdate::features::{FeatureKind, HingeConfig};
use scriptdate::imgcore::Polarity;
use scriptdate::learn::{CvConfig, DcdOptions, Condition, DEFAULT_SEEDS, GRID_EXPONENTS};

use crate::synth::SyntheticSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Base seed for the holdout split; `--seed` also propagates it to the
    /// augmentation, codebook and synthetic-corpus seeds.
    pub seed: u64,
    pub features: Vec<FeatureKind>,
    pub conditions: Vec<Condition>,
    pub polarity: Polarity,
    pub corpus: CorpusConfig,
    pub split: SplitConfig,
    pub morph: MorphParams,
    pub morph_stage: MorphStage,
    pub hinge: HingeConfig,
    pub codebook: CodebookConfig,
    pub cv: CvSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    /// Existing JSON-lines manifest; when absent the synthetic corpus is generated.
    pub manifest: Option<PathBuf>,
    pub synth: SyntheticSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    /// Share of each class held out for testing.
    pub test_fraction: f64,
    /// Explicit held-out ids; overrides `test_fraction`.
    pub test_ids: Option<Vec<String>>,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            test_fraction: 0.1,
            test_ids: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CodebookConfig {
    /// Sub-codebook sizes swept by cross-validation.
    pub sizes: Vec<usize>,
    pub som: SomParams,
    /// Descriptors per key year used to train a sub-codebook (seeded sample); 0 keeps all.
    pub max_patterns_per_year: usize,
}

impl Default for CodebookConfig {
    fn default() -> Self {
        CodebookConfig {
            sizes: SIZE_CANDIDATES.to_vec(),
            som: SomParams::default(),
            max_patterns_per_year: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvSettings {
    pub k: usize,
    pub seeds: Vec<u64>,
    /// Cost grid `2^n` for `n` in `min_exponent..=max_exponent`.
    pub min_exponent: i32,
    pub max_exponent: i32,
    pub dcd: DcdOptions,
}

impl Default for CvSettings {
    fn default() -> Self {
        CvSettings {
            k: 5,
            seeds: DEFAULT_SEEDS.to_vec(),
            min_exponent: *GRID_EXPONENTS.start(),
            max_exponent: *GRID_EXPONENTS.end(),
            dcd: DcdOptions::default(),
        }
    }
}

impl CvSettings {
    pub fn grid(&self) -> Vec<f64> {
        (self.min_exponent..=self.max_exponent).map(|n| 2f64.powi(n)).collect()
    }

    pub fn cv_config(&self, use_augmented: bool) -> CvConfig {
        CvConfig {
            k: self.k,
            seeds: self.seeds.clone(),
            grid: self.grid(),
            use_augmented,
            dcd: self.dcd,
        }
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            features: FeatureKind::ALL.to_vec(),
            conditions: Condition::BOTH.to_vec(),
            polarity: Polarity::InkDarker,
            corpus: CorpusConfig::default(),
            split: SplitConfig::default(),
            morph: MorphParams::default(),
            morph_stage: MorphStage::default(),
            hinge: HingeConfig::default(),
            codebook: CodebookConfig::default(),
            cv: CvSettings::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: ExperimentConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        // a relative corpus manifest is relative to the config file
        if let (Some(m), Some(dir)) = (&cfg.corpus.manifest, path.parent()) {
            if m.is_relative() {
                cfg.corpus.manifest = Some(dir.join(m));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// `--seed` override: one seed for every stochastic stage except the CV seeds.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.morph.seed = seed;
        self.codebook.som.seed = seed;
        self.corpus.synth.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.features.is_empty() {
            bail!("no feature kinds configured");
        }
        if let Some(k) = self.features.iter().find(|k| **k == FeatureKind::JuncletsRaw) {
            bail!("{k} is an intermediate, not a classifiable feature");
        }
        if self.conditions.is_empty() {
            bail!("no conditions configured");
        }
        if self.codebook.sizes.is_empty() || self.codebook.sizes.contains(&0) {
            bail!("codebook size candidates must be nonempty and positive");
        }
        if self.cv.k < 2 {
            bail!("k must be >= 2, got {}", self.cv.k);
        }
        if self.cv.seeds.is_empty() {
            bail!("no cross-validation seeds");
        }
        if self.cv.min_exponent > self.cv.max_exponent {
            bail!("empty cost grid {}..={}", self.cv.min_exponent, self.cv.max_exponent);
        }
        let f = self.split.test_fraction;
        if self.split.test_ids.is_none() && !(f > 0.0 && f < 1.0) {
            bail!("test_fraction must lie in (0, 1), got {f}");
        }
        self.morph.validate()?;
        self.codebook.som.validate()?;
        self.hinge.validate()?;
        if self.corpus.manifest.is_none() {
            self.corpus.synth.validate()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_protocol() {
        let c = ExperimentConfig::default();
        assert_eq!(c.cv.grid().len(), 18);
        assert_eq!(c.codebook.sizes, vec![25, 100, 225, 400, 625, 900]);
        assert_eq!(c.features.len(), 6);
        assert_eq!(c.split.test_fraction, 0.1);
        c.validate().unwrap();
    }

    #[test]
    fn toml_round_trip_and_partial_files() {
        let c = ExperimentConfig::default().with_seed(9);
        let back: ExperimentConfig = toml::from_str(&c.to_toml().unwrap()).unwrap();
        assert_eq!(back, c);
        let partial: ExperimentConfig = toml::from_str(
            "features = [\"Hinge\", \"TCC\"]\n[cv]\nk = 4\n[codebook]\nsizes = [25]\n",
        )
        .unwrap();
        assert_eq!(partial.features, vec![FeatureKind::Hinge, FeatureKind::Tcc]);
        assert_eq!(partial.cv.k, 4);
        assert_eq!(partial.cv.seeds, DEFAULT_SEEDS.to_vec());
        assert!(toml::from_str::<ExperimentConfig>("bogus = 1").is_err());
    }

    #[test]
    fn rejects_inconsistent_settings() {
        let mut c = ExperimentConfig::default();
        c.codebook.sizes.clear();
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::default();
        c.split.test_fraction = 1.0;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::default();
        c.morph.copies = 0;
        assert!(c.validate().is_err());
    }
}
