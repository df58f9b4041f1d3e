//! Building blocks shared by the stage commands and the experiment driver.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use scriptdate::codebook::{encode, train_sotm, Codebook, SomParams};
use scriptdate::features::{contours_for, extract, FeatureKind, FeatureVector, HingeConfig};
use scriptdate::imgcore::BinaryImage;
use scriptdate::junclets::extract_junctions;
use scriptdate::learn::{cross_validate, CvAggregate, CvConfig};
use scriptdate::manifest::{DatasetManifest, Sample};

/// Stratified holdout: per class (ascending year) the source ids are sorted,
/// shuffled with one seeded generator and the first `round(fraction · n)`
/// (at least one, and never the whole class) are held out.
pub fn holdout_split(sources: &[Sample], fraction: f64, seed: u64) -> Result<(Vec<Sample>, Vec<Sample>)> {
    if let Some(s) = sources.iter().find(|s| s.is_augmented()) {
        bail!("holdout split expects source samples only, got augmented {}", s.id);
    }
    let mut by_class: BTreeMap<i32, Vec<&Sample>> = BTreeMap::new();
    for s in sources {
        by_class.entry(s.label_year).or_default().push(s);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test_ids = HashSet::new();
    for (year, members) in &mut by_class {
        if members.len() < 2 {
            bail!("class {year} has {} sample(s); cannot hold any out", members.len());
        }
        members.sort_by(|a, b| a.id.cmp(&b.id));
        members.shuffle(&mut rng);
        let n = ((fraction * members.len() as f64).round() as usize).clamp(1, members.len() - 1);
        test_ids.extend(members[..n].iter().map(|s| s.id.clone()));
    }
    Ok(split_by_ids(sources, &test_ids))
}

/// Splits `sources` into (train, test) keeping manifest order within each part.
pub fn split_by_ids(sources: &[Sample], test_ids: &HashSet<String>) -> (Vec<Sample>, Vec<Sample>) {
    sources.iter().cloned().partition(|s| !test_ids.contains(&s.id))
}

/// Every textural feature in `kinds` from one traced page, plus its junction descriptors.
#[derive(Debug, Clone, PartialEq)]
pub struct PageFeatures {
    pub textural: BTreeMap<FeatureKind, FeatureVector>,
    pub descriptors: Vec<Vec<f64>>,
}

pub fn page_features(img: &BinaryImage, kinds: &[FeatureKind], cfg: &HingeConfig) -> Result<PageFeatures> {
    let textural_kinds: Vec<FeatureKind> = kinds.iter().copied().filter(|k| FeatureKind::TEXTURAL.contains(k)).collect();
    let mut textural = BTreeMap::new();
    if !textural_kinds.is_empty() {
        let contours = contours_for(img, cfg);
        for k in textural_kinds {
            textural.insert(k, extract(k, &contours, cfg)?);
        }
    }
    let descriptors = if kinds.contains(&FeatureKind::Junclets) {
        extract_junctions(img).into_iter().map(|d| d.values).collect()
    } else {
        Vec::new()
    };
    Ok(PageFeatures { textural, descriptors })
}

/// Descriptors of the non-augmented entries grouped by key year. Years with
/// more than `cap` descriptors keep a seeded sample of `cap` of them, in
/// their original order; `cap = 0` keeps everything.
pub fn patterns_by_year(
    manifest: &DatasetManifest,
    descriptors: &[Vec<Vec<f64>>],
    cap: usize,
    seed: u64,
) -> BTreeMap<i32, Vec<Vec<f64>>> {
    let mut by_year: BTreeMap<i32, Vec<Vec<f64>>> = BTreeMap::new();
    for (s, d) in manifest.entries.iter().zip(descriptors) {
        if !s.is_augmented() {
            by_year.entry(s.label_year).or_default().extend(d.iter().cloned());
        }
    }
    if cap > 0 {
        for (&year, pats) in by_year.iter_mut() {
            if pats.len() > cap {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (year as i64 as u64).rotate_left(17));
                let mut keep = index::sample(&mut rng, pats.len(), cap).into_vec();
                keep.sort_unstable();
                *pats = keep.into_iter().map(|i| std::mem::take(&mut pats[i])).collect();
            }
        }
    }
    by_year
}

pub fn train_codebook(patterns: &BTreeMap<i32, Vec<Vec<f64>>>, sub_size: usize, som: &SomParams) -> Result<Codebook> {
    Ok(train_sotm(patterns, sub_size, som)?)
}

pub fn encode_all(descriptors: &[Vec<Vec<f64>>], cb: &Codebook) -> Vec<FeatureVector> {
    descriptors.par_iter().map(|d| encode(d, cb)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub sub_size: usize,
    pub total_size: usize,
    /// Cross-validated scores at the cost value selected for this size.
    pub cv: CvAggregate,
}

#[derive(Debug, Clone)]
pub struct Sweep {
    pub rows: Vec<SweepRow>,
    pub selected_size: usize,
    pub codebook: Codebook,
}

/// Trains one temporal codebook per candidate size on `patterns`, scores the
/// encoded manifest by cross-validation and keeps the best size: highest mean
/// CS(0), then lower mean MAE, then the smaller size.
pub fn sweep_codebook_sizes(
    manifest: &DatasetManifest,
    descriptors: &[Vec<Vec<f64>>],
    patterns: &BTreeMap<i32, Vec<Vec<f64>>>,
    sizes: &[usize],
    som: &SomParams,
    cv: &CvConfig,
) -> Result<Sweep> {
    if sizes.is_empty() {
        bail!("no codebook sizes to sweep");
    }
    let trained: Vec<(SweepRow, Codebook)> = sizes
        .par_iter()
        .map(|&size| -> Result<(SweepRow, Codebook)> {
            let cb = train_codebook(patterns, size, som).with_context(|| format!("codebook size {size}"))?;
            let feats = encode_all(descriptors, &cb);
            let res = cross_validate(manifest, &feats, cv).with_context(|| format!("codebook size {size}"))?;
            let row = SweepRow {
                sub_size: size,
                total_size: cb.total_size(),
                cv: res.selected().clone(),
            };
            Ok((row, cb))
        })
        .collect::<Result<_>>()?;
    let best = (0..trained.len())
        .min_by(|&a, &b| {
            let (ra, rb) = (&trained[a].0, &trained[b].0);
            rb.cv
                .cs0_mean
                .total_cmp(&ra.cv.cs0_mean)
                .then(ra.cv.mae_mean.total_cmp(&rb.cv.mae_mean))
                .then(ra.sub_size.cmp(&rb.sub_size))
        })
        .expect("nonempty sweep");
    let selected_size = trained[best].0.sub_size;
    let mut rows = Vec::with_capacity(trained.len());
    let mut codebook = None;
    for (i, (row, cb)) in trained.into_iter().enumerate() {
        if i == best {
            codebook = Some(cb);
        }
        rows.push(row);
    }
    Ok(Sweep {
        rows,
        selected_size,
        codebook: codebook.expect("selected codebook"),
    })
}

/// Comma-separated table built in memory and written in one go.
#[derive(Debug, Clone, Default)]
pub struct Table {
    text: String,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        let mut t = Table::default();
        t.row(header.iter().map(|h| h.to_string()));
        t
    }

    pub fn row<I, S>(&mut self, cells: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut first = true;
        for c in cells {
            if !first {
                self.text.push(',');
            }
            first = false;
            self.text.push_str(c.as_ref());
        }
        self.text.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_file(path, self.text.as_bytes())
    }
}

/// Fixed six-decimal rendering for metrics, so tables diff cleanly.
pub fn num(v: f64) -> String {
    let mut s = String::new();
    write!(s, "{v:.6}").expect("write to string");
    s
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
    }
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

/// Fails with the expected path when an upstream artifact is missing.
pub fn require(path: &Path, what: &str) -> Result<()> {
    if !path.exists() {
        bail!("missing {what}: expected {}", path.display());
    }
    Ok(())
}
