//! Stratified k-fold grid search over the SVM cost, repeated across seeds.

use std::collections::{BTreeMap, HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{cs, mae, mean_sd};
use super::scaler::{fit_scaler, standardize, ScalerState};
use super::svm::{argmax_first, classes_of, solve_ova, DcdOptions, DualSolution, Gram};
use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::manifest::DatasetManifest;

/// Cost grid exponents: `C = 2^n`.
pub const GRID_EXPONENTS: std::ops::RangeInclusive<i32> = -7..=10;

pub const DEFAULT_SEEDS: [u64; 6] = [0, 50, 100, 150, 200, 250];

/// The 18 cost values `2^-7 ..= 2^10`, ascending.
pub fn c_grid() -> Vec<f64> {
    GRID_EXPONENTS.map(|n| 2f64.powi(n)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub k: usize,
    pub seeds: Vec<u64>,
    /// Ascending cost values.
    pub grid: Vec<f64>,
    /// Add augmented descendants of training-fold sources to each training split.
    pub use_augmented: bool,
    pub dcd: DcdOptions,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            k: 5,
            seeds: DEFAULT_SEEDS.to_vec(),
            grid: c_grid(),
            use_augmented: false,
            dcd: DcdOptions::default(),
        }
    }
}

/// Fold index per source, stratified by label.
///
/// Within each class (ascending year) the source ids are sorted, shuffled by
/// the seeded generator and dealt round-robin; the dealing counter carries
/// over between classes so fold sizes stay balanced overall.
pub fn stratified_folds(sources: &[(&str, i32)], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("k = {k} must be >= 2")));
    }
    let mut by_class: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
    for (i, &(_, y)) in sources.iter().enumerate() {
        by_class.entry(y).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![0; sources.len()];
    let mut counter = 0;
    for (&class, members) in &mut by_class {
        if members.len() < k {
            return Err(Error::ClassTooSmall {
                class,
                count: members.len(),
                k,
            });
        }
        members.sort_by(|&a, &b| sources[a].0.cmp(sources[b].0));
        members.shuffle(&mut rng);
        for &m in members.iter() {
            folds[m] = counter % k;
            counter += 1;
        }
    }
    Ok(folds)
}

/// One training/validation split, as indices into the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub seed: u64,
    pub fold: usize,
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub seed: u64,
    pub fold: usize,
    pub c: f64,
    pub mae: f64,
    pub cs0: f64,
    pub cs25: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvAggregate {
    pub c: f64,
    pub mae_mean: f64,
    pub mae_sd: f64,
    pub cs0_mean: f64,
    pub cs0_sd: f64,
    pub cs25_mean: f64,
    pub cs25_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub folds: Vec<FoldMetrics>,
    pub per_c: Vec<CvAggregate>,
    pub selected_c: f64,
    pub splits: Vec<Split>,
}

impl CvResult {
    pub fn selected(&self) -> &CvAggregate {
        self.per_c
            .iter()
            .find(|a| a.c == self.selected_c)
            .expect("selected cost is on the grid")
    }
}

/// Best cost: highest mean CS(0), then lower mean MAE, then smaller C.
pub fn select_c(per_c: &[CvAggregate]) -> Option<f64> {
    per_c
        .iter()
        .min_by(|a, b| {
            b.cs0_mean
                .total_cmp(&a.cs0_mean)
                .then(a.mae_mean.total_cmp(&b.mae_mean))
                .then(a.c.total_cmp(&b.c))
        })
        .map(|a| a.c)
}

/// Gram matrix of per-vector standardized features, without the bias term,
/// plus row sums, so any affine target range can be applied per split.
pub(crate) struct StdGram {
    g: Gram,
    sums: Vec<f64>,
    dim: usize,
}

impl StdGram {
    pub(crate) fn new(vectors: &[&FeatureVector]) -> StdGram {
        let std: Vec<Vec<f64>> = vectors.iter().map(|v| standardize(&v.values)).collect();
        let sums = std.iter().map(|r| r.iter().sum()).collect();
        StdGram {
            g: Gram::linear(&std),
            sums,
            dim: vectors.first().map_or(0, |v| v.dim()),
        }
    }

    /// Bias-augmented kernel on scaled vectors `a·f_std + lo`, restricted to `rows × cols`.
    pub(crate) fn kernel(&self, s: &ScalerState, rows: &[usize], cols: &[usize]) -> Vec<f64> {
        let (lo, hi) = s.target;
        let a = hi - lo;
        let d = self.dim as f64;
        let mut out = Vec::with_capacity(rows.len() * cols.len());
        for &i in rows {
            let gi = self.g.row(i);
            for &j in cols {
                // g already contains +1 for the bias feature
                let dot = gi[j] - 1.0;
                out.push(a * a * dot + a * lo * (self.sums[i] + self.sums[j]) + lo * lo * d + 1.0);
            }
        }
        out
    }

    pub(crate) fn square(&self, s: &ScalerState, idx: &[usize]) -> Gram {
        Gram::from_raw(idx.len(), self.kernel(s, idx, idx))
    }
}

/// Predicted class per column of `cross` (row-major `train × eval` kernel values).
pub(crate) fn predict_from_kernel(
    sols: &[DualSolution],
    train_labels: &[i32],
    classes: &[i32],
    cross: &[f64],
    n_eval: usize,
) -> Vec<i32> {
    let mut scores = vec![vec![0.0; classes.len()]; n_eval];
    for (ci, (sol, &class)) in sols.iter().zip(classes).enumerate() {
        for (t, (&a, &l)) in sol.alpha.iter().zip(train_labels).enumerate() {
            if a == 0.0 {
                continue;
            }
            let f = if l == class { a } else { -a };
            let row = &cross[t * n_eval..(t + 1) * n_eval];
            for (e, kv) in row.iter().enumerate() {
                scores[e][ci] += f * kv;
            }
        }
    }
    scores.iter().map(|s| classes[argmax_first(s)]).collect()
}

/// Sources eligible for validation and the training pool of each source.
///
/// Returns the indices of non-augmented entries, and for every source the
/// indices of entries that may train alongside it: itself plus, when
/// augmentation is used, its augmented descendants.
pub fn source_groups(manifest: &DatasetManifest, use_augmented: bool) -> (Vec<usize>, Vec<Vec<usize>>) {
    let sources: Vec<usize> = (0..manifest.len())
        .filter(|&i| !manifest.entries[i].is_augmented())
        .collect();
    let pos: HashMap<&str, usize> = sources
        .iter()
        .enumerate()
        .map(|(p, &i)| (manifest.entries[i].id.as_str(), p))
        .collect();
    let mut groups: Vec<Vec<usize>> = sources.iter().map(|&i| vec![i]).collect();
    if use_augmented {
        for (i, e) in manifest.entries.iter().enumerate() {
            if let Some(p) = e.source_id.as_deref().and_then(|s| pos.get(s)) {
                groups[*p].push(i);
            }
        }
    }
    (sources, groups)
}

/// Grid search with stratified k-fold cross-validation over several seeds.
///
/// `features` aligns with `manifest.entries`. Folds are drawn over the
/// non-augmented entries only; an augmented entry can only ever train in a
/// split where its source trains.
pub fn cross_validate(manifest: &DatasetManifest, features: &[FeatureVector], cfg: &CvConfig) -> Result<CvResult> {
    if features.len() != manifest.len() {
        return Err(Error::LengthMismatch(features.len(), manifest.len()));
    }
    if cfg.grid.is_empty() || cfg.seeds.is_empty() {
        return Err(Error::Empty("cost grid or seeds"));
    }
    if cfg.grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("cost grid must be strictly ascending".into()));
    }
    let (sources, groups) = source_groups(manifest, cfg.use_augmented);
    let labeled: Vec<(&str, i32)> = sources
        .iter()
        .map(|&i| (manifest.entries[i].id.as_str(), manifest.entries[i].label_year))
        .collect();
    let labels: Vec<i32> = manifest.entries.iter().map(|e| e.label_year).collect();
    let classes = classes_of(&labeled.iter().map(|l| l.1).collect::<Vec<_>>())?;

    let mut splits = Vec::new();
    for &seed in &cfg.seeds {
        let folds = stratified_folds(&labeled, cfg.k, seed)?;
        for fold in 0..cfg.k {
            let mut train = Vec::new();
            let mut validation = Vec::new();
            for (p, &f) in folds.iter().enumerate() {
                if f == fold {
                    validation.push(sources[p]);
                } else {
                    train.extend_from_slice(&groups[p]);
                }
            }
            train.sort_unstable();
            splits.push(Split {
                seed,
                fold,
                train,
                validation,
            });
        }
    }

    let used: Vec<usize> = {
        let mut u: Vec<usize> = groups.iter().flatten().copied().collect();
        u.sort_unstable();
        u
    };
    let local: HashMap<usize, usize> = used.iter().enumerate().map(|(p, &i)| (i, p)).collect();
    let gram = StdGram::new(&used.iter().map(|&i| &features[i]).collect::<Vec<_>>());

    let per_split: Vec<Result<Vec<FoldMetrics>>> = splits
        .par_iter()
        .map(|sp| {
            let scaler = fit_scaler(&sp.train.iter().map(|&i| &features[i]).collect::<Vec<_>>())?;
            let tr: Vec<usize> = sp.train.iter().map(|i| local[i]).collect();
            let va: Vec<usize> = sp.validation.iter().map(|i| local[i]).collect();
            let k = gram.square(&scaler, &tr);
            let cross = gram.kernel(&scaler, &tr, &va);
            let tl: Vec<i32> = sp.train.iter().map(|&i| labels[i]).collect();
            let truth: Vec<i32> = sp.validation.iter().map(|&i| labels[i]).collect();
            let mut warm: Option<Vec<Vec<f64>>> = None;
            let mut out = Vec::with_capacity(cfg.grid.len());
            for &c in &cfg.grid {
                let sols = solve_ova(&k, &tl, &classes, c, warm.as_deref(), &cfg.dcd);
                let preds = predict_from_kernel(&sols, &tl, &classes, &cross, va.len());
                out.push(FoldMetrics {
                    seed: sp.seed,
                    fold: sp.fold,
                    c,
                    mae: mae(&preds, &truth)?,
                    cs0: cs(&preds, &truth, 0)?,
                    cs25: cs(&preds, &truth, 25)?,
                });
                warm = Some(sols.into_iter().map(|s| s.alpha).collect());
            }
            Ok(out)
        })
        .collect();
    let mut folds = Vec::new();
    for r in per_split {
        folds.extend(r?);
    }

    let per_c: Vec<CvAggregate> = cfg
        .grid
        .iter()
        .map(|&c| {
            let rows: Vec<&FoldMetrics> = folds.iter().filter(|f| f.c == c).collect();
            let (mae_mean, mae_sd) = mean_sd(&rows.iter().map(|f| f.mae).collect::<Vec<_>>());
            let (cs0_mean, cs0_sd) = mean_sd(&rows.iter().map(|f| f.cs0).collect::<Vec<_>>());
            let (cs25_mean, cs25_sd) = mean_sd(&rows.iter().map(|f| f.cs25).collect::<Vec<_>>());
            CvAggregate {
                c,
                mae_mean,
                mae_sd,
                cs0_mean,
                cs0_sd,
                cs25_mean,
                cs25_sd,
            }
        })
        .collect();
    let selected_c = select_c(&per_c).expect("non-empty grid");
    Ok(CvResult {
        folds,
        per_c,
        selected_c,
        splits,
    })
}

/// Ids in any training split that descend from a sample in the same split's
/// validation set. Empty whenever the exclusion rule holds.
pub fn leaked_ids(manifest: &DatasetManifest, splits: &[Split]) -> Vec<String> {
    let mut leaks = Vec::new();
    for sp in splits {
        let held: HashSet<&str> = sp
            .validation
            .iter()
            .map(|&i| manifest.entries[i].id.as_str())
            .collect();
        for &i in &sp.train {
            let e = &manifest.entries[i];
            if held.contains(e.id.as_str()) || e.source_id.as_deref().is_some_and(|s| held.contains(s)) {
                leaks.push(e.id.clone());
            }
        }
    }
    leaks
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureKind;
    use crate::manifest::Sample;
    use std::path::PathBuf;

    fn sample(id: &str, year: i32, source: Option<&str>) -> Sample {
        Sample {
            id: id.into(),
            path: PathBuf::from(format!("{id}.png")),
            label_year: year,
            writer: None,
            source_id: source.map(Into::into),
            seed: None,
        }
    }

    #[test]
    fn grid_has_eighteen_values() {
        let g = c_grid();
        assert_eq!(g.len(), 18);
        assert_eq!(g[0], 1.0 / 128.0);
        assert_eq!(g[17], 1024.0);
    }

    #[test]
    fn folds_are_stratified_and_seeded() {
        let ids: Vec<String> = (0..30).map(|i| format!("s{i:02}")).collect();
        let src: Vec<(&str, i32)> = ids.iter().enumerate().map(|(i, s)| (s.as_str(), 1300 + 25 * (i % 3) as i32)).collect();
        let f = stratified_folds(&src, 5, 0).unwrap();
        for fold in 0..5 {
            for y in [1300, 1325, 1350] {
                let n = (0..30).filter(|&i| f[i] == fold && src[i].1 == y).count();
                assert_eq!(n, 2);
            }
        }
        assert_eq!(f, stratified_folds(&src, 5, 0).unwrap());
        assert_ne!(f, stratified_folds(&src, 5, 50).unwrap());
        // input order does not matter, only ids and labels
        let mut rev = src.clone();
        rev.reverse();
        let fr = stratified_folds(&rev, 5, 0).unwrap();
        for (i, s) in src.iter().enumerate() {
            let j = rev.iter().position(|r| r == s).unwrap();
            assert_eq!(f[i], fr[j]);
        }
    }

    #[test]
    fn small_class_is_named() {
        let src = vec![("a", 1), ("b", 1), ("c", 2)];
        assert!(matches!(
            stratified_folds(&src, 2, 0),
            Err(Error::ClassTooSmall { class: 2, count: 1, k: 2 })
        ));
    }

    #[test]
    fn selection_tie_breaks() {
        let agg = |c: f64, cs0: f64, mae: f64| CvAggregate {
            c,
            mae_mean: mae,
            mae_sd: 0.0,
            cs0_mean: cs0,
            cs0_sd: 0.0,
            cs25_mean: 0.0,
            cs25_sd: 0.0,
        };
        assert_eq!(select_c(&[agg(1.0, 50.0, 3.0), agg(2.0, 60.0, 9.0)]), Some(2.0));
        assert_eq!(select_c(&[agg(1.0, 60.0, 3.0), agg(2.0, 60.0, 2.0)]), Some(2.0));
        assert_eq!(select_c(&[agg(1.0, 60.0, 2.0), agg(2.0, 60.0, 2.0)]), Some(1.0));
    }

    fn toy(augment: bool) -> (DatasetManifest, Vec<FeatureVector>) {
        let mut entries = Vec::new();
        let mut feats = Vec::new();
        for i in 0..24 {
            let y = [1300, 1325, 1350][i % 3];
            let id = format!("d{i}");
            let mut v = vec![0.05; 6];
            v[i % 3] = 1.0 + (i as f64) * 0.01;
            entries.push(sample(&id, y, None));
            feats.push(FeatureVector {
                kind: FeatureKind::Hinge,
                values: v.clone(),
                empty: false,
                skipped_contours: 0,
            });
            if augment {
                let aid = format!("{id}.morph0");
                entries.push(sample(&aid, y, Some(&id)));
                v[3] = 0.3;
                feats.push(FeatureVector {
                    kind: FeatureKind::Hinge,
                    values: v,
                    empty: false,
                    skipped_contours: 0,
                });
            }
        }
        (DatasetManifest::new(entries).unwrap(), feats)
    }

    #[test]
    fn separable_toy_cross_validates_perfectly() {
        let (m, f) = toy(false);
        let cfg = CvConfig {
            k: 4,
            seeds: vec![0, 50],
            ..CvConfig::default()
        };
        let r = cross_validate(&m, &f, &cfg).unwrap();
        assert_eq!(r.folds.len(), 2 * 4 * 18);
        assert_eq!(r.selected().cs0_mean, 100.0);
        assert_eq!(r, cross_validate(&m, &f, &cfg).unwrap());
    }

    #[test]
    fn augmented_copies_follow_their_source() {
        let (m, f) = toy(true);
        let cfg = CvConfig {
            k: 4,
            seeds: vec![0],
            grid: vec![1.0],
            use_augmented: true,
            ..CvConfig::default()
        };
        let r = cross_validate(&m, &f, &cfg).unwrap();
        assert!(leaked_ids(&m, &r.splits).is_empty());
        for sp in &r.splits {
            assert_eq!(sp.train.len(), 2 * 18);
            assert!(sp.validation.iter().all(|&i| !m.entries[i].is_augmented()));
        }
        // folds are unchanged by augmentation
        let (plain, pf) = toy(false);
        let r0 = cross_validate(&plain, &pf, &CvConfig { use_augmented: false, ..cfg }).unwrap();
        for (a, b) in r.splits.iter().zip(&r0.splits) {
            let ids = |m: &DatasetManifest, v: &[usize]| v.iter().map(|&i| m.entries[i].id.clone()).collect::<Vec<_>>();
            assert_eq!(ids(&m, &a.validation), ids(&plain, &b.validation));
        }
        // the guard notices a planted leak
        let mut bad = r.splits.clone();
        let held = bad[0].validation[0];
        let child = m.entries.iter().position(|e| e.source_id.as_deref() == Some(&m.entries[held].id)).unwrap();
        bad[0].train.push(child);
        assert_eq!(leaked_ids(&m, &bad).len(), 1);
    }
}
