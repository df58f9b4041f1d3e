//! The two-condition experiment: holdout split, augmentation of training
//! sources, feature extraction, codebook size sweep, cross-validated cost
//! selection, final fit and held-out evaluation, for every configured feature.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use anyhow::{bail, Context, Result};
use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use scriptdate::augment::{morph, morph_binarized, plan_copies, MorphStage};
use scriptdate::codebook::Codebook;
use scriptdate::features::{FeatureKind, FeatureVector};
use scriptdate::imgcore::{binarize_page, BinaryImage};
use scriptdate::learn::{
    cross_validate, cs, evaluate_holdout, fit_final, leaked_ids, source_groups, Condition, CvAggregate, CvResult,
    EvalReport,
};
use scriptdate::manifest::{DatasetManifest, Sample};

use crate::access::{Access, ImageStore, Phase};
use crate::config::ExperimentConfig;
use crate::pipeline::{
    encode_all, holdout_split, num, page_features, patterns_by_year, split_by_ids, sweep_codebook_sizes, write_file,
    PageFeatures, SweepRow, Table,
};
use crate::synth;

/// Alphas of the cumulative-score curves written for plotting.
pub const CURVE_ALPHAS: [u32; 21] = [
    0, 5, 10, 15, 20, 25, 30, 35, 40, 45, 50, 55, 60, 65, 70, 75, 80, 85, 90, 95, 100,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub samples: usize,
    pub classes: Vec<i32>,
    pub train_sources: usize,
    pub augmented: usize,
    pub test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodebookSummary {
    pub sweep: Vec<SweepRow>,
    pub selected_size: usize,
    pub total_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub feature: FeatureKind,
    pub condition: Condition,
    pub selected_c: f64,
    pub cv: CvAggregate,
    /// Entries in the final training set.
    pub train_size: usize,
    pub leaked_ids: Vec<String>,
    pub holdout: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionGap {
    pub feature: FeatureKind,
    pub cs0_non_augmented: f64,
    pub cs0_augmented: f64,
    pub cs25_non_augmented: f64,
    pub cs25_augmented: f64,
    pub mae_non_augmented: f64,
    pub mae_augmented: f64,
    pub cv_cs0_non_augmented: f64,
    pub cv_cs0_augmented: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub corpus: CorpusSummary,
    pub test_ids: Vec<String>,
    pub codebook: Option<CodebookSummary>,
    pub runs: Vec<RunSummary>,
    pub comparison: Vec<ConditionGap>,
}

/// Everything a run produced, for inspection by tests and callers.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub feature: FeatureKind,
    pub condition: Condition,
    pub cv: CvResult,
    /// Indices into the training manifest used for the final fit.
    pub final_train: Vec<usize>,
    pub report: EvalReport,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub report: ExperimentReport,
    /// Training sources and their augmented copies.
    pub train: DatasetManifest,
    pub test: Vec<Sample>,
    pub train_features: BTreeMap<FeatureKind, Vec<FeatureVector>>,
    pub test_features: BTreeMap<FeatureKind, Vec<FeatureVector>>,
    pub codebook: Option<Codebook>,
    pub runs: Vec<RunOutcome>,
    pub access: Vec<Access>,
}

/// Loads the configured manifest or renders the synthetic corpus under `out_dir/corpus`.
pub fn resolve_corpus(cfg: &ExperimentConfig, out_dir: &Path) -> Result<DatasetManifest> {
    match &cfg.corpus.manifest {
        Some(path) => {
            DatasetManifest::load(path).with_context(|| format!("loading manifest {}", path.display()))
        }
        None => synth::generate(&cfg.corpus.synth, &out_dir.join("corpus")).context("generating synthetic corpus"),
    }
}

pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentOutcome> {
    let corpus = resolve_corpus(cfg, out_dir)?;
    run_on_manifest(cfg, &corpus, out_dir)
}

/// Binarized source page followed by its binarized augmented copies.
type PreparedSource = Vec<(Sample, BinaryImage)>;

fn prepare_training(
    store: &ImageStore,
    cfg: &ExperimentConfig,
    sources: &[Sample],
    augment: bool,
    aug_dir: &Path,
) -> Result<Vec<PreparedSource>> {
    sources
        .par_iter()
        .map(|src| -> Result<PreparedSource> {
            let gray = store.load_gray(src)?;
            let mut out = vec![(src.clone(), binarize_page(&gray, cfg.polarity))];
            if augment {
                for copy in plan_copies(src, &cfg.morph, Some(aug_dir)) {
                    let p = cfg.morph.with_seed(copy.seed.expect("planned seed"));
                    let img = match cfg.morph_stage {
                        MorphStage::PreBinarization => morph(&gray, &p),
                        MorphStage::PostBinarization => morph_binarized(&gray, &p, cfg.polarity)
                            .with_context(|| format!("augmenting {}", src.id))?,
                    };
                    img.save_png(&copy.path).with_context(|| format!("writing {}", copy.id))?;
                    out.push((copy.clone(), binarize_page(&img, cfg.polarity)));
                }
            }
            Ok(out)
        })
        .collect()
}

fn extract_pages(pages: &[(Sample, BinaryImage)], cfg: &ExperimentConfig) -> Result<Vec<PageFeatures>> {
    pages
        .par_iter()
        .map(|(s, img)| page_features(img, &cfg.features, &cfg.hinge).with_context(|| format!("sample {}", s.id)))
        .collect()
}

fn collect_textural(pages: &[PageFeatures], kinds: &[FeatureKind]) -> BTreeMap<FeatureKind, Vec<FeatureVector>> {
    kinds
        .iter()
        .filter(|k| FeatureKind::TEXTURAL.contains(k))
        .map(|&k| (k, pages.iter().map(|p| p.textural[&k].clone()).collect()))
        .collect()
}

/// Runs the experiment on an existing source manifest (augmented entries are ignored).
pub fn run_on_manifest(cfg: &ExperimentConfig, corpus: &DatasetManifest, out_dir: &Path) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let store = ImageStore::new();
    let sources: Vec<Sample> = corpus.sources().cloned().collect();

    // split
    let (train_sources, test) = match &cfg.split.test_ids {
        Some(ids) => {
            let ids: HashSet<String> = ids.iter().cloned().collect();
            if let Some(missing) = ids.iter().find(|id| !sources.iter().any(|s| &s.id == *id)) {
                bail!("test id {missing} is not a source sample of the corpus");
            }
            split_by_ids(&sources, &ids)
        }
        None => holdout_split(&sources, cfg.split.test_fraction, cfg.seed)?,
    };
    if test.is_empty() {
        bail!("empty test split");
    }
    info!("split: {} training sources, {} test samples", train_sources.len(), test.len());

    // augmentation (training sources only) and binarization
    let augment = cfg.conditions.iter().any(|c| c.uses_augmented());
    let aug_dir = out_dir.join("augmented");
    if augment {
        std::fs::create_dir_all(&aug_dir).with_context(|| format!("creating {}", aug_dir.display()))?;
    }
    let prepared = prepare_training(&store, cfg, &train_sources, augment, &aug_dir)?;
    let pages: Vec<(Sample, BinaryImage)> = prepared.into_iter().flatten().collect();
    let train = DatasetManifest::new(pages.iter().map(|p| p.0.clone()).collect())?;
    info!("training manifest: {} entries", train.len());

    // features
    let train_pages = extract_pages(&pages, cfg)?;
    drop(pages);
    let mut train_features = collect_textural(&train_pages, &cfg.features);
    let train_desc: Vec<Vec<Vec<f64>>> = train_pages.into_iter().map(|p| p.descriptors).collect();

    // codebook: trained and swept on non-augmented training sources only
    let mut codebook_summary = None;
    let mut codebook = None;
    if cfg.features.contains(&FeatureKind::Junclets) {
        let patterns = patterns_by_year(&train, &train_desc, cfg.codebook.max_patterns_per_year, cfg.codebook.som.seed);
        info!(
            "codebook sweep over {:?} with {} training descriptors",
            cfg.codebook.sizes,
            patterns.values().map(Vec::len).sum::<usize>()
        );
        let sweep = sweep_codebook_sizes(
            &train,
            &train_desc,
            &patterns,
            &cfg.codebook.sizes,
            &cfg.codebook.som,
            &cfg.cv.cv_config(false),
        )?;
        info!("selected sub-codebook size {}", sweep.selected_size);
        train_features.insert(FeatureKind::Junclets, encode_all(&train_desc, &sweep.codebook));
        codebook_summary = Some(CodebookSummary {
            total_size: sweep.codebook.total_size(),
            selected_size: sweep.selected_size,
            sweep: sweep.rows,
        });
        codebook = Some(sweep.codebook);
    }

    // cross-validation and final fits
    struct Fitted {
        feature: FeatureKind,
        condition: Condition,
        cv: CvResult,
        final_train: Vec<usize>,
        model: scriptdate::learn::LinearOvaModel,
        scaler: scriptdate::learn::ScalerState,
    }
    let mut fitted = Vec::new();
    for &feature in &cfg.features {
        let feats = &train_features[&feature];
        for &condition in &cfg.conditions {
            let use_aug = condition.uses_augmented();
            let cv = cross_validate(&train, feats, &cfg.cv.cv_config(use_aug))
                .with_context(|| format!("cross-validating {feature} ({condition})"))?;
            let (model, scaler) = fit_final(&train, feats, cv.selected_c, use_aug, &cfg.cv.dcd)
                .with_context(|| format!("fitting {feature} ({condition})"))?;
            let (_, groups) = source_groups(&train, use_aug);
            let mut final_train: Vec<usize> = groups.into_iter().flatten().collect();
            final_train.sort_unstable();
            info!(
                "{feature} ({condition}): C = {} cv CS(0) = {:.2}",
                cv.selected_c,
                cv.selected().cs0_mean
            );
            fitted.push(Fitted {
                feature,
                condition,
                cv,
                final_train,
                model,
                scaler,
            });
        }
    }

    // held-out evaluation: the only phase that reads test images
    store.enter(Phase::Testing);
    let test_pages: Vec<(Sample, BinaryImage)> = test
        .par_iter()
        .map(|s| Ok((s.clone(), binarize_page(&store.load_gray(s)?, cfg.polarity))))
        .collect::<Result<_>>()?;
    let test_feats_pages = extract_pages(&test_pages, cfg)?;
    let mut test_features = collect_textural(&test_feats_pages, &cfg.features);
    if let Some(cb) = &codebook {
        let desc: Vec<Vec<Vec<f64>>> = test_feats_pages.into_iter().map(|p| p.descriptors).collect();
        test_features.insert(FeatureKind::Junclets, encode_all(&desc, cb));
    }

    let mut runs = Vec::with_capacity(fitted.len());
    let mut summaries = Vec::with_capacity(fitted.len());
    for f in fitted {
        let pairs: Vec<(&Sample, &FeatureVector)> = test.iter().zip(&test_features[&f.feature]).collect();
        let report = evaluate_holdout(&f.model, &f.scaler, &pairs, f.condition)
            .with_context(|| format!("evaluating {} ({})", f.feature, f.condition))?;
        summaries.push(RunSummary {
            feature: f.feature,
            condition: f.condition,
            selected_c: f.cv.selected_c,
            cv: f.cv.selected().clone(),
            train_size: f.final_train.len(),
            leaked_ids: leaked_ids(&train, &f.cv.splits),
            holdout: report.clone(),
        });
        runs.push(RunOutcome {
            feature: f.feature,
            condition: f.condition,
            cv: f.cv,
            final_train: f.final_train,
            report,
        });
    }

    let report = ExperimentReport {
        config: cfg.clone(),
        corpus: CorpusSummary {
            samples: sources.len(),
            classes: corpus.years(),
            train_sources: train_sources.len(),
            augmented: train.len() - train_sources.len(),
            test: test.len(),
        },
        test_ids: test.iter().map(|s| s.id.clone()).collect(),
        codebook: codebook_summary,
        comparison: comparison(&summaries),
        runs: summaries,
    };
    let outcome = ExperimentOutcome {
        report,
        train,
        test,
        train_features,
        test_features,
        codebook,
        runs,
        access: store.log(),
    };
    write_outputs(&outcome, out_dir)?;
    Ok(outcome)
}

fn comparison(runs: &[RunSummary]) -> Vec<ConditionGap> {
    let mut out = Vec::new();
    let mut features: Vec<FeatureKind> = Vec::new();
    for r in runs {
        if !features.contains(&r.feature) {
            features.push(r.feature);
        }
    }
    for f in features {
        let get = |c: Condition| runs.iter().find(|r| r.feature == f && r.condition == c);
        if let (Some(n), Some(a)) = (get(Condition::NonAugmented), get(Condition::Augmented)) {
            out.push(ConditionGap {
                feature: f,
                cs0_non_augmented: n.holdout.cs0,
                cs0_augmented: a.holdout.cs0,
                cs25_non_augmented: n.holdout.cs25,
                cs25_augmented: a.holdout.cs25,
                mae_non_augmented: n.holdout.mae,
                mae_augmented: a.holdout.mae,
                cv_cs0_non_augmented: n.cv.cs0_mean,
                cv_cs0_augmented: a.cv.cs0_mean,
            });
        }
    }
    out
}

/// `results.csv`, the CV tables, the codebook sweep, plot-ready figure tables and `report.json`.
pub fn write_outputs(o: &ExperimentOutcome, out_dir: &Path) -> Result<()> {
    let mut results = Table::new(&["feature", "condition", "C", "mae", "cs0", "cs25"]);
    let mut folds = Table::new(&["feature", "condition", "seed", "fold", "C", "mae", "cs0", "cs25"]);
    let mut summary = Table::new(&[
        "feature", "condition", "C", "mae_mean", "mae_sd", "cs0_mean", "cs0_sd", "cs25_mean", "cs25_sd", "selected",
    ]);
    let mut mae_bars = Table::new(&["feature", "condition", "mae", "cs0", "cs25"]);
    let mut curves = Table::new(&["feature", "condition", "alpha", "cs"]);
    let mut by_c = Table::new(&["feature", "condition", "log2_c", "mae_mean", "mae_sd", "cs0_mean", "cs0_sd"]);
    for r in &o.runs {
        let (f, c) = (r.feature.to_string(), r.condition.to_string());
        results.row([
            f.clone(),
            c.clone(),
            r.cv.selected_c.to_string(),
            num(r.report.mae),
            num(r.report.cs0),
            num(r.report.cs25),
        ]);
        mae_bars.row([f.clone(), c.clone(), num(r.report.mae), num(r.report.cs0), num(r.report.cs25)]);
        for m in &r.cv.folds {
            folds.row([
                f.clone(),
                c.clone(),
                m.seed.to_string(),
                m.fold.to_string(),
                m.c.to_string(),
                num(m.mae),
                num(m.cs0),
                num(m.cs25),
            ]);
        }
        for a in &r.cv.per_c {
            let chosen = if a.c == r.cv.selected_c { "1" } else { "0" };
            summary.row([
                f.clone(),
                c.clone(),
                a.c.to_string(),
                num(a.mae_mean),
                num(a.mae_sd),
                num(a.cs0_mean),
                num(a.cs0_sd),
                num(a.cs25_mean),
                num(a.cs25_sd),
                chosen.to_string(),
            ]);
            by_c.row([
                f.clone(),
                c.clone(),
                (a.c.log2().round() as i32).to_string(),
                num(a.mae_mean),
                num(a.mae_sd),
                num(a.cs0_mean),
                num(a.cs0_sd),
            ]);
        }
        let preds: Vec<i32> = r.report.predictions.iter().map(|p| p.predicted).collect();
        let truth: Vec<i32> = r.report.predictions.iter().map(|p| p.truth).collect();
        for alpha in CURVE_ALPHAS {
            curves.row([f.clone(), c.clone(), alpha.to_string(), num(cs(&preds, &truth, alpha)?)]);
        }
    }
    results.write(&out_dir.join("results.csv"))?;
    folds.write(&out_dir.join("cv_folds.csv"))?;
    summary.write(&out_dir.join("cv_summary.csv"))?;
    let figs = out_dir.join("figures");
    mae_bars.write(&figs.join("holdout_metrics.csv"))?;
    curves.write(&figs.join("holdout_cs_curves.csv"))?;
    by_c.write(&figs.join("cv_by_cost.csv"))?;

    if let Some(cb) = &o.report.codebook {
        let mut sweep = Table::new(&[
            "sub_size", "total_size", "C", "mae_mean", "mae_sd", "cs0_mean", "cs0_sd", "cs25_mean", "cs25_sd", "selected",
        ]);
        for r in &cb.sweep {
            sweep.row([
                r.sub_size.to_string(),
                r.total_size.to_string(),
                r.cv.c.to_string(),
                num(r.cv.mae_mean),
                num(r.cv.mae_sd),
                num(r.cv.cs0_mean),
                num(r.cv.cs0_sd),
                num(r.cv.cs25_mean),
                num(r.cv.cs25_sd),
                if r.sub_size == cb.selected_size { "1" } else { "0" }.to_string(),
            ]);
        }
        sweep.write(&out_dir.join("codebook_sweep.csv"))?;
        sweep.write(&figs.join("codebook_sizes.csv"))?;
    }

    let mut gap = Table::new(&[
        "feature",
        "cs0_non_augmented",
        "cs0_augmented",
        "delta_cs0",
        "cs25_non_augmented",
        "cs25_augmented",
        "delta_cs25",
        "mae_non_augmented",
        "mae_augmented",
        "delta_mae",
    ]);
    for g in &o.report.comparison {
        gap.row([
            g.feature.to_string(),
            num(g.cs0_non_augmented),
            num(g.cs0_augmented),
            num(g.cs0_augmented - g.cs0_non_augmented),
            num(g.cs25_non_augmented),
            num(g.cs25_augmented),
            num(g.cs25_augmented - g.cs25_non_augmented),
            num(g.mae_non_augmented),
            num(g.mae_augmented),
            num(g.mae_augmented - g.mae_non_augmented),
        ]);
    }
    gap.write(&figs.join("condition_gap.csv"))?;

    let json = serde_json::to_vec_pretty(&o.report)?;
    write_file(&out_dir.join("report.json"), &json)
}
