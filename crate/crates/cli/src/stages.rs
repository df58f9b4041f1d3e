//! The standalone pipeline stages. Each reads and writes files only, and
//! rewrites byte-identical artifacts when its inputs are unchanged.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;

use scriptdate::augment::{morph, morph_binarized, plan_copies, MorphParams, MorphStage};
use scriptdate::codebook::{Codebook, SomParams};
use scriptdate::features::{FeatureKind, FeatureVector, HingeConfig};
use scriptdate::imgcore::{binarize_page, load_binary, load_gray, Polarity};
use scriptdate::learn::{
    cross_validate, evaluate_holdout, fit_final, Condition, CvResult, EvalReport, LinearOvaModel, ScalerState,
};
use scriptdate::manifest::{DatasetManifest, Sample};
use scriptdate::store::{read_features, write_features, write_features_csv};

use crate::config::CvSettings;
use crate::pipeline::{
    encode_all, num, page_features, patterns_by_year, require, sweep_codebook_sizes, train_codebook, write_file,
    SweepRow, Table,
};

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const CODEBOOK_FILE: &str = "codebook.bin";
pub const MODEL_FILE: &str = "model.bin";
pub const SCALER_FILE: &str = "scaler.json";

pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    require(path, "manifest")?;
    DatasetManifest::load(path).with_context(|| format!("loading manifest {}", path.display()))
}

fn file_name(s: &Sample) -> Result<PathBuf> {
    s.path
        .file_name()
        .map(PathBuf::from)
        .with_context(|| format!("sample {} has no image file name", s.id))
}

/// Binarizes every entry into `out_dir` and writes a manifest pointing at the binarized pages.
pub fn cmd_binarize(manifest: &Path, out_dir: &Path, polarity: Polarity) -> Result<DatasetManifest> {
    let m = load_manifest(manifest)?;
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let entries: Vec<Sample> = m
        .entries
        .par_iter()
        .map(|s| -> Result<Sample> {
            let gray = load_gray(&s.path).with_context(|| format!("sample {}", s.id))?;
            let mut out = s.clone();
            out.path = out_dir.join(file_name(s)?).with_extension("png");
            binarize_page(&gray, polarity)
                .save_png(&out.path)
                .with_context(|| format!("writing {}", out.path.display()))?;
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let out = DatasetManifest::new(entries)?;
    out.save(&out_dir.join(MANIFEST_FILE))?;
    Ok(out)
}

/// Writes `copies` morphed variants of every source into `out_dir` and the merged manifest beside them.
pub fn cmd_augment(
    manifest: &Path,
    out_dir: &Path,
    params: &MorphParams,
    stage: MorphStage,
    polarity: Polarity,
) -> Result<DatasetManifest> {
    params.validate()?;
    let m = load_manifest(manifest)?;
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let sources: Vec<&Sample> = m.sources().collect();
    let copies: Vec<Vec<Sample>> = sources
        .par_iter()
        .map(|src| -> Result<Vec<Sample>> {
            let gray = load_gray(&src.path).with_context(|| format!("sample {}", src.id))?;
            let planned = plan_copies(src, params, Some(out_dir));
            for c in &planned {
                let p = params.with_seed(c.seed.expect("planned seed"));
                let img = match stage {
                    MorphStage::PreBinarization => morph(&gray, &p),
                    MorphStage::PostBinarization => {
                        morph_binarized(&gray, &p, polarity).with_context(|| format!("sample {}", src.id))?
                    }
                };
                img.save_png(&c.path).with_context(|| format!("writing {}", c.id))?;
            }
            Ok(planned)
        })
        .collect::<Result<_>>()?;
    let mut entries = Vec::new();
    for (src, cs) in sources.into_iter().zip(copies) {
        entries.push(src.clone());
        entries.extend(cs);
    }
    let out = DatasetManifest::new(entries)?;
    out.save(&out_dir.join(MANIFEST_FILE))?;
    Ok(out)
}

/// Extracts one feature kind per manifest entry. `Junclets` (or `Junclets-raw`)
/// writes the raw 120-direction descriptors, one record per junction, with an
/// empty marker record for pages without junctions.
pub fn cmd_extract(
    manifest: &Path,
    kind: FeatureKind,
    out: &Path,
    hinge: &HingeConfig,
    polarity: Polarity,
    csv: bool,
) -> Result<usize> {
    let m = load_manifest(manifest)?;
    let kind_list = match kind {
        FeatureKind::Junclets | FeatureKind::JuncletsRaw => vec![FeatureKind::Junclets],
        k => vec![k],
    };
    let per_sample: Vec<Vec<(String, FeatureVector)>> = m
        .entries
        .par_iter()
        .map(|s| -> Result<Vec<(String, FeatureVector)>> {
            let img = load_binary(&s.path, polarity).with_context(|| format!("sample {}", s.id))?;
            let pf = page_features(&img, &kind_list, hinge).with_context(|| format!("sample {}", s.id))?;
            Ok(match kind {
                FeatureKind::Junclets | FeatureKind::JuncletsRaw => {
                    if pf.descriptors.is_empty() {
                        vec![(s.id.clone(), FeatureVector::zeros(FeatureKind::JuncletsRaw, 120))]
                    } else {
                        pf.descriptors
                            .into_iter()
                            .map(|values| {
                                (
                                    s.id.clone(),
                                    FeatureVector {
                                        kind: FeatureKind::JuncletsRaw,
                                        values,
                                        empty: false,
                                        skipped_contours: 0,
                                    },
                                )
                            })
                            .collect()
                    }
                }
                k => vec![(s.id.clone(), pf.textural[&k].clone())],
            })
        })
        .collect::<Result<_>>()?;
    let records: Vec<(String, FeatureVector)> = per_sample.into_iter().flatten().collect();
    if let Some(dir) = out.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
    }
    write_features(out, &records)?;
    if csv {
        write_features_csv(&out.with_extension("csv"), &records)?;
    }
    Ok(records.len())
}

/// One vector per manifest entry, in manifest order.
pub fn load_aligned_features(m: &DatasetManifest, path: &Path) -> Result<Vec<FeatureVector>> {
    require(path, "feature file")?;
    let mut by_id: HashMap<String, FeatureVector> = HashMap::new();
    for (id, v) in read_features(path).with_context(|| format!("reading {}", path.display()))? {
        if by_id.insert(id.clone(), v).is_some() {
            bail!("{}: several vectors for sample {id}", path.display());
        }
    }
    m.entries
        .iter()
        .map(|s| {
            by_id
                .remove(&s.id)
                .with_context(|| format!("{}: no vector for sample {}", path.display(), s.id))
        })
        .collect()
}

/// Raw junction descriptors per manifest entry, in manifest order.
pub fn load_descriptors(m: &DatasetManifest, path: &Path) -> Result<Vec<Vec<Vec<f64>>>> {
    require(path, "descriptor file")?;
    let mut by_id: HashMap<String, Vec<Vec<f64>>> = HashMap::new();
    for (id, v) in read_features(path).with_context(|| format!("reading {}", path.display()))? {
        if v.kind != FeatureKind::JuncletsRaw {
            bail!("{}: expected Junclets-raw records, found {}", path.display(), v.kind);
        }
        let slot = by_id.entry(id).or_default();
        if !v.empty {
            slot.push(v.values);
        }
    }
    m.entries
        .iter()
        .map(|s| {
            by_id
                .remove(&s.id)
                .with_context(|| format!("{}: no descriptors for sample {}", path.display(), s.id))
        })
        .collect()
}

pub struct CodebookRun {
    pub selected_size: usize,
    pub sweep: Vec<SweepRow>,
}

/// Trains a temporal codebook on the manifest's non-augmented entries. With
/// several sizes, each is scored by cross-validation and the best is kept;
/// the sweep is written to `codebook_sweep.csv`.
pub fn cmd_codebook(
    manifest: &Path,
    descriptors: &Path,
    sizes: &[usize],
    som: &SomParams,
    max_patterns_per_year: usize,
    cv: &CvSettings,
    out_dir: &Path,
) -> Result<CodebookRun> {
    let m = load_manifest(manifest)?;
    let desc = load_descriptors(&m, descriptors)?;
    let patterns = patterns_by_year(&m, &desc, max_patterns_per_year, som.seed);
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let run = match sizes {
        [] => bail!("no codebook sizes given"),
        [size] => {
            let cb = train_codebook(&patterns, *size, som)?;
            cb.save(&out_dir.join(CODEBOOK_FILE))?;
            CodebookRun {
                selected_size: *size,
                sweep: Vec::new(),
            }
        }
        _ => {
            let sweep = sweep_codebook_sizes(&m, &desc, &patterns, sizes, som, &cv.cv_config(false))?;
            sweep.codebook.save(&out_dir.join(CODEBOOK_FILE))?;
            let mut t = Table::new(&["sub_size", "total_size", "C", "mae_mean", "mae_sd", "cs0_mean", "cs0_sd", "selected"]);
            for r in &sweep.rows {
                t.row([
                    r.sub_size.to_string(),
                    r.total_size.to_string(),
                    r.cv.c.to_string(),
                    num(r.cv.mae_mean),
                    num(r.cv.mae_sd),
                    num(r.cv.cs0_mean),
                    num(r.cv.cs0_sd),
                    if r.sub_size == sweep.selected_size { "1" } else { "0" }.to_string(),
                ]);
            }
            t.write(&out_dir.join("codebook_sweep.csv"))?;
            CodebookRun {
                selected_size: sweep.selected_size,
                sweep: sweep.rows,
            }
        }
    };
    Ok(run)
}

/// Encodes every entry's descriptors as a codebook usage histogram.
pub fn cmd_encode(manifest: &Path, descriptors: &Path, codebook: &Path, out: &Path) -> Result<usize> {
    let m = load_manifest(manifest)?;
    let desc = load_descriptors(&m, descriptors)?;
    require(codebook, "codebook")?;
    let cb = Codebook::load(codebook).with_context(|| format!("loading codebook {}", codebook.display()))?;
    let vectors = encode_all(&desc, &cb);
    let records: Vec<(String, FeatureVector)> = m.entries.iter().map(|s| s.id.clone()).zip(vectors).collect();
    write_features(out, &records)?;
    Ok(records.len())
}

/// Cross-validates the cost grid, fits the final model at the selected cost
/// and writes the model, its scaler and the CV tables into `out_dir`.
pub fn cmd_train(
    manifest: &Path,
    features: &Path,
    condition: Condition,
    cv: &CvSettings,
    out_dir: &Path,
) -> Result<CvResult> {
    let m = load_manifest(manifest)?;
    let feats = load_aligned_features(&m, features)?;
    let use_aug = condition.uses_augmented();
    let res = cross_validate(&m, &feats, &cv.cv_config(use_aug))?;
    let (model, scaler) = fit_final(&m, &feats, res.selected_c, use_aug, &cv.dcd)?;
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    model.save(&out_dir.join(MODEL_FILE))?;
    write_file(&out_dir.join(SCALER_FILE), &serde_json::to_vec_pretty(&scaler)?)?;
    let mut summary = Table::new(&["C", "mae_mean", "mae_sd", "cs0_mean", "cs0_sd", "cs25_mean", "cs25_sd", "selected"]);
    for a in &res.per_c {
        summary.row([
            a.c.to_string(),
            num(a.mae_mean),
            num(a.mae_sd),
            num(a.cs0_mean),
            num(a.cs0_sd),
            num(a.cs25_mean),
            num(a.cs25_sd),
            if a.c == res.selected_c { "1" } else { "0" }.to_string(),
        ]);
    }
    summary.write(&out_dir.join("cv_summary.csv"))?;
    let mut folds = Table::new(&["seed", "fold", "C", "mae", "cs0", "cs25"]);
    for f in &res.folds {
        folds.row([f.seed.to_string(), f.fold.to_string(), f.c.to_string(), num(f.mae), num(f.cs0), num(f.cs25)]);
    }
    folds.write(&out_dir.join("cv_folds.csv"))?;
    Ok(res)
}

/// Scores a trained model on a held-out manifest and writes `report.json` into `out_dir`.
pub fn cmd_eval(
    manifest: &Path,
    features: &Path,
    model_dir: &Path,
    condition: Condition,
    out_dir: &Path,
) -> Result<EvalReport> {
    let m = load_manifest(manifest)?;
    if m.is_empty() {
        bail!("test manifest {} is empty", manifest.display());
    }
    let feats = load_aligned_features(&m, features)?;
    let model_path = model_dir.join(MODEL_FILE);
    let scaler_path = model_dir.join(SCALER_FILE);
    require(&model_path, "model")?;
    require(&scaler_path, "scaler")?;
    let model = LinearOvaModel::load(&model_path)?;
    let scaler: ScalerState = serde_json::from_slice(
        &std::fs::read(&scaler_path).with_context(|| format!("reading {}", scaler_path.display()))?,
    )?;
    let pairs: Vec<(&Sample, &FeatureVector)> = m.entries.iter().zip(&feats).collect();
    let report = evaluate_holdout(&model, &scaler, &pairs, condition)?;
    write_file(&out_dir.join("report.json"), &serde_json::to_vec_pretty(&report)?)?;
    Ok(report)
}
