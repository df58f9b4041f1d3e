//! Elastic rubber-sheet augmentation.
//!
//! A field of i.i.d. uniform offsets is smoothed with a truncated Gaussian
//! (sigma = radius / 2, support ±radius) and rescaled so that the largest
//! displacement equals the requested amplitude. Images are then resampled
//! bilinearly through the field, clamping at the borders.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgcore::{self, GrayImage, Polarity};
use crate::manifest::{DatasetManifest, Sample};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MorphParams {
    pub smoothing_radius: usize,
    pub displacement: f64,
    pub seed: u64,
    pub copies: usize,
}

impl Default for MorphParams {
    fn default() -> Self {
        MorphParams {
            smoothing_radius: 8,
            displacement: 1.0,
            seed: 0,
            copies: 3,
        }
    }
}

impl MorphParams {
    pub fn validate(&self) -> Result<()> {
        if self.smoothing_radius < 1 {
            return Err(Error::InvalidParameter("smoothing_radius must be >= 1".into()));
        }
        if !(self.displacement >= 0.0 && self.displacement.is_finite()) {
            return Err(Error::InvalidParameter("displacement must be finite and >= 0".into()));
        }
        if self.copies < 1 {
            return Err(Error::InvalidParameter("copies must be >= 1".into()));
        }
        Ok(())
    }

    pub fn with_seed(self, seed: u64) -> Self {
        MorphParams { seed, ..self }
    }
}

/// Whether morphing happens on the grayscale page or on its binarization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MorphStage {
    #[default]
    PreBinarization,
    PostBinarization,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementField {
    pub width: usize,
    pub height: usize,
    pub dx: Vec<f64>,
    pub dy: Vec<f64>,
}

impl DisplacementField {
    pub fn max_magnitude(&self) -> f64 {
        self.dx
            .iter()
            .zip(&self.dy)
            .map(|(a, b)| a.hypot(*b))
            .fold(0.0, f64::max)
    }
}

fn gaussian_kernel(radius: usize) -> Vec<f64> {
    let sigma = radius as f64 / 2.0;
    let r = radius as isize;
    let k: Vec<f64> = (-r..=r)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = k.iter().sum();
    k.into_iter().map(|v| v / total).collect()
}

/// Separable 2-D convolution with edge replication.
fn smooth(values: &[f64], w: usize, h: usize, kernel: &[f64]) -> Vec<f64> {
    let r = (kernel.len() / 2) as isize;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, &c) in kernel.iter().enumerate() {
                let sx = (x as isize + k as isize - r).clamp(0, w as isize - 1) as usize;
                acc += c * values[y * w + sx];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, &c) in kernel.iter().enumerate() {
                let sy = (y as isize + k as isize - r).clamp(0, h as isize - 1) as usize;
                acc += c * tmp[sy * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

pub fn make_field(w: usize, h: usize, params: &MorphParams) -> DisplacementField {
    assert!(w >= 1 && h >= 1, "field needs a nonempty image");
    let n = w * h;
    if params.displacement == 0.0 {
        return DisplacementField {
            width: w,
            height: h,
            dx: vec![0.0; n],
            dy: vec![0.0; n],
        };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let raw_x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    let raw_y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    let kernel = gaussian_kernel(params.smoothing_radius);
    let mut field = DisplacementField {
        width: w,
        height: h,
        dx: smooth(&raw_x, w, h, &kernel),
        dy: smooth(&raw_y, w, h, &kernel),
    };
    let max = field.max_magnitude();
    if max > 0.0 {
        let scale = params.displacement / max;
        field.dx.iter_mut().for_each(|v| *v *= scale);
        field.dy.iter_mut().for_each(|v| *v *= scale);
    }
    field
}

/// Bilinear sample with coordinates clamped to the image.
#[inline]
fn sample(img: &GrayImage, x: f64, y: f64) -> f64 {
    let (w, h) = (img.width(), img.height());
    let x = x.clamp(0.0, (w - 1) as f64);
    let y = y.clamp(0.0, (h - 1) as f64);
    let (x0, y0) = (x.floor() as usize, y.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
    let (fx, fy) = (x - x0 as f64, y - y0 as f64);
    let top = img.get(x0, y0) as f64 * (1.0 - fx) + img.get(x1, y0) as f64 * fx;
    let bottom = img.get(x0, y1) as f64 * (1.0 - fx) + img.get(x1, y1) as f64 * fx;
    top * (1.0 - fy) + bottom * fy
}

pub fn apply_field(img: &GrayImage, field: &DisplacementField) -> GrayImage {
    let (w, h) = (img.width(), img.height());
    assert_eq!((w, h), (field.width, field.height), "field size mismatch");
    let mut out = GrayImage::filled(w, h, 0);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let v = sample(img, x as f64 + field.dx[i], y as f64 + field.dy[i]);
            out.set(x, y, v.round().clamp(0.0, 255.0) as u8);
        }
    }
    out
}

pub fn morph(img: &GrayImage, params: &MorphParams) -> GrayImage {
    let field = make_field(img.width(), img.height(), params);
    apply_field(img, &field)
}

/// Morphs the binarized page (ink 0, paper 255) and returns it as grayscale.
pub fn morph_binarized(img: &GrayImage, params: &MorphParams, polarity: Polarity) -> Result<GrayImage> {
    let bin = imgcore::binarize(img, polarity)?;
    Ok(morph(&bin.to_gray(), params))
}

/// 64-bit FNV-1a followed by a splitmix finalizer; stable across platforms and releases.
pub fn stable_hash(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h ^= h >> 30;
    h = h.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h ^= h >> 27;
    h = h.wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

/// Seed for copy `k` of sample `id`; depends on nothing else in the manifest.
pub fn derived_seed(base: u64, id: &str, k: usize) -> u64 {
    let mut bytes = id.as_bytes().to_vec();
    bytes.push(0);
    bytes.extend_from_slice(&(k as u64).to_le_bytes());
    base ^ stable_hash(&bytes)
}

pub fn augmented_id(id: &str, k: usize) -> String {
    format!("{id}.morph{k}")
}

/// `<dir>/<stem>.morph<k>.png` next to the source image.
pub fn augmented_path(source: &Path, k: usize) -> PathBuf {
    let stem = source
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    source.with_file_name(format!("{stem}.morph{k}.png"))
}

/// Manifest entries for the augmented copies of `src`, without touching any image.
pub fn plan_copies(src: &Sample, params: &MorphParams, dir: Option<&Path>) -> Vec<Sample> {
    (0..params.copies)
        .map(|k| {
            let mut path = augmented_path(&src.path, k);
            if let Some(dir) = dir {
                path = dir.join(path.file_name().expect("file name"));
            }
            Sample {
                id: augmented_id(&src.id, k),
                path,
                label_year: src.label_year,
                writer: src.writer.clone(),
                source_id: Some(src.id.clone()),
                seed: Some(derived_seed(params.seed, &src.id, k)),
            }
        })
        .collect()
}

/// Writes `copies` morphed variants of every non-augmented entry beside its image and
/// returns the merged manifest ordered by source, then copy index.
pub fn augment_batch(
    manifest: &DatasetManifest,
    params: &MorphParams,
    stage: MorphStage,
    polarity: Polarity,
) -> Result<DatasetManifest> {
    params.validate()?;
    let sources: Vec<&Sample> = manifest.sources().collect();
    let produced: Vec<Vec<Sample>> = sources
        .par_iter()
        .map(|src| -> Result<Vec<Sample>> {
            let img = imgcore::load_gray(&src.path).map_err(|e| e.for_sample(&src.id))?;
            let copies = plan_copies(src, params, None);
            for c in &copies {
                let p = params.with_seed(c.seed.expect("planned seed"));
                let out = match stage {
                    MorphStage::PreBinarization => morph(&img, &p),
                    MorphStage::PostBinarization => {
                        morph_binarized(&img, &p, polarity).map_err(|e| e.for_sample(&src.id))?
                    }
                };
                out.save_png(&c.path).map_err(|e| e.for_sample(&c.id))?;
            }
            Ok(copies)
        })
        .collect::<Result<_>>()?;
    let mut entries = Vec::with_capacity(sources.len() * (params.copies + 1));
    for (src, copies) in sources.into_iter().zip(produced) {
        entries.push(src.clone());
        entries.extend(copies);
    }
    DatasetManifest::new(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(displacement: f64, seed: u64) -> MorphParams {
        MorphParams {
            displacement,
            seed,
            ..MorphParams::default()
        }
    }

    #[test]
    fn zero_displacement_is_zero_field_and_identity() {
        let f = make_field(13, 7, &params(0.0, 3));
        assert!(f.dx.iter().chain(&f.dy).all(|&v| v == 0.0));
        let img = GrayImage::new(3, 2, vec![0, 50, 100, 150, 200, 250]).unwrap();
        assert_eq!(morph(&img, &params(0.0, 3)), img);
    }

    #[test]
    fn field_is_deterministic_and_capped() {
        let a = make_field(40, 30, &params(1.0, 11));
        let b = make_field(40, 30, &params(1.0, 11));
        assert_eq!(a, b);
        assert!((a.max_magnitude() - 1.0).abs() <= 1e-9);
        let c = make_field(40, 30, &params(2.5, 11));
        assert!((c.max_magnitude() - 2.5).abs() <= 1e-9);
        assert_ne!(make_field(40, 30, &params(1.0, 12)), a);
    }

    #[test]
    fn constant_image_unchanged() {
        let img = GrayImage::filled(20, 20, 137);
        assert_eq!(morph(&img, &params(1.0, 5)), img);
    }

    #[test]
    fn kernel_is_normalized() {
        let k = gaussian_kernel(8);
        assert_eq!(k.len(), 17);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(k[8] > k[0]);
    }

    #[test]
    fn copies_zero_rejected() {
        let p = MorphParams {
            copies: 0,
            ..MorphParams::default()
        };
        assert!(p.validate().is_err());
        assert!(MorphParams { smoothing_radius: 0, ..MorphParams::default() }.validate().is_err());
    }

    #[test]
    fn derived_seeds_are_distinct_and_stable() {
        let a = derived_seed(0, "s1", 0);
        assert_eq!(a, derived_seed(0, "s1", 0));
        assert_ne!(a, derived_seed(0, "s1", 1));
        assert_ne!(a, derived_seed(0, "s2", 0));
        assert_eq!(augmented_path(Path::new("/d/p.png"), 2), PathBuf::from("/d/p.morph2.png"));
    }

    fn write_sources(dir: &Path, n: usize) -> DatasetManifest {
        let entries = (0..n)
            .map(|i| {
                let mut img = GrayImage::filled(24, 24, 230);
                for x in 4..20 {
                    img.set(x, 6 + i % 10, 20);
                }
                let path = dir.join(format!("s{i}.png"));
                img.save_png(&path).unwrap();
                Sample {
                    id: format!("s{i}"),
                    path,
                    label_year: 1300 + 25 * (i as i32 % 3),
                    writer: None,
                    source_id: None,
                    seed: None,
                }
            })
            .collect();
        DatasetManifest::new(entries).unwrap()
    }

    #[test]
    fn batch_counts_and_provenance() {
        let dir = tempfile::tempdir().unwrap();
        let m = write_sources(dir.path(), 10);
        let out = augment_batch(&m, &MorphParams::default(), MorphStage::PreBinarization, Polarity::InkDarker).unwrap();
        assert_eq!(out.len(), 40);
        assert_eq!(out.entries.iter().filter(|e| e.is_augmented()).count(), 30);
        for e in out.entries.iter().filter(|e| e.is_augmented()) {
            let src = m.get(e.source_id.as_deref().unwrap()).expect("source exists");
            assert_eq!(src.label_year, e.label_year);
            assert!(e.path.exists());
        }
        assert_eq!(out.entries[1].id, "s0.morph0");
        assert_eq!(out.entries[4].id, "s1");
    }

    #[test]
    fn fifteen_copies_of_twenty_three() {
        let dir = tempfile::tempdir().unwrap();
        let m = write_sources(dir.path(), 23);
        let p = MorphParams {
            copies: 15,
            ..MorphParams::default()
        };
        let out = augment_batch(&m, &p, MorphStage::PostBinarization, Polarity::InkDarker).unwrap();
        assert_eq!(out.len(), 368);
    }

    #[test]
    fn unresolvable_image_names_sample() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = write_sources(dir.path(), 2);
        m.entries[1].path = dir.path().join("nope.png");
        let err = augment_batch(&m, &MorphParams::default(), MorphStage::PreBinarization, Polarity::InkDarker)
            .unwrap_err();
        assert!(err.to_string().contains("s1"), "{err}");
    }
}
