//! Deterministic pseudo-handwriting corpus.
//!
//! Pages are lines of letter-like glyphs built from polylines and quadratic
//! curves. Each class shifts the mean slant and the roundness of curved
//! strokes by a fixed step, and every writer adds a persistent random offset,
//! so style carries the class while individual pages still vary.

use std::f64::consts::TAU;
use std::path::Path;

use anyhow::{bail, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use scriptdate::augment::stable_hash;
use scriptdate::imgcore::GrayImage;
use scriptdate::manifest::{DatasetManifest, Sample};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub n_classes: usize,
    pub samples_per_class: usize,
    pub writers_per_class: usize,
    /// Glyphs per page.
    pub strokes_per_page: usize,
    pub base_year: i32,
    pub year_step: i32,
    /// Change of mean slant between consecutive classes, degrees.
    pub slant_drift: f64,
    /// Change of curve roundness between consecutive classes (0 = angular, 1 = round).
    pub curvature_drift: f64,
    /// Scale of per-writer and per-glyph style noise; 0 disables it.
    pub writer_jitter: f64,
    pub width: usize,
    pub height: usize,
    pub x_height: f64,
    pub pen_radius: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_classes: 5,
            samples_per_class: 40,
            writers_per_class: 8,
            strokes_per_page: 24,
            base_year: 1300,
            year_step: 25,
            slant_drift: 7.0,
            curvature_drift: 0.18,
            writer_jitter: 1.0,
            width: 240,
            height: 160,
            x_height: 16.0,
            pen_radius: 1.4,
            seed: 0,
        }
    }
}

/// Style of one writer: the class mean plus a persistent offset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WriterStyle {
    pub slant_deg: f64,
    pub roundness: f64,
    pub pen_radius: f64,
    pub width_scale: f64,
}

const MARGIN: f64 = 8.0;
const GLYPH_GAP: f64 = 5.0;
/// Ascenders and loops reach this far above the x-height line.
const ASCENDER: f64 = 0.7;

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_classes < 2 {
            bail!("n_classes must be >= 2, got {}", self.n_classes);
        }
        if self.samples_per_class == 0 || self.writers_per_class == 0 || self.strokes_per_page == 0 {
            bail!("samples_per_class, writers_per_class and strokes_per_page must be >= 1");
        }
        let finite = [
            self.slant_drift,
            self.curvature_drift,
            self.writer_jitter,
            self.x_height,
            self.pen_radius,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            bail!("drifts, jitter and sizes must be finite");
        }
        if self.x_height < 6.0 || self.pen_radius <= 0.0 {
            bail!("x_height must be >= 6 and pen_radius > 0");
        }
        let capacity = self.capacity();
        if capacity < self.strokes_per_page {
            bail!(
                "canvas {}x{} holds {capacity} glyphs, fewer than strokes_per_page = {}",
                self.width,
                self.height,
                self.strokes_per_page
            );
        }
        Ok(())
    }

    fn line_pitch(&self) -> f64 {
        self.x_height * (2.0 + 2.0 * ASCENDER)
    }

    fn glyph_pitch(&self) -> f64 {
        // widest glyph at the largest width scale, plus the slant overhang
        self.x_height * 1.1 + GLYPH_GAP
    }

    /// Glyph anchor points (left edge, baseline) in reading order.
    pub fn slots(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        let mut baseline = MARGIN + self.x_height * (1.0 + ASCENDER);
        while baseline + MARGIN <= self.height as f64 {
            let mut x = MARGIN + self.x_height * ASCENDER;
            while x + self.glyph_pitch() + MARGIN <= self.width as f64 {
                out.push((x, baseline));
                x += self.glyph_pitch();
            }
            baseline += self.line_pitch();
        }
        out
    }

    pub fn capacity(&self) -> usize {
        self.slots().len()
    }

    pub fn year(&self, class: usize) -> i32 {
        self.base_year + self.year_step * class as i32
    }

    fn class_style(&self, class: usize) -> (f64, f64) {
        let mid = (self.n_classes as f64 - 1.0) / 2.0;
        let slant = (class as f64 - mid) * self.slant_drift;
        let round = 0.5 + (class as f64 - mid) * self.curvature_drift;
        (slant, round)
    }

    pub fn writer_style(&self, class: usize, writer: usize) -> WriterStyle {
        let (slant, round) = self.class_style(class);
        let mut rng = rng_for(self.seed, &format!("writer/{class}/{writer}"));
        let j = self.writer_jitter;
        WriterStyle {
            slant_deg: slant + j * 2.0 * normal(&mut rng),
            roundness: (round + j * 0.05 * normal(&mut rng)).clamp(0.0, 1.2),
            pen_radius: (self.pen_radius * (1.0 + j * 0.08 * normal(&mut rng))).max(0.6),
            width_scale: 1.0 + j * 0.06 * normal(&mut rng),
        }
    }

    pub fn sample_id(class: usize, index: usize) -> String {
        format!("c{class}_s{index:03}")
    }
}

fn rng_for(seed: u64, key: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ stable_hash(key.as_bytes()))
}

/// Standard normal draw via Box–Muller.
fn normal(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
}

/// A glyph in unit coordinates: x in [0, 1], y up, baseline at 0, x-height at 1.
type Stroke = Vec<(f64, f64)>;

/// Quadratic curve from `a` to `b` whose control point sits `bulge` chord
/// lengths off the midpoint, to the left of the direction of travel (y up).
fn arc(a: (f64, f64), b: (f64, f64), bulge: f64) -> Stroke {
    let (mx, my) = ((a.0 + b.0) / 2.0, (a.1 + b.1) / 2.0);
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let c = (mx - dy * bulge, my + dx * bulge);
    (0..=12)
        .map(|i| {
            let t = i as f64 / 12.0;
            let u = 1.0 - t;
            (
                u * u * a.0 + 2.0 * u * t * c.0 + t * t * b.0,
                u * u * a.1 + 2.0 * u * t * c.1 + t * t * b.1,
            )
        })
        .collect()
}

/// Closed loop that morphs from a diamond (roundness 0) to an ellipse (roundness 1).
fn bowl(cx: f64, cy: f64, rx: f64, ry: f64, roundness: f64) -> Stroke {
    // superellipse |x|^p + |y|^p = 1 with p from 1 (diamond) to 2 (ellipse)
    let e = 2.0 / (1.0 + roundness.clamp(0.0, 1.0));
    (0..=32)
        .map(|i| {
            let t = TAU * i as f64 / 32.0;
            let (c, s) = (t.cos(), t.sin());
            (cx + rx * c.signum() * c.abs().powf(e), cy + ry * s.signum() * s.abs().powf(e))
        })
        .collect()
}

fn glyph(kind: usize, round: f64) -> Vec<Stroke> {
    let b = 0.15 + 0.35 * round;
    match kind {
        // o
        0 => vec![bowl(0.45, 0.5, 0.45, 0.5, round)],
        // l
        1 => vec![vec![(0.3, 1.0 + ASCENDER), (0.3, 0.0)], arc((0.3, 0.0), (0.7, 0.15), -b)],
        // n
        2 => vec![
            vec![(0.0, 1.0), (0.0, 0.0)],
            [arc((0.0, 0.6), (0.8, 0.6), b * 1.6), vec![(0.8, 0.6), (0.8, 0.0)]].concat(),
        ],
        // t
        3 => vec![
            vec![(0.35, 1.0 + ASCENDER * 0.6), (0.35, 0.0)],
            vec![(0.0, 1.0), (0.75, 1.0)],
        ],
        // x
        4 => vec![vec![(0.0, 1.0), (0.8, 0.0)], vec![(0.0, 0.0), (0.8, 1.0)]],
        // c
        5 => vec![arc((0.8, 0.85), (0.8, 0.15), -(1.2 + 0.9 * round))],
        // e
        6 => vec![
            vec![(0.05, 0.55), (0.8, 0.55)],
            [arc((0.8, 0.55), (0.05, 0.55), -(0.7 + 0.6 * round)), arc((0.05, 0.55), (0.8, 0.1), -(0.3 + 0.4 * round))]
                .concat(),
        ],
        // v
        7 => vec![[arc((0.0, 1.0), (0.4, 0.0), b * 0.6), arc((0.4, 0.0), (0.8, 1.0), b * 0.6)].concat()],
        // d: bowl with ascender stem
        _ => vec![
            bowl(0.35, 0.5, 0.35, 0.5, round),
            vec![(0.7, 1.0 + ASCENDER), (0.7, 0.0)],
        ],
    }
}

const GLYPH_KINDS: usize = 9;

/// Renders one page for `class` in the style of `writer`.
pub fn render_page(spec: &SyntheticSpec, class: usize, writer: usize, page_key: &str) -> GrayImage {
    let style = spec.writer_style(class, writer);
    let mut rng = rng_for(spec.seed, page_key);
    let mut canvas = Canvas::new(spec.width, spec.height, &mut rng);
    let xh = spec.x_height;
    let j = spec.writer_jitter;
    for &(x, baseline) in spec.slots().iter().take(spec.strokes_per_page) {
        let slant = (style.slant_deg + j * 1.5 * normal(&mut rng)).to_radians();
        let round = (style.roundness + j * 0.04 * normal(&mut rng)).clamp(0.0, 1.2);
        let size = xh * (1.0 + j * 0.05 * normal(&mut rng));
        let wscale = style.width_scale * (1.0 + j * 0.05 * normal(&mut rng));
        let dy = j * 0.8 * normal(&mut rng);
        let kind = rng.gen_range(0..GLYPH_KINDS);
        let shear = slant.tan();
        for stroke in glyph(kind, round) {
            let pts: Vec<(f64, f64)> = stroke
                .iter()
                .map(|&(u, v)| (x + u * size * wscale * 0.9 + shear * v * size, baseline + dy - v * size))
                .collect();
            canvas.polyline(&pts, style.pen_radius);
        }
    }
    canvas.finish()
}

/// Anti-aliased ink coverage accumulated over a noisy paper background.
struct Canvas {
    w: usize,
    h: usize,
    cover: Vec<f64>,
    paper: Vec<u8>,
}

const PAPER: f64 = 224.0;
const INK: f64 = 38.0;

impl Canvas {
    fn new(w: usize, h: usize, rng: &mut impl Rng) -> Self {
        let paper = (0..w * h).map(|_| (PAPER + rng.gen_range(-6.0..6.0)).round() as u8).collect();
        Canvas {
            w,
            h,
            cover: vec![0.0; w * h],
            paper,
        }
    }

    fn polyline(&mut self, pts: &[(f64, f64)], r: f64) {
        for seg in pts.windows(2) {
            self.segment(seg[0], seg[1], r);
        }
    }

    fn segment(&mut self, a: (f64, f64), b: (f64, f64), r: f64) {
        let pad = r + 1.0;
        let x0 = (a.0.min(b.0) - pad).floor().max(0.0) as usize;
        let y0 = (a.1.min(b.1) - pad).floor().max(0.0) as usize;
        let x1 = ((a.0.max(b.0) + pad).ceil().max(0.0) as usize).min(self.w.saturating_sub(1));
        let y1 = ((a.1.max(b.1) + pad).ceil().max(0.0) as usize).min(self.h.saturating_sub(1));
        let (dx, dy) = (b.0 - a.0, b.1 - a.1);
        let len2 = dx * dx + dy * dy;
        for y in y0..=y1 {
            for x in x0..=x1 {
                let (px, py) = (x as f64, y as f64);
                let t = if len2 > 0.0 {
                    (((px - a.0) * dx + (py - a.1) * dy) / len2).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                let d = (px - a.0 - t * dx).hypot(py - a.1 - t * dy);
                let c = (r + 0.5 - d).clamp(0.0, 1.0);
                let cell = &mut self.cover[y * self.w + x];
                if c > *cell {
                    *cell = c;
                }
            }
        }
    }

    fn finish(self) -> GrayImage {
        let data = self
            .paper
            .iter()
            .zip(&self.cover)
            .map(|(&p, &c)| (p as f64 * (1.0 - c) + INK * c).round() as u8)
            .collect();
        GrayImage::new(self.w, self.h, data).expect("canvas dimensions")
    }
}

/// Manifest entries of the corpus, in class order then sample order.
pub fn plan(spec: &SyntheticSpec, image_dir: &Path) -> Vec<(Sample, usize, usize)> {
    let mut out = Vec::with_capacity(spec.n_classes * spec.samples_per_class);
    for class in 0..spec.n_classes {
        for i in 0..spec.samples_per_class {
            let writer = i % spec.writers_per_class;
            let id = SyntheticSpec::sample_id(class, i);
            let sample = Sample {
                path: image_dir.join(format!("{id}.png")),
                id,
                label_year: spec.year(class),
                writer: Some(format!("c{class}_w{writer}")),
                source_id: None,
                seed: None,
            };
            out.push((sample, class, writer));
        }
    }
    out
}

/// Renders the corpus into `out_dir/images` and writes `out_dir/manifest.jsonl`.
pub fn generate(spec: &SyntheticSpec, out_dir: &Path) -> Result<DatasetManifest> {
    spec.validate()?;
    let image_dir = out_dir.join("images");
    std::fs::create_dir_all(&image_dir).with_context(|| format!("creating {}", image_dir.display()))?;
    let planned = plan(spec, &image_dir);
    planned
        .par_iter()
        .map(|(s, class, writer)| -> Result<()> {
            let img = render_page(spec, *class, *writer, &s.id);
            img.save_png(&s.path).with_context(|| format!("writing sample {}", s.id))?;
            Ok(())
        })
        .collect::<Result<Vec<()>>>()?;
    let manifest = DatasetManifest::new(planned.into_iter().map(|p| p.0).collect())?;
    manifest.save(&out_dir.join("manifest.jsonl"))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_spec_same_bytes() {
        let spec = SyntheticSpec {
            n_classes: 2,
            samples_per_class: 3,
            ..SyntheticSpec::default()
        };
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let ma = generate(&spec, a.path()).unwrap();
        generate(&spec, b.path()).unwrap();
        assert_eq!(ma.len(), 6);
        for s in &ma.entries {
            let name = s.path.file_name().unwrap();
            let x = std::fs::read(a.path().join("images").join(name)).unwrap();
            let y = std::fs::read(b.path().join("images").join(name)).unwrap();
            assert_eq!(x, y, "{}", s.id);
        }
        assert_eq!(
            std::fs::read(a.path().join("manifest.jsonl")).unwrap(),
            std::fs::read(b.path().join("manifest.jsonl")).unwrap()
        );
    }

    #[test]
    fn counts_and_labels() {
        let spec = SyntheticSpec::default();
        let p = plan(&spec, Path::new("img"));
        assert_eq!(p.len(), 200);
        assert_eq!(p[0].0.label_year, 1300);
        assert_eq!(p[199].0.label_year, 1400);
        assert!(p.iter().all(|s| !s.0.is_augmented()));
    }

    #[test]
    fn rejects_bad_specs() {
        let tiny = SyntheticSpec {
            width: 40,
            height: 30,
            ..SyntheticSpec::default()
        };
        assert!(tiny.validate().is_err());
        let one = SyntheticSpec {
            n_classes: 1,
            ..SyntheticSpec::default()
        };
        assert!(one.validate().is_err());
        assert!(SyntheticSpec::default().validate().is_ok());
    }

    #[test]
    fn pages_carry_ink() {
        let spec = SyntheticSpec::default();
        let img = render_page(&spec, 0, 0, "probe");
        let dark = img.data().iter().filter(|&&v| v < 128).count();
        let frac = dark as f64 / img.data().len() as f64;
        assert!(frac > 0.03 && frac < 0.5, "ink fraction {frac}");
    }
}
