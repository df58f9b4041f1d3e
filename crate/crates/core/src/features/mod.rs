//! Textural contour features. Every feature is a normalized histogram of
//! local measurements taken along traced contours.

mod hinge;
mod tcc;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgcore::{trace_contours_with, BinaryImage, Contour, TraceOptions};

pub use hinge::{cohinge, deltahinge, hinge, hinge_pair_index, quadhinge};
pub use tcc::{tcc, tcc_index};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FeatureKind {
    Hinge,
    CoHinge,
    QuadHinge,
    DeltaHinge,
    #[serde(rename = "TCC")]
    Tcc,
    Junclets,
    /// Raw 120-direction junction descriptors, before codebook encoding.
    #[serde(rename = "Junclets-raw")]
    JuncletsRaw,
}

impl FeatureKind {
    pub const TEXTURAL: [FeatureKind; 5] = [
        FeatureKind::Hinge,
        FeatureKind::CoHinge,
        FeatureKind::QuadHinge,
        FeatureKind::DeltaHinge,
        FeatureKind::Tcc,
    ];

    pub const ALL: [FeatureKind; 6] = [
        FeatureKind::Hinge,
        FeatureKind::CoHinge,
        FeatureKind::QuadHinge,
        FeatureKind::DeltaHinge,
        FeatureKind::Tcc,
        FeatureKind::Junclets,
    ];

    /// Fixed dimensionality under the default configuration, where one exists.
    pub fn default_dim(self) -> Option<usize> {
        HingeConfig::default().dim(self)
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::Hinge => "Hinge",
            FeatureKind::CoHinge => "CoHinge",
            FeatureKind::QuadHinge => "QuadHinge",
            FeatureKind::DeltaHinge => "DeltaHinge",
            FeatureKind::Tcc => "TCC",
            FeatureKind::Junclets => "Junclets",
            FeatureKind::JuncletsRaw => "Junclets-raw",
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let k = match s.to_ascii_lowercase().replace(['_', '-'], "").as_str() {
            "hinge" => FeatureKind::Hinge,
            "cohinge" => FeatureKind::CoHinge,
            "quadhinge" => FeatureKind::QuadHinge,
            "deltahinge" => FeatureKind::DeltaHinge,
            "tcc" => FeatureKind::Tcc,
            "junclets" => FeatureKind::Junclets,
            "juncletsraw" => FeatureKind::JuncletsRaw,
            _ => return Err(Error::InvalidParameter(format!("unknown feature kind {s:?}"))),
        };
        Ok(k)
    }
}

/// A normalized histogram. `empty` is the warning flag for inputs that produced no events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub kind: FeatureKind,
    pub values: Vec<f64>,
    pub empty: bool,
    /// Contours too short for the measurement span.
    #[serde(default)]
    pub skipped_contours: usize,
}

impl FeatureVector {
    pub fn zeros(kind: FeatureKind, dim: usize) -> Self {
        FeatureVector {
            kind,
            values: vec![0.0; dim],
            empty: true,
            skipped_contours: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HingeConfig {
    pub leg_length: usize,
    pub hinge_bins: usize,
    pub cohinge_bins: usize,
    pub cohinge_distance: usize,
    pub quad_orient_bins: usize,
    pub quad_curv_bins: usize,
    pub quad_scales: Vec<usize>,
    pub delta_step: usize,
    pub delta_bins: usize,
    pub tcc_distance: usize,
    pub include_holes: bool,
}

impl Default for HingeConfig {
    fn default() -> Self {
        HingeConfig {
            leg_length: 7,
            hinge_bins: 23,
            cohinge_bins: 10,
            cohinge_distance: 7,
            quad_orient_bins: 12,
            quad_curv_bins: 6,
            quad_scales: vec![5, 10, 15],
            delta_step: 1,
            delta_bins: 23,
            tcc_distance: 7,
            include_holes: true,
        }
    }
}

impl HingeConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            self.hinge_bins,
            self.cohinge_bins,
            self.cohinge_distance,
            self.quad_orient_bins,
            self.quad_curv_bins,
            self.delta_step,
            self.delta_bins,
            self.tcc_distance,
        ];
        if counts.contains(&0) || self.quad_scales.is_empty() || self.quad_scales.contains(&0) {
            return Err(Error::InvalidParameter("feature bin counts and distances must be >= 1".into()));
        }
        if self.leg_length < 2 {
            return Err(Error::InvalidParameter("leg_length must be >= 2".into()));
        }
        Ok(())
    }

    pub fn dim(&self, kind: FeatureKind) -> Option<usize> {
        Some(match kind {
            FeatureKind::Hinge => self.hinge_bins * (self.hinge_bins - 1) / 2,
            FeatureKind::CoHinge => self.cohinge_bins.pow(4),
            FeatureKind::QuadHinge => self.quad_orient_bins.pow(2) * self.quad_curv_bins.pow(2),
            FeatureKind::DeltaHinge => self.delta_bins.pow(2),
            FeatureKind::Tcc => 512,
            FeatureKind::JuncletsRaw => crate::junclets::DIRECTIONS,
            FeatureKind::Junclets => return None,
        })
    }
}

/// Contours of `img` as used by the textural features.
pub fn contours_for(img: &BinaryImage, cfg: &HingeConfig) -> Vec<Contour> {
    trace_contours_with(
        img,
        TraceOptions {
            include_holes: cfg.include_holes,
        },
    )
}

/// Computes one textural feature from a set of contours.
pub fn extract(kind: FeatureKind, contours: &[Contour], cfg: &HingeConfig) -> Result<FeatureVector> {
    cfg.validate()?;
    Ok(match kind {
        FeatureKind::Hinge => hinge(contours, cfg),
        FeatureKind::CoHinge => cohinge(contours, cfg),
        FeatureKind::QuadHinge => quadhinge(contours, cfg),
        FeatureKind::DeltaHinge => deltahinge(contours, cfg),
        FeatureKind::Tcc => tcc(contours, cfg),
        FeatureKind::Junclets | FeatureKind::JuncletsRaw => {
            return Err(Error::InvalidParameter(format!(
                "{kind} is not a contour feature"
            )))
        }
    })
}

pub fn extract_image(kind: FeatureKind, img: &BinaryImage, cfg: &HingeConfig) -> Result<FeatureVector> {
    extract(kind, &contours_for(img, cfg), cfg)
}

/// Integer bin counts; normalization happens once at the end so the result is
/// independent of accumulation order.
pub(crate) struct Histogram {
    kind: FeatureKind,
    counts: Vec<u64>,
    skipped: usize,
}

impl Histogram {
    pub(crate) fn new(kind: FeatureKind, dim: usize) -> Self {
        Histogram {
            kind,
            counts: vec![0; dim],
            skipped: 0,
        }
    }

    #[inline]
    pub(crate) fn add(&mut self, bin: usize) {
        self.counts[bin] += 1;
    }

    pub(crate) fn skip(&mut self) {
        self.skipped += 1;
    }

    pub(crate) fn finish(self) -> FeatureVector {
        let total: u64 = self.counts.iter().sum();
        let mut v = FeatureVector::zeros(self.kind, self.counts.len());
        v.skipped_contours = self.skipped;
        if total > 0 {
            let t = total as f64;
            v.values = self.counts.iter().map(|&c| c as f64 / t).collect();
            v.empty = false;
        }
        v
    }
}

/// Indices along a contour where a window reaching `back` steps behind and
/// `fwd` steps ahead fits. Closed contours wrap.
pub(crate) fn positions(c: &Contour, back: usize, fwd: usize) -> Option<std::ops::Range<isize>> {
    let n = c.len();
    if n < back + fwd + 1 || n < 2 {
        return None;
    }
    Some(if c.closed {
        0..n as isize
    } else {
        back as isize..(n - fwd) as isize
    })
}

/// Orientation of the vector from `p` to `q` in [0, 2π), counter-clockwise on screen.
#[inline]
pub(crate) fn orientation(p: (i32, i32), q: (i32, i32)) -> f64 {
    let a = (-(q.1 - p.1) as f64).atan2((q.0 - p.0) as f64);
    if a < 0.0 {
        a + std::f64::consts::TAU
    } else {
        a
    }
}

#[inline]
pub(crate) fn angle_bin(angle: f64, bins: usize) -> usize {
    ((angle / std::f64::consts::TAU * bins as f64) as usize).min(bins - 1)
}

#[cfg(test)]
pub(crate) mod test_shapes {
    use crate::imgcore::BinaryImage;

    /// Filled disc-stamped polyline on a blank canvas.
    pub fn stroke(w: usize, h: usize, pts: &[(f64, f64)], radius: f64) -> BinaryImage {
        let mut img = BinaryImage::blank(w, h);
        for seg in pts.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            let len = ((b.0 - a.0).hypot(b.1 - a.1)).max(1e-9);
            let steps = (len * 4.0).ceil() as usize;
            for s in 0..=steps {
                let t = s as f64 / steps as f64;
                let (cx, cy) = (a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1));
                let r = radius.ceil() as i64 + 1;
                for dy in -r..=r {
                    for dx in -r..=r {
                        let (x, y) = (cx.round() as i64 + dx, cy.round() as i64 + dy);
                        if x >= 0
                            && y >= 0
                            && (x as usize) < w
                            && (y as usize) < h
                            && (x as f64 - cx).hypot(y as f64 - cy) <= radius
                        {
                            img.set(x as usize, y as usize, true);
                        }
                    }
                }
            }
        }
        img
    }

    pub fn ellipse(cx: f64, cy: f64, rx: f64, ry: f64, rot: f64) -> Vec<(f64, f64)> {
        (0..=72)
            .map(|k| {
                let t = k as f64 / 72.0 * std::f64::consts::TAU;
                let (x, y) = (rx * t.cos(), ry * t.sin());
                (cx + x * rot.cos() - y * rot.sin(), cy + x * rot.sin() + y * rot.cos())
            })
            .collect()
    }
}
