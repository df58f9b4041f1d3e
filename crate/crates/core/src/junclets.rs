//! Junction descriptors: the distribution of ink run-lengths around each
//! skeleton junction, over a fixed fan of directions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::imgcore::{load_binary, skeletonize_with, BinaryImage, Polarity, SkeletonOptions};
use crate::manifest::DatasetManifest;

/// Number of ray directions.
pub const DIRECTIONS: usize = 120;

/// Ray marching increment, in pixels.
pub const RAY_STEP: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum JunctionCategory {
    L,
    T,
    X,
}

impl JunctionCategory {
    pub fn from_branches(branches: usize) -> Self {
        match branches {
            0..=2 => JunctionCategory::L,
            3 => JunctionCategory::T,
            _ => JunctionCategory::X,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JunctionDescriptor {
    /// L1-normalized ray lengths, direction `k` at angle 2πk/120 counter-clockwise from east.
    pub values: Vec<f64>,
    pub origin: (usize, usize),
    pub category: JunctionCategory,
}

/// Image and skeleton settings for descriptor extraction.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct JuncletConfig {
    pub polarity: Polarity,
    pub skeleton: SkeletonOptions,
}

/// Unit ray directions in image coordinates (y down). Only the first quadrant
/// is evaluated with trigonometry; the rest are exact quarter-turn rotations,
/// so a 4-fold symmetric shape yields an exactly 4-fold symmetric descriptor.
pub fn directions() -> [(f64, f64); DIRECTIONS] {
    let q = DIRECTIONS / 4;
    let mut out = [(0.0, 0.0); DIRECTIONS];
    for k in 0..q {
        let t = std::f64::consts::TAU * k as f64 / DIRECTIONS as f64;
        out[k] = (t.cos(), -t.sin());
    }
    for k in q..DIRECTIONS {
        let (dx, dy) = out[k - q];
        // a quarter turn counter-clockwise on screen: east -> north
        out[k] = (dy, -dx);
    }
    out
}

/// Bilinear ink membership at `anchor + offset`; `None` outside the image.
///
/// The sub-pixel arithmetic only ever sees the offset, so shifting the
/// anchor by whole pixels shifts the answer exactly, with no rounding drift.
#[inline]
fn ink_at(img: &BinaryImage, anchor: (i64, i64), offset: (f64, f64)) -> Option<bool> {
    let (ox, oy) = (offset.0.floor(), offset.1.floor());
    let (fx, fy) = (offset.0 - ox, offset.1 - oy);
    let (xi, yi) = (anchor.0 + ox as i64, anchor.1 + oy as i64);
    let (w, h) = (img.width() as i64, img.height() as i64);
    if xi < 0 || yi < 0 || xi >= w || yi >= h || (xi == w - 1 && fx > 0.0) || (yi == h - 1 && fy > 0.0) {
        return None;
    }
    let v = |dx: i64, dy: i64| if img.get_signed(xi + dx, yi + dy) { 1.0 } else { 0.0 };
    let m = (1.0 - fx) * (1.0 - fy) * v(0, 0)
        + fx * (1.0 - fy) * v(1, 0)
        + (1.0 - fx) * fy * v(0, 1)
        + fx * fy * v(1, 1);
    Some(m >= 0.5)
}

/// Distance from `origin` along `dir` to the first background sample, or to
/// the image border if the ray leaves the image while still in ink.
pub fn ray_length(img: &BinaryImage, origin: (f64, f64), dir: (f64, f64)) -> f64 {
    let anchor = (origin.0.floor(), origin.1.floor());
    ray_from(img, (anchor.0 as i64, anchor.1 as i64), (origin.0 - anchor.0, origin.1 - anchor.1), dir)
}

fn ray_from(img: &BinaryImage, anchor: (i64, i64), offset: (f64, f64), dir: (f64, f64)) -> f64 {
    let mut t = 0.0;
    loop {
        let next = t + RAY_STEP;
        match ink_at(img, anchor, (offset.0 + next * dir.0, offset.1 + next * dir.1)) {
            Some(true) => t = next,
            Some(false) => return next,
            None => return t,
        }
    }
}

const CENTER_ITERATIONS: usize = 8;

/// Sub-pixel centre of the ink around a junction pixel, as an offset from it.
///
/// A skeleton pixel sits up to half a pixel off the true crossing of
/// even-width strokes. Mean-shift over ink pixels within one pixel beyond the
/// inscribed radius moves the ray origin back onto the crossing, which keeps the
/// normalized descriptor stable under rescaling. Symmetric neighbourhoods
/// leave the pixel centre unchanged.
fn ink_center(img: &BinaryImage, px: (usize, usize), dirs: &[(f64, f64)]) -> (f64, f64) {
    let anchor = (px.0 as i64, px.1 as i64);
    let r = dirs
        .iter()
        .map(|&d| ray_from(img, anchor, (0.0, 0.0), d))
        .fold(f64::INFINITY, f64::min)
        .max(1.0)
        + 1.0;
    let reach = r.ceil() as i64 + 1;
    // offsets from the junction pixel
    let mut c: (f64, f64) = (0.0, 0.0);
    for _ in 0..CENTER_ITERATIONS {
        let (cx, cy) = (c.0.round() as i64, c.1.round() as i64);
        let (mut sx, mut sy, mut n) = (0i64, 0i64, 0i64);
        for y in cy - reach..=cy + reach {
            for x in cx - reach..=cx + reach {
                let (dx, dy) = (x as f64 - c.0, y as f64 - c.1);
                if dx * dx + dy * dy <= r * r && img.get_signed(anchor.0 + x, anchor.1 + y) {
                    sx += x;
                    sy += y;
                    n += 1;
                }
            }
        }
        if n == 0 {
            break;
        }
        // never wander off the crossing: stay within one pixel of the junction
        let next = (
            (sx as f64 / n as f64).clamp(-1.0, 1.0),
            (sy as f64 / n as f64).clamp(-1.0, 1.0),
        );
        if next == c {
            break;
        }
        c = next;
    }
    c
}

/// One descriptor per skeleton junction, in scan order of the junction origins.
pub fn extract_junctions(img: &BinaryImage) -> Vec<JunctionDescriptor> {
    extract_junctions_with(img, SkeletonOptions::default())
}

pub fn extract_junctions_with(img: &BinaryImage, opts: SkeletonOptions) -> Vec<JunctionDescriptor> {
    let skel = skeletonize_with(img, opts);
    let dirs = directions();
    let mut out: Vec<JunctionDescriptor> = skel
        .junctions
        .iter()
        .filter(|j| img.get(j.x, j.y))
        .filter_map(|j| {
            let origin = (j.x, j.y);
            let anchor = (j.x as i64, j.y as i64);
            let offset = ink_center(img, origin, &dirs);
            let lengths: Vec<f64> = dirs.iter().map(|&d| ray_from(img, anchor, offset, d)).collect();
            let total: f64 = lengths.iter().sum();
            (total > 0.0).then(|| JunctionDescriptor {
                values: lengths.iter().map(|l| l / total).collect(),
                origin,
                category: JunctionCategory::from_branches(j.branches),
            })
        })
        .collect();
    out.sort_by_key(|d| (d.origin.1, d.origin.0));
    out
}

/// Descriptors for every manifest entry, in manifest order.
pub fn descriptor_set(manifest: &DatasetManifest, cfg: &JuncletConfig) -> Result<Vec<Vec<JunctionDescriptor>>> {
    manifest
        .entries
        .par_iter()
        .map(|s| {
            let img = load_binary(&s.path, cfg.polarity).map_err(|e| e.for_sample(&s.id))?;
            Ok(extract_junctions_with(&img, cfg.skeleton))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plus(arm: usize, half_width: usize, scale: usize) -> BinaryImage {
        let c = arm + 2;
        let n = 2 * c + 1;
        let mut img = BinaryImage::blank(n, n);
        for y in 0..n {
            for x in 0..n {
                let horiz = y.abs_diff(c) <= half_width && x.abs_diff(c) <= arm;
                let vert = x.abs_diff(c) <= half_width && y.abs_diff(c) <= arm;
                if horiz || vert {
                    img.set(x, y, true);
                }
            }
        }
        img.upscale(scale)
    }

    #[test]
    fn directions_are_unit_and_rotate_exactly() {
        let d = directions();
        assert_eq!(d[0], (1.0, 0.0));
        assert_eq!(d[30], (0.0, -1.0));
        assert_eq!(d[60], (-1.0, 0.0));
        for (k, &(x, y)) in d.iter().enumerate() {
            assert!((x.hypot(y) - 1.0).abs() < 1e-12);
            let t = std::f64::consts::TAU * k as f64 / 120.0;
            assert!((x - t.cos()).abs() < 1e-12 && (y + t.sin()).abs() < 1e-12, "k={k}");
        }
    }

    #[test]
    fn plus_sign_is_four_fold_symmetric() {
        let img = plus(12, 1, 1);
        let ds = extract_junctions(&img);
        assert_eq!(ds.len(), 1);
        let d = &ds[0];
        assert_eq!(d.origin, (14, 14));
        assert_eq!(d.category, JunctionCategory::X);
        assert!((d.values.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        for k in 0..120 {
            assert!((d.values[k] - d.values[(k + 30) % 120]).abs() <= 1e-6, "k={k}");
        }
        // arms are longer than the bar is wide
        assert!(d.values[0] > d.values[15]);
    }

    #[test]
    fn doubled_plus_keeps_its_descriptor() {
        let a = extract_junctions(&plus(12, 1, 1));
        let b = extract_junctions(&plus(12, 1, 2));
        assert_eq!(b.len(), 1);
        let l1: f64 = a[0].values.iter().zip(&b[0].values).map(|(x, y)| (x - y).abs()).sum();
        assert!(l1 <= 0.05, "L1 {l1}");
    }

    #[test]
    fn blank_and_plain_strokes() {
        assert!(extract_junctions(&BinaryImage::blank(20, 20)).is_empty());
        let bar = BinaryImage::from_ascii(&["..........", ".########.", ".########.", ".........."]);
        assert!(extract_junctions(&bar).is_empty());
    }

    #[test]
    fn ray_stops_at_background_and_border() {
        let img = BinaryImage::from_ascii(&["#####....."]);
        // in ink up to x=4; bilinear membership drops below 0.5 past x=4.5
        assert_eq!(ray_length(&img, (0.0, 0.0), (1.0, 0.0)), 5.0);
        let full = BinaryImage::from_ascii(&["#####"]);
        assert_eq!(ray_length(&full, (0.0, 0.0), (1.0, 0.0)), 4.0);
        assert_eq!(ray_length(&full, (0.0, 0.0), (-1.0, 0.0)), 0.0);
    }

    #[test]
    fn center_moves_onto_even_width_crossings() {
        let img = plus(12, 1, 1);
        assert_eq!(ink_center(&img, (14, 14), &directions()), (0.0, 0.0));
        let big = plus(12, 1, 2);
        let c = ink_center(&big, (28, 28), &directions());
        assert!((c.0 - 0.5).abs() < 0.2 && (c.1 - 0.5).abs() < 0.2, "{c:?}");
    }

    #[test]
    fn far_shifts_leave_descriptors_bit_identical() {
        let small = plus(12, 1, 2);
        let mut canvas = BinaryImage::blank(400, 300);
        for y in 0..small.height() {
            for x in 0..small.width() {
                if small.get(x, y) {
                    canvas.set(x + 3, y + 3, true);
                }
            }
        }
        let key = |img: &BinaryImage| -> Vec<Vec<f64>> { extract_junctions(img).into_iter().map(|d| d.values).collect() };
        let base = key(&canvas);
        assert!(!base.is_empty());
        for (dx, dy) in [(1, 0), (117, 3), (301, 219), (64, 128)] {
            assert_eq!(key(&canvas.translate(dx, dy)), base, "shift ({dx},{dy})");
        }
    }

    #[test]
    fn categories() {
        assert_eq!(JunctionCategory::from_branches(2), JunctionCategory::L);
        assert_eq!(JunctionCategory::from_branches(3), JunctionCategory::T);
        assert_eq!(JunctionCategory::from_branches(5), JunctionCategory::X);
    }
}
