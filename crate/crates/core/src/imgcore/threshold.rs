//! Global Otsu thresholding and a Sauvola local fallback.

use serde::{Deserialize, Serialize};

use super::image::{BinaryImage, GrayImage};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Polarity {
    #[default]
    InkDarker,
    InkLighter,
}

/// Threshold maximizing between-class variance over the 256-bin histogram.
///
/// Class 0 holds intensities `<= t`. Ties resolve to the smallest `t`.
pub fn otsu_threshold(img: &GrayImage) -> Result<u8> {
    otsu_from_histogram(&img.histogram())
}

pub fn otsu_from_histogram(hist: &[u64; 256]) -> Result<u8> {
    if hist.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(Error::DegenerateHistogram);
    }
    let total: u64 = hist.iter().sum();
    let sum_all: u64 = hist.iter().enumerate().map(|(v, &c)| v as u64 * c).sum();

    let mut best_t = 0u8;
    let mut best = f64::NEG_INFINITY;
    let (mut n0, mut s0) = (0u64, 0u64);
    for t in 0..255usize {
        n0 += hist[t];
        s0 += t as u64 * hist[t];
        let n1 = total - n0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        // N^2 * sigma_b^2 = (S0*N - S*n0)^2 / (n0*n1), computed from exact integers.
        let diff = s0 as i128 * total as i128 - sum_all as i128 * n0 as i128;
        let score = (diff as f64) * (diff as f64) / (n0 as f64 * n1 as f64);
        if score > best {
            best = score;
            best_t = t as u8;
        }
    }
    Ok(best_t)
}

/// Global Otsu binarization.
pub fn binarize(img: &GrayImage, polarity: Polarity) -> Result<BinaryImage> {
    let t = otsu_threshold(img)?;
    Ok(apply_threshold(img, t, polarity))
}

/// Like [`binarize`], but a single-intensity image is read as an empty page
/// rather than an error, so one blank scan does not abort a corpus run.
pub fn binarize_page(img: &GrayImage, polarity: Polarity) -> BinaryImage {
    match otsu_threshold(img) {
        Ok(t) => apply_threshold(img, t, polarity),
        Err(_) => BinaryImage::blank(img.width(), img.height()),
    }
}

/// Loads and binarizes one page image.
pub fn load_binary(path: &std::path::Path, polarity: Polarity) -> Result<BinaryImage> {
    Ok(binarize_page(&super::image::load_gray(path)?, polarity))
}

pub fn apply_threshold(img: &GrayImage, t: u8, polarity: Polarity) -> BinaryImage {
    let mask = img
        .data()
        .iter()
        .map(|&v| match polarity {
            Polarity::InkDarker => v <= t,
            Polarity::InkLighter => v > t,
        })
        .collect();
    BinaryImage::new(img.width(), img.height(), mask).expect("same dimensions")
}

/// Sauvola local threshold `T = m * (1 + k * (s / 128 - 1))` over a square window.
pub fn sauvola(img: &GrayImage, window: usize, k: f64, polarity: Polarity) -> BinaryImage {
    let (w, h) = (img.width(), img.height());
    let stride = w + 1;
    let mut sum = vec![0f64; stride * (h + 1)];
    let mut sq = vec![0f64; stride * (h + 1)];
    for y in 0..h {
        let (mut rs, mut rq) = (0f64, 0f64);
        for x in 0..w {
            let v = img.get(x, y) as f64;
            rs += v;
            rq += v * v;
            sum[(y + 1) * stride + x + 1] = sum[y * stride + x + 1] + rs;
            sq[(y + 1) * stride + x + 1] = sq[y * stride + x + 1] + rq;
        }
    }
    let half = (window / 2).max(1);
    let mut mask = Vec::with_capacity(w * h);
    for y in 0..h {
        let (y0, y1) = (y.saturating_sub(half), (y + half + 1).min(h));
        for x in 0..w {
            let (x0, x1) = (x.saturating_sub(half), (x + half + 1).min(w));
            let area = ((x1 - x0) * (y1 - y0)) as f64;
            let rect = |t: &[f64]| {
                t[y1 * stride + x1] - t[y0 * stride + x1] - t[y1 * stride + x0] + t[y0 * stride + x0]
            };
            let mean = rect(&sum) / area;
            let var = (rect(&sq) / area - mean * mean).max(0.0);
            let t = mean * (1.0 + k * (var.sqrt() / 128.0 - 1.0));
            let v = img.get(x, y) as f64;
            mask.push(match polarity {
                Polarity::InkDarker => v <= t,
                Polarity::InkLighter => v > t,
            });
        }
    }
    BinaryImage::new(w, h, mask).expect("same dimensions")
}
