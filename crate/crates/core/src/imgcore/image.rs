//! Grayscale and binary rasters plus PNG/PGM I/O.

use std::path::Path;

use image::{DynamicImage, ImageFormat};

use crate::error::{Error, Result};

/// Luma weights applied to RGB input.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// 8-bit grayscale raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(Error::InvalidDimensions { width, height });
        }
        Ok(GrayImage {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        assert!(width > 0 && height > 0, "empty image");
        GrayImage {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.data[y * self.width + x] = v;
    }

    pub fn histogram(&self) -> [u64; 256] {
        let mut hist = [0u64; 256];
        for &v in &self.data {
            hist[v as usize] += 1;
        }
        hist
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        save_luma(path, self.width, self.height, self.data.clone(), ImageFormat::Png)
    }

    /// Binary (P5) PGM.
    pub fn save_pgm(&self, path: &Path) -> Result<()> {
        let mut bytes = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        bytes.extend_from_slice(&self.data);
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }
}

/// Ink mask; `true` marks foreground.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryImage {
    width: usize,
    height: usize,
    mask: Vec<bool>,
}

impl BinaryImage {
    pub fn new(width: usize, height: usize, mask: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 || mask.len() != width * height {
            return Err(Error::InvalidDimensions { width, height });
        }
        Ok(BinaryImage {
            width,
            height,
            mask,
        })
    }

    pub fn blank(width: usize, height: usize) -> Self {
        assert!(width > 0 && height > 0, "empty image");
        BinaryImage {
            width,
            height,
            mask: vec![false; width * height],
        }
    }

    /// Parses rows of `#` (ink) and anything else (background). Handy in tests.
    pub fn from_ascii(rows: &[&str]) -> Self {
        let height = rows.len();
        let width = rows.iter().map(|r| r.len()).max().unwrap_or(0);
        let mut img = BinaryImage::blank(width.max(1), height.max(1));
        for (y, row) in rows.iter().enumerate() {
            for (x, c) in row.bytes().enumerate() {
                if c == b'#' {
                    img.set(x, y, true);
                }
            }
        }
        img
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.mask[y * self.width + x]
    }

    /// Out-of-range coordinates read as background.
    #[inline]
    pub fn get_signed(&self, x: i64, y: i64) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.mask[y as usize * self.width + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.mask[y * self.width + x] = v;
    }

    pub fn count_ink(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    /// Rotates a quarter turn counter-clockwise as seen on screen (y axis down).
    pub fn rotate90(&self) -> BinaryImage {
        let (w, h) = (self.width, self.height);
        let mut out = BinaryImage::blank(h, w);
        for y in 0..h {
            for x in 0..w {
                if self.get(x, y) {
                    out.set(y, w - 1 - x, true);
                }
            }
        }
        out
    }

    /// Shifts ink by (dx, dy) on a canvas of the same size; ink leaving the canvas is lost.
    pub fn translate(&self, dx: i64, dy: i64) -> BinaryImage {
        let mut out = BinaryImage::blank(self.width, self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                if !self.get(x, y) {
                    continue;
                }
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if nx >= 0 && ny >= 0 && (nx as usize) < self.width && (ny as usize) < self.height {
                    out.set(nx as usize, ny as usize, true);
                }
            }
        }
        out
    }

    /// Nearest-neighbour upscaling by an integer factor.
    pub fn upscale(&self, factor: usize) -> BinaryImage {
        assert!(factor >= 1);
        let mut out = BinaryImage::blank(self.width * factor, self.height * factor);
        for y in 0..out.height {
            for x in 0..out.width {
                out.mask[y * out.width + x] = self.get(x / factor, y / factor);
            }
        }
        out
    }

    /// Ink as 0, background as 255.
    pub fn to_gray(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            data: self.mask.iter().map(|&b| if b { 0 } else { 255 }).collect(),
        }
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        self.to_gray().save_png(path)
    }

    pub fn save_pgm(&self, path: &Path) -> Result<()> {
        self.to_gray().save_pgm(path)
    }
}

fn save_luma(path: &Path, w: usize, h: usize, data: Vec<u8>, format: ImageFormat) -> Result<()> {
    let buf = image::GrayImage::from_raw(w as u32, h as u32, data)
        .ok_or(Error::InvalidDimensions { width: w, height: h })?;
    buf.save_with_format(path, format)
        .map_err(|source| Error::ImageWrite {
            path: path.to_path_buf(),
            source,
        })
}

/// Reads a PNG or PGM file as grayscale. Colour input is reduced with [`LUMA_WEIGHTS`].
pub fn load_gray(path: &Path) -> Result<GrayImage> {
    let format = match path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .as_deref()
    {
        Some("png") => ImageFormat::Png,
        Some("pgm") | Some("pnm") | Some("ppm") => ImageFormat::Pnm,
        other => return Err(Error::UnsupportedFormat(other.unwrap_or("<none>").to_string())),
    };
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let img = image::load_from_memory_with_format(&bytes, format).map_err(|source| {
        Error::ImageRead {
            path: path.to_path_buf(),
            source,
        }
    })?;
    Ok(dynamic_to_gray(img))
}

pub(crate) fn dynamic_to_gray(img: DynamicImage) -> GrayImage {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = match img {
        DynamicImage::ImageLuma8(buf) => buf.into_raw(),
        DynamicImage::ImageLumaA8(buf) => buf.pixels().map(|p| p.0[0]).collect(),
        other => other
            .to_rgb8()
            .pixels()
            .map(|p| luma(p.0[0], p.0[1], p.0[2]))
            .collect(),
    };
    GrayImage {
        width: w,
        height: h,
        data,
    }
}

#[inline]
pub fn luma(r: u8, g: u8, b: u8) -> u8 {
    let v = LUMA_WEIGHTS[0] * r as f64 + LUMA_WEIGHTS[1] * g as f64 + LUMA_WEIGHTS[2] * b as f64;
    v.round().clamp(0.0, 255.0) as u8
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_read_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.pgm");
        let mut bytes = b"P5\n2 2\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 255, 0, 255]);
        std::fs::write(&path, bytes).unwrap();
        let img = load_gray(&path).unwrap();
        assert_eq!((img.width(), img.height()), (2, 2));
        assert_eq!(img.data(), &[0, 255, 0, 255]);
    }

    #[test]
    fn rgb_luma() {
        assert_eq!(luma(255, 255, 255), 255);
        assert_eq!(luma(255, 0, 0), 76);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.png");
        let buf = image::RgbImage::from_raw(2, 1, vec![255, 0, 0, 255, 255, 255]).unwrap();
        buf.save(&path).unwrap();
        assert_eq!(load_gray(&path).unwrap().data(), &[76, 255]);
    }

    #[test]
    fn png_and_pgm_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let img = GrayImage::new(3, 2, vec![1, 2, 3, 250, 251, 252]).unwrap();
        for name in ["a.png", "a.pgm"] {
            let p = dir.path().join(name);
            if name.ends_with("png") {
                img.save_png(&p).unwrap();
            } else {
                img.save_pgm(&p).unwrap();
            }
            assert_eq!(load_gray(&p).unwrap(), img);
        }
        let pgm = std::fs::read(dir.path().join("a.pgm")).unwrap();
        assert!(pgm.starts_with(b"P5"));
    }

    #[test]
    fn load_errors() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_gray(&dir.path().join("x.bmp")),
            Err(Error::UnsupportedFormat(_))
        ));
        assert!(matches!(load_gray(&dir.path().join("missing.png")), Err(Error::Io { .. })));
        let bad = dir.path().join("bad.png");
        std::fs::write(&bad, b"not a png").unwrap();
        assert!(matches!(load_gray(&bad), Err(Error::ImageRead { .. })));
    }

    #[test]
    fn rotate_four_times_is_identity() {
        let img = BinaryImage::from_ascii(&["#..", "##.", "..#", "...."]);
        let r = img.rotate90().rotate90().rotate90().rotate90();
        assert_eq!(r, img);
        // east of origin becomes north
        let p = BinaryImage::from_ascii(&["...", ".##", "..."]).rotate90();
        assert!(p.get(1, 1) && p.get(1, 0));
    }
}
