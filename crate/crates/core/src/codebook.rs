//! Self-organizing maps, the temporally chained SOM codebook, and
//! nearest-node histogram encoding.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureKind, FeatureVector};
use crate::store;

/// Sub-codebook sizes tried by the size sweep (square grids of side 5..30).
pub const SIZE_CANDIDATES: [usize; 6] = [25, 100, 225, 400, 625, 900];

/// Neighbourhood weights below this are treated as zero.
const NEGLIGIBLE: f64 = 1e-4;

/// Salt separating the initialization stream from the shuffling stream.
const INIT_SALT: u64 = 0x5f0_1417;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SomParams {
    pub epochs: usize,
    pub alpha0: f64,
    /// Initial Gaussian neighbourhood width in grid units; `None` means half the larger grid side.
    pub sigma_start: Option<f64>,
    pub sigma_end: f64,
    pub seed: u64,
}

impl Default for SomParams {
    fn default() -> Self {
        SomParams {
            epochs: 500,
            alpha0: 0.99,
            sigma_start: None,
            sigma_end: 0.25,
            seed: 0,
        }
    }
}

impl SomParams {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidParameter("epochs must be >= 1".into()));
        }
        if !(self.alpha0 > 0.0 && self.alpha0 < 1.0) {
            return Err(Error::InvalidParameter(format!("alpha0 {} outside (0, 1)", self.alpha0)));
        }
        if !(self.sigma_end > 0.0) || self.sigma_start.is_some_and(|s| !(s > 0.0)) {
            return Err(Error::InvalidParameter("neighbourhood widths must be positive".into()));
        }
        Ok(())
    }

    /// Linearly decaying learning rate; zero at `epoch == epochs`.
    pub fn learning_rate(&self, epoch: usize) -> f64 {
        self.alpha0 * (1.0 - epoch as f64 / self.epochs as f64)
    }

    /// Neighbourhood width, linear from the start width at epoch 0 to `sigma_end` at the last epoch.
    pub fn radius(&self, epoch: usize, rows: usize, cols: usize) -> f64 {
        let start = self
            .sigma_start
            .unwrap_or(rows.max(cols) as f64 / 2.0)
            .max(self.sigma_end);
        if self.epochs <= 1 {
            return start;
        }
        let t = epoch as f64 / (self.epochs - 1) as f64;
        start + (self.sigma_end - start) * t
    }
}

/// A `rows × cols` map of `dim`-dimensional nodes, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SomGrid {
    pub rows: usize,
    pub cols: usize,
    pub dim: usize,
    pub key_year: i32,
    pub weights: Vec<f64>,
}

impl SomGrid {
    pub fn new(rows: usize, cols: usize, dim: usize, key_year: i32, weights: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || dim == 0 {
            return Err(Error::InvalidDimensions { width: cols, height: rows });
        }
        if weights.len() != rows * cols * dim {
            return Err(Error::LengthMismatch(weights.len(), rows * cols * dim));
        }
        Ok(SomGrid {
            rows,
            cols,
            dim,
            key_year,
            weights,
        })
    }

    /// Square grid with roughly `size` nodes.
    pub fn side_for(size: usize) -> usize {
        ((size as f64).sqrt().round() as usize).max(1)
    }

    /// Nodes drawn uniformly within the per-dimension range of `patterns`.
    pub fn random(
        rows: usize,
        cols: usize,
        patterns: &[Vec<f64>],
        key_year: i32,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let dim = check_patterns(patterns)?;
        let mut lo = patterns[0].clone();
        let mut hi = patterns[0].clone();
        for p in patterns {
            for d in 0..dim {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        let mut weights = Vec::with_capacity(rows * cols * dim);
        for _ in 0..rows * cols {
            for d in 0..dim {
                let u: f64 = rng.gen();
                weights.push(lo[d] + u * (hi[d] - lo[d]));
            }
        }
        SomGrid::new(rows, cols, dim, key_year, weights)
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.weights[i * self.dim..(i + 1) * self.dim]
    }

    /// Best-matching unit and its squared distance; ties go to the lowest index.
    pub fn bmu(&self, x: &[f64]) -> (usize, f64) {
        nearest(&self.weights, self.dim, x)
    }

    /// Mean Euclidean distance from each pattern to its best-matching unit.
    pub fn quantization_error(&self, patterns: &[Vec<f64>]) -> f64 {
        let total: f64 = patterns.iter().map(|p| self.bmu(p).1.sqrt()).sum();
        total / patterns.len().max(1) as f64
    }
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(weights: &[f64], dim: usize, x: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, w) in weights.chunks_exact(dim).enumerate() {
        let d = sq_dist(w, x);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn check_patterns(patterns: &[Vec<f64>]) -> Result<usize> {
    let first = patterns.first().ok_or(Error::Empty("training patterns"))?;
    let dim = first.len();
    if let Some(p) = patterns.iter().find(|p| p.len() != dim) {
        return Err(Error::LengthMismatch(p.len(), dim));
    }
    Ok(dim)
}

/// Online SOM training: each epoch visits the patterns in a freshly shuffled order.
pub fn train_som(mut grid: SomGrid, patterns: &[Vec<f64>], params: &SomParams) -> Result<SomGrid> {
    params.validate()?;
    let dim = check_patterns(patterns)?;
    if dim != grid.dim {
        return Err(Error::LengthMismatch(dim, grid.dim));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut order: Vec<usize> = (0..patterns.len()).collect();
    let (rows, cols) = (grid.rows, grid.cols);
    for epoch in 0..params.epochs {
        order.shuffle(&mut rng);
        let alpha = params.learning_rate(epoch);
        let sigma = params.radius(epoch, rows, cols);
        let two_s2 = 2.0 * sigma * sigma;
        // grid distance beyond which the neighbourhood weight is negligible
        let reach = (two_s2 * (1.0 / NEGLIGIBLE).ln()).sqrt();
        let span = reach.floor() as isize;
        for &pi in &order {
            let x = &patterns[pi];
            let (b, _) = grid.bmu(x);
            let (br, bc) = ((b / cols) as isize, (b % cols) as isize);
            for r in (br - span).max(0)..=(br + span).min(rows as isize - 1) {
                for c in (bc - span).max(0)..=(bc + span).min(cols as isize - 1) {
                    let d2 = ((r - br) * (r - br) + (c - bc) * (c - bc)) as f64;
                    let h = (-d2 / two_s2).exp();
                    if h < NEGLIGIBLE {
                        continue;
                    }
                    let rate = alpha * h;
                    let i = r as usize * cols + c as usize;
                    let w = &mut grid.weights[i * dim..(i + 1) * dim];
                    for (wk, xk) in w.iter_mut().zip(x) {
                        *wk += rate * (xk - *wk);
                    }
                }
            }
        }
    }
    Ok(grid)
}

/// Concatenated per-year sub-codebooks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    pub subs: Vec<SomGrid>,
}

impl Codebook {
    pub fn new(subs: Vec<SomGrid>) -> Result<Self> {
        if subs.is_empty() {
            return Err(Error::Empty("codebook"));
        }
        let dim = subs[0].dim;
        for w in subs.windows(2) {
            if w[1].key_year <= w[0].key_year {
                return Err(Error::InvalidParameter("key years must be strictly ascending".into()));
            }
        }
        if let Some(s) = subs.iter().find(|s| s.dim != dim) {
            return Err(Error::LengthMismatch(s.dim, dim));
        }
        Ok(Codebook { subs })
    }

    pub fn total_size(&self) -> usize {
        self.subs.iter().map(SomGrid::len).sum()
    }

    pub fn dim(&self) -> usize {
        self.subs[0].dim
    }

    pub fn years(&self) -> Vec<i32> {
        self.subs.iter().map(|s| s.key_year).collect()
    }

    /// Global index of the nearest node across all sub-codebooks; ties to the lowest index.
    pub fn nearest(&self, x: &[f64]) -> usize {
        let mut best = (0, f64::INFINITY);
        let mut offset = 0;
        for s in &self.subs {
            let (i, d) = s.bmu(x);
            if d < best.1 {
                best = (offset + i, d);
            }
            offset += s.len();
        }
        best.0
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        let header = CodebookHeader {
            years: self.years(),
            rows: self.subs[0].rows,
            cols: self.subs[0].cols,
            dim: self.dim(),
        };
        let weights: Vec<f64> = self.subs.iter().flat_map(|s| s.weights.iter().copied()).collect();
        store::write_record(&mut buf, &header, &weights)?;
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&buf).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut recs = store::read_all::<CodebookHeader>(path)?;
        if recs.len() != 1 {
            return Err(Error::Format(format!("{}: expected one codebook record", path.display())));
        }
        let (h, weights) = recs.pop().expect("one record");
        let per = h.rows * h.cols * h.dim;
        if weights.len() != per * h.years.len() {
            return Err(Error::LengthMismatch(weights.len(), per * h.years.len()));
        }
        let subs = h
            .years
            .iter()
            .zip(weights.chunks_exact(per.max(1)))
            .map(|(&y, w)| SomGrid::new(h.rows, h.cols, h.dim, y, w.to_vec()))
            .collect::<Result<Vec<_>>>()?;
        Codebook::new(subs)
    }
}

#[derive(Serialize, Deserialize)]
struct CodebookHeader {
    years: Vec<i32>,
    rows: usize,
    cols: usize,
    dim: usize,
}

/// Chained per-year training: the first map starts random, each later one
/// starts from its trained predecessor. Years are processed in ascending order.
pub fn train_sotm(
    patterns_by_year: &BTreeMap<i32, Vec<Vec<f64>>>,
    sub_size: usize,
    params: &SomParams,
) -> Result<Codebook> {
    params.validate()?;
    if patterns_by_year.is_empty() {
        return Err(Error::Empty("key years"));
    }
    if let Some((&y, _)) = patterns_by_year.iter().find(|(_, p)| p.is_empty()) {
        return Err(Error::MissingYear(y));
    }
    let side = SomGrid::side_for(sub_size);
    let mut subs: Vec<SomGrid> = Vec::with_capacity(patterns_by_year.len());
    for (t, (&year, patterns)) in patterns_by_year.iter().enumerate() {
        let init = match subs.last() {
            None => {
                let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ INIT_SALT);
                SomGrid::random(side, side, patterns, year, &mut rng)?
            }
            Some(prev) => SomGrid {
                key_year: year,
                ..prev.clone()
            },
        };
        let p = SomParams {
            seed: params.seed.wrapping_add(t as u64),
            ..params.clone()
        };
        subs.push(train_som(init, patterns, &p).map_err(|e| match e {
            Error::Empty(_) => Error::MissingYear(year),
            other => other,
        })?);
    }
    Codebook::new(subs)
}

/// Random initial map for a single-year SOM, drawn exactly as [`train_sotm`] draws its first map.
pub fn initial_grid(patterns: &[Vec<f64>], sub_size: usize, key_year: i32, seed: u64) -> Result<SomGrid> {
    let side = SomGrid::side_for(sub_size);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ INIT_SALT);
    SomGrid::random(side, side, patterns, key_year, &mut rng)
}

/// Normalized nearest-node usage histogram of one document's descriptors.
pub fn encode(descriptors: &[Vec<f64>], cb: &Codebook) -> FeatureVector {
    let mut counts = vec![0u64; cb.total_size()];
    for d in descriptors {
        counts[cb.nearest(d)] += 1;
    }
    let total: u64 = counts.iter().sum();
    let mut v = FeatureVector::zeros(FeatureKind::Junclets, counts.len());
    if total > 0 {
        v.values = counts.iter().map(|&c| c as f64 / total as f64).collect();
        v.empty = false;
    }
    v
}
