//! L2-regularized hinge-loss linear SVM solved by dual coordinate descent,
//! combined one-vs-all.
//!
//! The solver works on a precomputed Gram matrix with the bias folded in as a
//! constant feature (`K = x·x' + 1`), so cross-validation can reuse one matrix
//! across folds, classes and cost values.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DcdOptions {
    /// Stop once the duality gap falls to `tol * max(1, primal)`.
    pub tol: f64,
    pub max_passes: usize,
}

impl Default for DcdOptions {
    fn default() -> Self {
        DcdOptions {
            tol: 1e-4,
            max_passes: 1000,
        }
    }
}

/// Dense symmetric kernel matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Gram {
    n: usize,
    data: Vec<f64>,
}

impl Gram {
    /// Linear kernel plus one. Rows are treated as sparse, so long mostly-zero
    /// histograms stay cheap.
    pub fn linear(rows: &[Vec<f64>]) -> Gram {
        let n = rows.len();
        let sparse: Vec<Vec<(usize, f64)>> = rows
            .iter()
            .map(|r| r.iter().copied().enumerate().filter(|&(_, v)| v != 0.0).collect())
            .collect();
        let dim = rows.first().map_or(0, Vec::len);
        let upper: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map_init(
                || vec![0.0; dim],
                |buf, i| {
                    for &(k, v) in &sparse[i] {
                        buf[k] = v;
                    }
                    let row = (i..n)
                        .map(|j| 1.0 + sparse[j].iter().map(|&(k, v)| buf[k] * v).sum::<f64>())
                        .collect();
                    for &(k, _) in &sparse[i] {
                        buf[k] = 0.0;
                    }
                    row
                },
            )
            .collect();
        let mut data = vec![0.0; n * n];
        for (i, row) in upper.iter().enumerate() {
            for (off, &v) in row.iter().enumerate() {
                let j = i + off;
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        Gram { n, data }
    }

    /// Wraps an `n × n` row-major matrix.
    pub fn from_raw(n: usize, data: Vec<f64>) -> Gram {
        assert_eq!(data.len(), n * n, "gram data must be n x n");
        Gram { n, data }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// The principal submatrix on `idx`, in that order.
    pub fn subset(&self, idx: &[usize]) -> Gram {
        let n = idx.len();
        let mut data = Vec::with_capacity(n * n);
        for &i in idx {
            let row = self.row(i);
            data.extend(idx.iter().map(|&j| row[j]));
        }
        Gram { n, data }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    pub passes: usize,
    pub gap: f64,
}

/// Binary problem with labels `y ∈ {-1, +1}`. `warm` may seed the dual
/// variables from a solution at a smaller cost; it is clipped to `[0, c]`.
pub fn solve_dual(k: &Gram, y: &[f64], c: f64, warm: Option<&[f64]>, opts: &DcdOptions) -> DualSolution {
    let n = k.len();
    assert_eq!(y.len(), n);
    let mut alpha: Vec<f64> = match warm {
        Some(w) => w.iter().map(|&a| a.clamp(0.0, c)).collect(),
        None => vec![0.0; n],
    };
    // s[j] = sum_i alpha_i y_i K_ij, the current decision value of sample j
    let mut s = vec![0.0; n];
    for i in 0..n {
        if alpha[i] != 0.0 {
            let f = alpha[i] * y[i];
            for (sj, kij) in s.iter_mut().zip(k.row(i)) {
                *sj += f * kij;
            }
        }
    }
    let mut gap = f64::INFINITY;
    let mut passes = 0;
    while passes < opts.max_passes {
        passes += 1;
        for i in 0..n {
            let g = y[i] * s[i] - 1.0;
            let a = alpha[i];
            let pg = if a <= 0.0 {
                g.min(0.0)
            } else if a >= c {
                g.max(0.0)
            } else {
                g
            };
            if pg == 0.0 {
                continue;
            }
            let q = k.get(i, i);
            let na = (a - g / q).clamp(0.0, c);
            let d = (na - a) * y[i];
            if d == 0.0 {
                continue;
            }
            alpha[i] = na;
            for (sj, kij) in s.iter_mut().zip(k.row(i)) {
                *sj += d * kij;
            }
        }
        let w2: f64 = (0..n).map(|i| alpha[i] * y[i] * s[i]).sum();
        let loss: f64 = (0..n).map(|i| (1.0 - y[i] * s[i]).max(0.0)).sum();
        let primal = 0.5 * w2 + c * loss;
        let dual = alpha.iter().sum::<f64>() - 0.5 * w2;
        gap = primal - dual;
        if gap <= opts.tol * primal.abs().max(1.0) {
            break;
        }
    }
    DualSolution { alpha, passes, gap }
}

/// Distinct labels in ascending order; errors unless there are at least two.
pub fn classes_of(labels: &[i32]) -> Result<Vec<i32>> {
    let mut classes = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::SingleClass(classes.len()));
    }
    Ok(classes)
}

#[inline]
fn signs(labels: &[i32], class: i32) -> Vec<f64> {
    labels.iter().map(|&l| if l == class { 1.0 } else { -1.0 }).collect()
}

/// One dual solution per class (that class against the rest), optionally warm-started.
pub fn solve_ova(
    k: &Gram,
    labels: &[i32],
    classes: &[i32],
    c: f64,
    warm: Option<&[Vec<f64>]>,
    opts: &DcdOptions,
) -> Vec<DualSolution> {
    classes
        .iter()
        .enumerate()
        .map(|(ci, &class)| {
            let y = signs(labels, class);
            solve_dual(k, &y, c, warm.map(|w| w[ci].as_slice()), opts)
        })
        .collect()
}

/// Index of the largest value; ties go to the first.
#[inline]
pub fn argmax_first(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearOvaModel {
    pub classes: Vec<i32>,
    pub c: f64,
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    classes: Vec<i32>,
    c: f64,
    dim: usize,
}

impl LinearOvaModel {
    pub fn dim(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn decision(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(w, b)| w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + b)
            .collect()
    }

    /// Class with the largest decision value; ties go to the earliest year.
    pub fn predict(&self, x: &[f64]) -> i32 {
        self.classes[argmax_first(&self.decision(x))]
    }

    /// JSON header then, per class, `dim` weights followed by the bias.
    pub fn save(&self, path: &Path) -> Result<()> {
        let header = ModelHeader {
            classes: self.classes.clone(),
            c: self.c,
            dim: self.dim(),
        };
        let mut values = Vec::with_capacity(self.classes.len() * (self.dim() + 1));
        for (w, b) in self.weights.iter().zip(&self.bias) {
            values.extend_from_slice(w);
            values.push(*b);
        }
        let mut buf = Vec::new();
        store::write_record(&mut buf, &header, &values)?;
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&buf).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut recs = store::read_all::<ModelHeader>(path)?;
        if recs.len() != 1 {
            return Err(Error::Format(format!("{}: expected one model record", path.display())));
        }
        let (h, values) = recs.pop().expect("one record");
        let stride = h.dim + 1;
        if values.len() != stride * h.classes.len() {
            return Err(Error::LengthMismatch(values.len(), stride * h.classes.len()));
        }
        let (weights, bias) = values
            .chunks_exact(stride)
            .map(|ch| (ch[..h.dim].to_vec(), ch[h.dim]))
            .unzip();
        Ok(LinearOvaModel {
            classes: h.classes,
            c: h.c,
            weights,
            bias,
        })
    }
}

/// Trains a one-vs-all model on already-scaled vectors.
pub fn train_ova(x: &[Vec<f64>], labels: &[i32], c: f64, opts: &DcdOptions) -> Result<LinearOvaModel> {
    if x.len() != labels.len() {
        return Err(Error::LengthMismatch(x.len(), labels.len()));
    }
    if !(c > 0.0) {
        return Err(Error::InvalidParameter(format!("cost {c} must be positive")));
    }
    let classes = classes_of(labels)?;
    let dim = x[0].len();
    if let Some(r) = x.iter().find(|r| r.len() != dim) {
        return Err(Error::LengthMismatch(r.len(), dim));
    }
    let k = Gram::linear(x);
    let sols = solve_ova(&k, labels, &classes, c, None, opts);
    Ok(primal_model(x, labels, &classes, c, &sols))
}

/// Recovers explicit weights `w = Σ α y x` and bias `b = Σ α y` from dual solutions.
pub fn primal_model(
    x: &[Vec<f64>],
    labels: &[i32],
    classes: &[i32],
    c: f64,
    sols: &[DualSolution],
) -> LinearOvaModel {
    let dim = x.first().map_or(0, Vec::len);
    let mut weights = Vec::with_capacity(classes.len());
    let mut bias = Vec::with_capacity(classes.len());
    for (sol, &class) in sols.iter().zip(classes) {
        let mut w = vec![0.0; dim];
        let mut b = 0.0;
        for ((row, &l), &a) in x.iter().zip(labels).zip(&sol.alpha) {
            if a == 0.0 {
                continue;
            }
            let f = if l == class { a } else { -a };
            b += f;
            for (wk, xk) in w.iter_mut().zip(row) {
                *wk += f * xk;
            }
        }
        weights.push(w);
        bias.push(b);
    }
    LinearOvaModel {
        classes: classes.to_vec(),
        c,
        weights,
        bias,
    }
}
