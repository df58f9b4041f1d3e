//! Min-max feature scaling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureKind, FeatureVector};

/// Scaling state fitted on a training set.
///
/// Each vector is first stretched over its own range, then mapped into the
/// target range. The training set's global value range is kept for reporting
/// and for checking that a vector came from the same feature kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalerState {
    pub kind: FeatureKind,
    pub min: f64,
    pub max: f64,
    pub target: (f64, f64),
}

pub fn fit_scaler(train: &[&FeatureVector]) -> Result<ScalerState> {
    let first = train.first().ok_or(Error::Empty("training vectors"))?;
    let kind = first.kind;
    let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in train {
        if v.kind != kind {
            return Err(Error::InvalidParameter(format!(
                "mixed feature kinds {kind} and {}",
                v.kind
            )));
        }
        for &x in &v.values {
            min = min.min(x);
            max = max.max(x);
        }
    }
    Ok(ScalerState {
        kind,
        min,
        max,
        target: (0.0, 1.0),
    })
}

/// Per-vector min-max stretch; a constant vector maps to zeros.
pub fn standardize(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    if !(range > 0.0) {
        return vec![0.0; values.len()];
    }
    values.iter().map(|&x| (x - lo) / range).collect()
}

pub fn apply_scaler(values: &[f64], s: &ScalerState) -> Vec<f64> {
    let (lo, hi) = s.target;
    let mut out = standardize(values);
    if (lo, hi) != (0.0, 1.0) {
        for x in &mut out {
            *x = *x * (hi - lo) + lo;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(values: Vec<f64>) -> FeatureVector {
        FeatureVector {
            kind: FeatureKind::Hinge,
            values,
            empty: false,
            skipped_contours: 0,
        }
    }

    #[test]
    fn examples() {
        assert_eq!(standardize(&[2.0, 3.0, 4.0]), vec![0.0, 0.5, 1.0]);
        assert_eq!(standardize(&[5.0, 5.0, 5.0]), vec![0.0, 0.0, 0.0]);
        let a = fv(vec![2.0, 3.0, 4.0]);
        let s = fit_scaler(&[&a, &fv(vec![0.0, 9.0, 1.0])]).unwrap();
        assert_eq!((s.min, s.max), (0.0, 9.0));
        assert_eq!(apply_scaler(&a.values, &s), vec![0.0, 0.5, 1.0]);
        let shifted = ScalerState { target: (-1.0, 1.0), ..s };
        assert_eq!(apply_scaler(&a.values, &shifted), vec![-1.0, 0.0, 1.0]);
    }

    #[test]
    fn rejects_empty_and_mixed() {
        assert!(fit_scaler(&[]).is_err());
        let mut b = fv(vec![1.0]);
        b.kind = FeatureKind::Tcc;
        assert!(fit_scaler(&[&fv(vec![1.0]), &b]).is_err());
    }
}
