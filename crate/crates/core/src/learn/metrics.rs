//! Year-error metrics: mean absolute error and cumulative score.

use crate::error::{Error, Result};

fn check(preds: &[i32], truths: &[i32]) -> Result<()> {
    if preds.len() != truths.len() {
        return Err(Error::LengthMismatch(preds.len(), truths.len()));
    }
    if preds.is_empty() {
        return Err(Error::Empty("predictions"));
    }
    Ok(())
}

/// Mean absolute year error.
pub fn mae(preds: &[i32], truths: &[i32]) -> Result<f64> {
    check(preds, truths)?;
    let total: i64 = preds
        .iter()
        .zip(truths)
        .map(|(&p, &t)| (p as i64 - t as i64).abs())
        .sum();
    Ok(total as f64 / preds.len() as f64)
}

/// Percentage of predictions whose absolute error is at most `alpha` years.
pub fn cs(preds: &[i32], truths: &[i32], alpha: u32) -> Result<f64> {
    check(preds, truths)?;
    let hits = preds
        .iter()
        .zip(truths)
        .filter(|(&p, &t)| (p as i64 - t as i64).unsigned_abs() <= alpha as u64)
        .count();
    Ok(100.0 * hits as f64 / preds.len() as f64)
}

/// Mean and sample standard deviation (zero for fewer than two values).
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
