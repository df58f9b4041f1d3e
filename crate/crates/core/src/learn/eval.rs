//! Final training on a whole training set and held-out evaluation.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::cv::{source_groups, StdGram};
use super::metrics::{cs, mae};
use super::scaler::{apply_scaler, fit_scaler, ScalerState};
use super::svm::{classes_of, primal_model, solve_ova, DcdOptions, LinearOvaModel};
use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::manifest::{DatasetManifest, Sample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Condition {
    NonAugmented,
    Augmented,
}

impl Condition {
    pub const BOTH: [Condition; 2] = [Condition::NonAugmented, Condition::Augmented];

    pub fn uses_augmented(self) -> bool {
        self == Condition::Augmented
    }

    pub fn name(self) -> &'static str {
        match self {
            Condition::NonAugmented => "non-augmented",
            Condition::Augmented => "augmented",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub truth: i32,
    pub predicted: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub condition: Condition,
    pub mae: f64,
    pub cs0: f64,
    pub cs25: f64,
    pub classes: Vec<i32>,
    /// `confusion[truth][predicted]`, indexed like `classes`.
    pub confusion: Vec<Vec<usize>>,
    pub predictions: Vec<Prediction>,
}

impl EvalReport {
    /// Fraction of correct predictions, in percent, from the confusion matrix.
    pub fn accuracy(&self) -> f64 {
        let total: usize = self.confusion.iter().flatten().sum();
        let hits: usize = (0..self.classes.len()).map(|i| self.confusion[i][i]).sum();
        100.0 * hits as f64 / total.max(1) as f64
    }
}

/// Fits the scaler and a one-vs-all model on every non-augmented entry of
/// `train`, plus their augmented descendants when `use_augmented` is set.
pub fn fit_final(
    train: &DatasetManifest,
    features: &[FeatureVector],
    c: f64,
    use_augmented: bool,
    opts: &DcdOptions,
) -> Result<(LinearOvaModel, ScalerState)> {
    if features.len() != train.len() {
        return Err(Error::LengthMismatch(features.len(), train.len()));
    }
    let (_, groups) = source_groups(train, use_augmented);
    let mut idx: Vec<usize> = groups.into_iter().flatten().collect();
    idx.sort_unstable();
    let vecs: Vec<&FeatureVector> = idx.iter().map(|&i| &features[i]).collect();
    let scaler = fit_scaler(&vecs)?;
    let labels: Vec<i32> = idx.iter().map(|&i| train.entries[i].label_year).collect();
    let classes = classes_of(&labels)?;
    let local: Vec<usize> = (0..idx.len()).collect();
    let k = StdGram::new(&vecs).square(&scaler, &local);
    let sols = solve_ova(&k, &labels, &classes, c, None, opts);
    let x: Vec<Vec<f64>> = vecs.iter().map(|v| apply_scaler(&v.values, &scaler)).collect();
    Ok((primal_model(&x, &labels, &classes, c, &sols), scaler))
}

/// Scores a model on held-out, non-augmented samples.
pub fn evaluate_holdout(
    model: &LinearOvaModel,
    scaler: &ScalerState,
    test: &[(&Sample, &FeatureVector)],
    condition: Condition,
) -> Result<EvalReport> {
    if test.is_empty() {
        return Err(Error::Empty("test set"));
    }
    if let Some((s, _)) = test.iter().find(|(s, _)| s.is_augmented()) {
        return Err(Error::AugmentedInTest(s.id.clone()));
    }
    let n = model.classes.len();
    let mut confusion = vec![vec![0; n]; n];
    let mut predictions = Vec::with_capacity(test.len());
    for (s, v) in test {
        if v.kind != scaler.kind {
            return Err(Error::InvalidParameter(format!(
                "{}: {} vector for a {} model",
                s.id, v.kind, scaler.kind
            )));
        }
        if v.dim() != model.dim() {
            return Err(Error::LengthMismatch(v.dim(), model.dim()).for_sample(&s.id));
        }
        let predicted = model.predict(&apply_scaler(&v.values, scaler));
        if let Some(t) = model.classes.iter().position(|&c| c == s.label_year) {
            let p = model.classes.iter().position(|&c| c == predicted).expect("model class");
            confusion[t][p] += 1;
        }
        predictions.push(Prediction {
            id: s.id.clone(),
            truth: s.label_year,
            predicted,
        });
    }
    let preds: Vec<i32> = predictions.iter().map(|p| p.predicted).collect();
    let truths: Vec<i32> = predictions.iter().map(|p| p.truth).collect();
    Ok(EvalReport {
        condition,
        mae: mae(&preds, &truths)?,
        cs0: cs(&preds, &truths, 0)?,
        cs25: cs(&preds, &truths, 25)?,
        classes: model.classes.clone(),
        confusion,
        predictions,
    })
}
