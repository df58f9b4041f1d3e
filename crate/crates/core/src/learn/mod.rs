//! Scaling, one-vs-all linear SVMs, cross-validated model selection and
//! year-error metrics.

mod cv;
mod eval;
mod metrics;
mod scaler;
mod svm;

pub use cv::{
    c_grid, cross_validate, leaked_ids, select_c, source_groups, stratified_folds, CvAggregate, CvConfig,
    CvResult, FoldMetrics, Split, DEFAULT_SEEDS, GRID_EXPONENTS,
};
pub use eval::{evaluate_holdout, fit_final, Condition, EvalReport, Prediction};
pub use metrics::{cs, mae, mean_sd};
pub use scaler::{apply_scaler, fit_scaler, standardize, ScalerState};
pub use svm::{
    argmax_first, classes_of, primal_model, solve_dual, solve_ova, train_ova, DcdOptions, DualSolution, Gram,
    LinearOvaModel,
};
