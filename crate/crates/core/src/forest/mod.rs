//! Random-forest classification of geohash environments.

pub mod criterion;
mod ensemble;
mod eval;
pub mod tree;

pub use criterion::{criterion, Entropy, Gini, SplitCriterion, CRITERIA};
pub use ensemble::{
    default_grid, fit_forest, tally, Ensemble, ForestHyperparams, ForestModel, Prediction, MODEL_FORMAT, MODEL_VERSION,
};
pub use eval::{
    cross_validate, cross_validate_rows, loo_evaluate, loo_rows, metrics, stratified_folds, ClassMetrics,
    ConfusionMatrix, CvReport, CvScore, LooPrediction, LooReport, MetricsReport,
};
pub use tree::{best_split, majority, Split, TreeNode, DEPTH_CAP, MIN_DECREASE};
