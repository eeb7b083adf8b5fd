//! Multi-model, multi-fold soft-voting ensembles for 8-class facial
//! expression recognition.
//!
//! Prediction sources (external prediction files, or the built-in
//! linear-softmax trainer) are fused with weighted probability averaging
//! inside each cross-validation fold, the per-fold ensembles are fused
//! again across folds, and the result is scored with macro-F1 over the
//! eight expression classes.

pub mod error;
pub mod focal;
pub mod folds;
pub mod fusion;
pub mod io;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod pipeline;
pub mod synthetic;
pub mod trainer;

pub use error::{Error, Result};
pub use focal::{focal_loss, focal_loss_batch, focal_loss_grad, FocalLossParams, LogitVector};
pub use folds::{fold_view, split_five_fold, FoldPlan};
pub use fusion::{
    fuse_across_folds, fuse_within_fold, preset, preset_catalog, search_weights, FusionPreset,
    FusionWeights, SearchOutcome, WeightGrid,
};
pub use metrics::{confusion, f1_per_class, macro_f1, ConfusionMatrix, EvalReport};
pub use model::{
    argmax_label, argmax_scores, validate_prediction_matrix, ExpressionClass, FramePrediction,
    LabeledSample, PredictionMatrix, ProbabilityVector, CLASS_COUNT,
};
pub use optim::{adam_step, cosine_lr, AdamHyper, AdamState};
pub use pipeline::{run_pipeline, RunConfig, SourceMode};
pub use synthetic::{generate_synthetic, SyntheticSpec};
pub use trainer::{predict, train, LinearSoftmaxModel, TrainConfig};
