//! Kernel SVMs: SMO training, one-vs-rest multiclass with calibration, grid search.

mod kernel;
mod metrics;
mod multiclass;
mod platt;
mod search;
mod smo;

pub use kernel::{dot, kernel_eval, GramMatrix, KernelKind, KernelSpec};
pub use metrics::ConfusionMatrix;
pub use multiclass::{
    argmax_class, stratified_group_folds, train_multiclass, Machine, MulticlassModel, Sample, TrainConfig,
};
pub use platt::{fit_platt, platt_objective, platt_targets, Calibrator};
pub use search::{grid_search, BlockGrams, ConfigSummary, GammaGrid, GridResult, GridRow, GridSpec, SearchConfig};
pub use smo::{solve_dual, train_binary, BinarySvm, SmoConfig, SmoSolution};
