//! LOWESS surrogate models with AOECV-driven hyperparameter selection.

pub mod gamma;
pub mod kernel;
pub mod lowess;

pub use kernel::KernelType;
pub use lowess::{
    aoecv_from_scores, default_lambda_grid, fit, fit_with, local_scale, prediction_score,
    FitOptions, LocalScale, LowessModel, ModelDiagnostics,
};
