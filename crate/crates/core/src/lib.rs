//! Penalized multi-task cumulative link models for joint disease screening
//! and severity grading.
//!
//! A single ordinal outcome `Y in {0, ..., K}` is modelled by a logistic
//! screening model for `Y = 0` and a cumulative logit model for the severity
//! levels among `Y >= 1`. Fusion or group penalties couple the two coefficient
//! vectors; fitting uses ADMM.

pub mod admm;
pub mod baselines;
pub mod data;
pub mod error;
pub mod experiment;
pub mod likelihood;
pub mod metrics;
pub mod model;
pub mod params;
pub mod predict;
pub mod prox;
pub mod simgen;
pub mod smooth;
pub mod tuning;

pub use admm::{fit_auto, fit_fused, fit_group, fit_mle, objective_value, Structure};
pub use data::{OrdinalDataset, ScalingRecord};
pub use error::{MtclmError, Result};
pub use params::{AdmmSettings, FitResult, MtclmParams, PenaltyConfig};
pub use predict::{predict_class, predict_proba, predict_screen, CategoryProbabilities};
pub use smooth::SmoothSolveSettings;
