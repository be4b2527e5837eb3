//! Multi-class cost-sensitive boosting with cost-sensitive trees.
//!
//! Start with a [`CostMatrix`], [`train`] an [`Ensemble`] on a [`Dataset`],
//! then predict with [`Ensemble::predict`]. The [`cascade`] module adds
//! detection scores and early-exit evaluation, [`eval`] adds metrics and
//! cross-validation, and [`data_io`] reads and writes CSV data and JSON models.

pub mod booster;
pub mod cascade;
pub mod cost_model;
pub mod data_io;
mod error;
pub mod eval;
mod label;
pub mod weak_learner;

pub use booster::{train, Ensemble, TrainParams, TrainReport};
pub use cost_model::{CostMatrix, ExtendedCostMatrix, LabelCodeSet, ModifiedCost};
pub use data_io::{Dataset, FeatureTable};
pub use error::{Error, Result};
pub use label::Label;
