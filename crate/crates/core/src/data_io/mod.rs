//! Reading and writing datasets, cost matrices and models, plus seeding.

mod csv_io;
mod dataset;
mod model;
pub mod rng;

pub use csv_io::{
    cost_matrix_to_csv, load_csv, load_features, read_cost_matrix, write_cost_matrix, write_csv,
    LoadWarning,
};
pub use dataset::{Dataset, FeatureTable};
pub use model::{load_model, model_from_str, model_to_string, save_model, SavedModel, MODEL_VERSION};
