//! Predicting classifier accuracy under distribution shift from confidence
//! and distribution-distance features.

pub mod confidence;
pub mod data;
pub mod distances;
pub mod error;
pub mod io;
pub mod learners;
pub mod matrix;
pub mod pipeline;
pub mod workbench;

pub use data::{accuracy, accuracy_gap, intersect_labels, predict_label, ClassId, Dataset, DatasetView, LabelSpace};
pub use error::{Error, Result};
pub use matrix::{Matrix, Standardizer};
