//! Serialization: tensor files, manifests, splits and CSV reports.

mod manifest;
mod report;
mod split;
mod tensor;

pub use manifest::{load_manifest, write_manifest, Catalog, Manifest, ManifestEntry};
pub use report::{
    read_distance_csv, read_evaluation_csv, write_distance_csv, write_evaluation_csv, DistanceRow,
    EvaluationRow,
};
pub use split::{make_splits, permutation, SplitSpec, Splits};
pub use tensor::{read_tensor, write_tensor, Tensor, MAGIC};
