//! JSON manifests listing datasets and their tensor files.
//!
//! ```json
//! {
//!   "entries": [
//!     {
//!       "name": "base",
//!       "group": "base",
//!       "probabilities": "base.probs.bin",
//!       "labels": "base.labels.bin",
//!       "features": "base.features.bin",
//!       "rotated_features": ["base.rot0.bin", "base.rot1.bin", "base.rot2.bin", "base.rot3.bin"],
//!       "class_ids": [0, 1, 2],
//!       "prob_class_ids": [0, 1, 2]
//!     }
//!   ]
//! }
//! ```
//!
//! `class_ids` is the label space the dataset was sampled from.
//! `prob_class_ids` names the probability columns and defaults to
//! `class_ids`. `labels`, `features` and `rotated_features` are optional.
//! Relative paths resolve against the manifest's directory.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::tensor::{read_tensor, write_tensor, Tensor};
use crate::data::{ClassId, Dataset, LabelSpace};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub group: String,
    pub probabilities: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotated_features: Option<Vec<PathBuf>>,
    pub class_ids: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prob_class_ids: Option<Vec<u64>>,
}

/// Loaded datasets with their group tags.
#[derive(Debug, Clone, Default)]
pub struct Catalog {
    entries: BTreeMap<String, (String, Dataset)>,
}

impl Catalog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, group: impl Into<String>, dataset: Dataset) -> Result<()> {
        let name = dataset.name().to_string();
        if self.entries.contains_key(&name) {
            return Err(Error::Manifest(format!("duplicate dataset name `{name}`")));
        }
        self.entries.insert(name, (group.into(), dataset));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Dataset> {
        self.entries
            .get(name)
            .map(|(_, d)| d)
            .ok_or_else(|| Error::InvalidArgument(format!("no dataset named `{name}` in manifest")))
    }

    pub fn group_of(&self, name: &str) -> Option<&str> {
        self.entries.get(name).map(|(g, _)| g.as_str())
    }

    /// Datasets whose tag is in `groups`, sorted by name.
    pub fn in_groups<'a>(&'a self, groups: &'a [String]) -> impl Iterator<Item = (&'a str, &'a Dataset)> + 'a {
        self.entries
            .values()
            .filter(move |(g, _)| groups.iter().any(|t| t == g))
            .map(|(g, d)| (g.as_str(), d))
    }

    /// All (group, dataset) pairs sorted by name.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &Dataset)> {
        self.entries.values().map(|(g, d)| (g.as_str(), d))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn label_space(ids: &[u64], entry: &str) -> Result<LabelSpace> {
    LabelSpace::new(ids.iter().copied().map(ClassId).collect())
        .map_err(|e| Error::Manifest(format!("entry `{entry}`: {e}")))
}

fn load_entry(entry: &ManifestEntry, dir: &Path) -> Result<Dataset> {
    let resolve = |p: &Path| dir.join(p);
    let classes = label_space(&entry.class_ids, &entry.name)?;
    let prob_classes = match &entry.prob_class_ids {
        Some(ids) => label_space(ids, &entry.name)?,
        None => classes.clone(),
    };

    let path = resolve(&entry.probabilities);
    let probs = read_tensor(&path)?.into_matrix(&path)?;
    let mut ds = Dataset::new(entry.name.clone(), probs, prob_classes)?.with_label_space(classes)?;
    if let Some(p) = &entry.labels {
        let path = resolve(p);
        ds = ds.with_labels(read_tensor(&path)?.into_labels(&path)?)?;
    }
    if let Some(p) = &entry.features {
        let path = resolve(p);
        ds = ds.with_features(read_tensor(&path)?.into_matrix(&path)?)?;
    }
    if let Some(paths) = &entry.rotated_features {
        let mats = paths
            .iter()
            .map(|p| {
                let path = resolve(p);
                read_tensor(&path)?.into_matrix(&path)
            })
            .collect::<Result<Vec<_>>>()?;
        ds = ds.with_rotated_features(mats)?;
    }
    Ok(ds)
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Catalog> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut seen = HashSet::new();
    let mut catalog = Catalog::new();
    for entry in &manifest.entries {
        if !seen.insert(entry.name.as_str()) {
            return Err(Error::Manifest(format!("duplicate dataset name `{}`", entry.name)));
        }
        catalog.insert(entry.group.clone(), load_entry(entry, dir)?)?;
    }
    Ok(catalog)
}

fn check_file_stem(name: &str) -> Result<()> {
    let ok = !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
        && !name.starts_with('.');
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "dataset name `{name}` is not usable as a file name"
        )))
    }
}

/// Writes every dataset's tensors plus `manifest.json` into `dir`, in the
/// given order. Returns the manifest path.
pub fn write_manifest<'a>(
    dir: impl AsRef<Path>,
    entries: impl IntoIterator<Item = (&'a str, &'a Dataset)>,
) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut manifest = Manifest { entries: vec![] };
    for (group, ds) in entries {
        let name = ds.name();
        check_file_stem(name)?;
        let file = |suffix: &str| PathBuf::from(format!("{name}.{suffix}.bin"));

        let probabilities = file("probs");
        write_tensor(dir.join(&probabilities), &Tensor::from_matrix(ds.probabilities()))?;
        let labels = match ds.labels() {
            Some(l) => {
                let p = file("labels");
                write_tensor(dir.join(&p), &Tensor::from_labels(l))?;
                Some(p)
            }
            None => None,
        };
        let features = match ds.features() {
            Some(f) => {
                let p = file("features");
                write_tensor(dir.join(&p), &Tensor::from_matrix(f))?;
                Some(p)
            }
            None => None,
        };
        let rotated_features = match ds.rotated_features() {
            Some(mats) => {
                let mut paths = Vec::with_capacity(4);
                for (r, m) in mats.iter().enumerate() {
                    let p = file(&format!("rot{r}"));
                    write_tensor(dir.join(&p), &Tensor::from_matrix(m))?;
                    paths.push(p);
                }
                Some(paths)
            }
            None => None,
        };
        let ids = |ls: &LabelSpace| ls.ids().iter().map(|c| c.0).collect::<Vec<_>>();
        let class_ids = ids(ds.label_space());
        let prob_ids = ids(ds.prob_classes());
        manifest.entries.push(ManifestEntry {
            name: name.to_string(),
            group: group.to_string(),
            probabilities,
            labels,
            features,
            rotated_features,
            prob_class_ids: (prob_ids != class_ids).then_some(prob_ids),
            class_ids,
        });
    }
    let path = dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(&path, text)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;

    fn sample(name: &str, n: usize) -> Dataset {
        let rows: Vec<[f64; 3]> = (0..n).map(|i| if i % 2 == 0 { [0.7, 0.2, 0.1] } else { [0.1, 0.3, 0.6] }).collect();
        Dataset::new(name, Matrix::from_rows(&rows).unwrap(), LabelSpace::range(3))
            .unwrap()
            .with_labels((0..n).map(|i| ClassId((i % 3) as u64)).collect())
            .unwrap()
            .with_features(Matrix::from_rows(&(0..n).map(|i| [i as f64, 1.0]).collect::<Vec<_>>()).unwrap())
            .unwrap()
    }

    #[test]
    fn two_entries_load_back() {
        let dir = tempfile::tempdir().unwrap();
        let a = sample("a", 6);
        let b = sample("b", 4).with_label_space(LabelSpace::range(3)).unwrap();
        let path = write_manifest(dir.path(), [("syn1", &a), ("natural", &b)]).unwrap();
        let cat = load_manifest(&path).unwrap();
        assert_eq!(cat.len(), 2);
        let la = cat.get("a").unwrap();
        assert_eq!((la.len(), la.features().unwrap().cols(), la.prob_classes().len()), (6, 2, 3));
        assert_eq!(la, &a);
        assert_eq!(cat.get("b").unwrap().len(), 4);
        assert_eq!(cat.group_of("b"), Some("natural"));
    }

    fn write_raw(dir: &Path, json: &str) -> PathBuf {
        let p = dir.join("manifest.json");
        fs::write(&p, json).unwrap();
        p
    }

    #[test]
    fn row_sum_violation_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let probs = Matrix::from_rows(&[[0.5, 0.3], [0.5, 0.5]]).unwrap();
        write_tensor(dir.path().join("p.bin"), &Tensor::from_matrix(&probs)).unwrap();
        let path = write_raw(
            dir.path(),
            r#"{"entries":[{"name":"x","group":"g","probabilities":"p.bin","class_ids":[0,1]}]}"#,
        );
        let err = load_manifest(path).unwrap_err();
        assert!(err.to_string().starts_with("rows must sum to 1"), "{err}");
    }

    #[test]
    fn short_labels_are_a_row_count_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let probs = Matrix::from_rows(&[[0.5, 0.5], [0.5, 0.5]]).unwrap();
        write_tensor(dir.path().join("p.bin"), &Tensor::from_matrix(&probs)).unwrap();
        write_tensor(dir.path().join("l.bin"), &Tensor::from_labels(&[ClassId(0)])).unwrap();
        let path = write_raw(
            dir.path(),
            r#"{"entries":[{"name":"x","group":"g","probabilities":"p.bin","labels":"l.bin","class_ids":[0,1]}]}"#,
        );
        let err = load_manifest(path).unwrap_err();
        assert!(err.to_string().starts_with("row-count mismatch"), "{err}");
    }

    #[test]
    fn unknown_dtype_and_duplicates_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut bytes = Tensor::from_matrix(&Matrix::from_rows(&[[1.0]]).unwrap()).encode();
        bytes[4] = 7;
        fs::write(dir.path().join("p.bin"), bytes).unwrap();
        let path = write_raw(
            dir.path(),
            r#"{"entries":[{"name":"x","group":"g","probabilities":"p.bin","class_ids":[0]}]}"#,
        );
        assert!(matches!(load_manifest(&path), Err(Error::UnknownDtype { code: 7, .. })));

        write_tensor(dir.path().join("p.bin"), &Tensor::from_matrix(&Matrix::from_rows(&[[1.0]]).unwrap())).unwrap();
        let path = write_raw(
            dir.path(),
            r#"{"entries":[
                {"name":"x","group":"g","probabilities":"p.bin","class_ids":[0]},
                {"name":"x","group":"h","probabilities":"p.bin","class_ids":[0]}]}"#,
        );
        assert!(load_manifest(&path).unwrap_err().to_string().contains("duplicate"));
    }

    #[test]
    fn unsorted_class_ids_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_raw(
            dir.path(),
            r#"{"entries":[{"name":"x","group":"g","probabilities":"p.bin","class_ids":[1,0]}]}"#,
        );
        assert!(matches!(load_manifest(path), Err(Error::Manifest(_))));
    }
}
