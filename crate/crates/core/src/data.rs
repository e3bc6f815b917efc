//! Datasets of dumped classifier outputs and label-space algebra.
//!
//! A [`Dataset`] distinguishes two class sets: the columns of its
//! probability table (`prob_classes`, what the model can predict) and the
//! classes the sampled distribution actually draws from (`label_space`).
//! The intersection of two datasets' label spaces drives the restriction to
//! B′/T′. Restriction keeps raw probability columns; it never renormalizes.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Tolerance on probability row sums.
pub const ROW_SUM_TOL: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassId(pub u64);

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Strictly increasing list of class ids.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabelSpace {
    ids: Vec<ClassId>,
}

impl LabelSpace {
    pub fn new(ids: Vec<ClassId>) -> Result<Self> {
        if let Some(w) = ids.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::InvalidLabelSpace(format!(
                "ids must be strictly increasing, found {} before {}",
                w[0], w[1]
            )));
        }
        Ok(Self { ids })
    }

    /// Sorts and deduplicates.
    pub fn from_unsorted(ids: impl IntoIterator<Item = ClassId>) -> Self {
        let mut ids: Vec<_> = ids.into_iter().collect();
        ids.sort_unstable();
        ids.dedup();
        Self { ids }
    }

    /// The classes `0..k`.
    pub fn range(k: u64) -> Self {
        Self {
            ids: (0..k).map(ClassId).collect(),
        }
    }

    pub fn ids(&self) -> &[ClassId] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn contains(&self, c: ClassId) -> bool {
        self.ids.binary_search(&c).is_ok()
    }

    pub fn position(&self, c: ClassId) -> Option<usize> {
        self.ids.binary_search(&c).ok()
    }

    pub fn is_subset_of(&self, other: &LabelSpace) -> bool {
        self.ids.iter().all(|&c| other.contains(c))
    }

    pub fn intersect(&self, other: &LabelSpace) -> LabelSpace {
        LabelSpace {
            ids: self
                .ids
                .iter()
                .copied()
                .filter(|&c| other.contains(c))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    features: Option<Matrix>,
    rotated_features: Option<Vec<Matrix>>,
    probabilities: Matrix,
    prob_classes: LabelSpace,
    label_space: LabelSpace,
    labels: Option<Vec<ClassId>>,
}

impl Dataset {
    /// Validates the probability table. The distribution's label space
    /// defaults to the probability columns.
    pub fn new(
        name: impl Into<String>,
        probabilities: Matrix,
        prob_classes: LabelSpace,
    ) -> Result<Self> {
        let name = name.into();
        let invalid = |reason: String| Error::InvalidDataset {
            name: name.clone(),
            reason,
        };
        if probabilities.rows() == 0 {
            return Err(invalid("no instances".into()));
        }
        if prob_classes.is_empty() {
            return Err(invalid("empty class list".into()));
        }
        if probabilities.cols() != prob_classes.len() {
            return Err(invalid(format!(
                "{} probability columns for {} classes",
                probabilities.cols(),
                prob_classes.len()
            )));
        }
        for (i, row) in probabilities.iter_rows().enumerate() {
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(invalid(format!("row {i} has a negative or non-finite probability")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::RowSum { name, row: i, sum });
            }
        }
        Ok(Self {
            label_space: prob_classes.clone(),
            name,
            features: None,
            rotated_features: None,
            probabilities,
            prob_classes,
            labels: None,
        })
    }

    pub fn with_label_space(mut self, label_space: LabelSpace) -> Result<Self> {
        if label_space.is_empty() {
            return Err(self.invalid("empty label space"));
        }
        if let Some(labels) = &self.labels {
            if let Some(c) = labels.iter().find(|&&c| !label_space.contains(c)) {
                return Err(self.invalid(&format!("label {c} outside the label space")));
            }
        }
        self.label_space = label_space;
        Ok(self)
    }

    pub fn with_labels(mut self, labels: Vec<ClassId>) -> Result<Self> {
        self.check_rows("labels", labels.len())?;
        if let Some(c) = labels.iter().find(|&&c| !self.label_space.contains(c)) {
            return Err(self.invalid(&format!("label {c} outside the label space")));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn with_features(mut self, features: Matrix) -> Result<Self> {
        self.check_rows("features", features.rows())?;
        if !features.is_finite() {
            return Err(Error::NonFinite("features"));
        }
        self.features = Some(features);
        Ok(self)
    }

    /// Featurizations of the inputs rotated by 0, 90, 180 and 270 degrees.
    pub fn with_rotated_features(mut self, rotations: Vec<Matrix>) -> Result<Self> {
        if rotations.len() != 4 {
            return Err(self.invalid(&format!("{} rotation matrices, expected 4", rotations.len())));
        }
        let d = rotations[0].cols();
        for m in &rotations {
            self.check_rows("rotated features", m.rows())?;
            if m.cols() != d {
                return Err(Error::DimensionMismatch("rotation matrices differ in width".into()));
            }
            if !m.is_finite() {
                return Err(Error::NonFinite("rotated features"));
            }
        }
        self.rotated_features = Some(rotations);
        Ok(self)
    }

    /// Copy with the probability table replaced; everything else is kept.
    pub fn with_probabilities(&self, probabilities: Matrix) -> Result<Self> {
        let fresh = Dataset::new(self.name.clone(), probabilities, self.prob_classes.clone())?;
        Ok(Self {
            probabilities: fresh.probabilities,
            ..self.clone()
        })
    }

    pub fn without_labels(&self) -> Self {
        Self {
            labels: None,
            ..self.clone()
        }
    }

    pub fn renamed(&self, name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ..self.clone()
        }
    }

    fn check_rows(&self, what: &'static str, got: usize) -> Result<()> {
        if got != self.len() {
            return Err(Error::RowCountMismatch {
                name: self.name.clone(),
                what,
                got,
                expected: self.len(),
            });
        }
        Ok(())
    }

    fn invalid(&self, reason: &str) -> Error {
        Error::InvalidDataset {
            name: self.name.clone(),
            reason: reason.into(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.probabilities.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn features(&self) -> Option<&Matrix> {
        self.features.as_ref()
    }

    pub fn rotated_features(&self) -> Option<&[Matrix]> {
        self.rotated_features.as_deref()
    }

    pub fn probabilities(&self) -> &Matrix {
        &self.probabilities
    }

    pub fn prob_classes(&self) -> &LabelSpace {
        &self.prob_classes
    }

    pub fn label_space(&self) -> &LabelSpace {
        &self.label_space
    }

    pub fn labels(&self) -> Option<&[ClassId]> {
        self.labels.as_deref()
    }

    pub fn is_labeled(&self) -> bool {
        self.labels.is_some()
    }

    pub fn full_view(&self) -> DatasetView<'_> {
        DatasetView {
            source: self,
            rows: (0..self.len()).collect(),
            cols: (0..self.prob_classes.len()).collect(),
            classes: self.prob_classes.clone(),
        }
    }

    /// Rows whose label lies in `classes` (all rows when unlabeled) and the
    /// probability columns of `classes`, unnormalized.
    pub fn restrict(&self, classes: &LabelSpace) -> Result<DatasetView<'_>> {
        let cols = classes
            .ids()
            .iter()
            .map(|&c| self.prob_classes.position(c).ok_or(Error::UnknownClass(c.0)))
            .collect::<Result<Vec<_>>>()?;
        let rows: Vec<usize> = match &self.labels {
            Some(labels) => labels
                .iter()
                .enumerate()
                .filter(|(_, &c)| classes.contains(c))
                .map(|(i, _)| i)
                .collect(),
            None => (0..self.len()).collect(),
        };
        if rows.is_empty() || cols.is_empty() {
            return Err(Error::EmptyView);
        }
        Ok(DatasetView {
            source: self,
            rows,
            cols,
            classes: classes.clone(),
        })
    }
}

/// A row and column selection of a [`Dataset`].
#[derive(Debug, Clone)]
pub struct DatasetView<'a> {
    source: &'a Dataset,
    rows: Vec<usize>,
    cols: Vec<usize>,
    classes: LabelSpace,
}

impl<'a> DatasetView<'a> {
    pub fn source(&self) -> &'a Dataset {
        self.source
    }

    pub fn row_index(&self) -> &[usize] {
        &self.rows
    }

    pub fn classes(&self) -> &LabelSpace {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Probabilities of the `i`-th retained row over the view's columns.
    pub fn prob_row(&self, i: usize) -> Vec<f64> {
        let row = self.source.probabilities.row(self.rows[i]);
        self.cols.iter().map(|&c| row[c]).collect()
    }

    pub fn prob_rows(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.len()).map(move |i| self.prob_row(i))
    }

    pub fn label(&self, i: usize) -> Option<ClassId> {
        self.source.labels.as_ref().map(|l| l[self.rows[i]])
    }

    pub fn is_labeled(&self) -> bool {
        self.source.is_labeled()
    }

    pub fn features(&self) -> Option<Matrix> {
        self.source.features.as_ref().map(|f| f.select_rows(&self.rows))
    }

    pub fn rotated_features(&self) -> Option<Vec<Matrix>> {
        self.source
            .rotated_features
            .as_ref()
            .map(|r| r.iter().map(|m| m.select_rows(&self.rows)).collect())
    }

    /// Restricted copy as a standalone dataset, columns renamed to the view's classes.
    pub fn to_dataset(&self, name: impl Into<String>) -> Result<Dataset> {
        let probs = Matrix::from_rows(&self.prob_rows().collect::<Vec<_>>())?;
        let mut ds = Dataset {
            name: name.into(),
            features: self.features(),
            rotated_features: self.rotated_features(),
            probabilities: probs,
            prob_classes: self.classes.clone(),
            label_space: self.classes.clone(),
            labels: None,
        };
        if self.is_labeled() {
            ds.labels = Some((0..self.len()).filter_map(|i| self.label(i)).collect());
        }
        Ok(ds)
    }
}

/// Sorted intersection of the two datasets' label spaces.
pub fn intersect_labels(base: &Dataset, target: &Dataset) -> Result<LabelSpace> {
    let both = base.label_space().intersect(target.label_space());
    if both.is_empty() {
        return Err(Error::DisjointLabels);
    }
    Ok(both)
}

/// Argmax class; ties go to the lowest class id.
pub fn predict_label(prob_row: &[f64], classes: &LabelSpace) -> Result<ClassId> {
    if prob_row.is_empty() {
        return Err(Error::Empty("probability row"));
    }
    if prob_row.len() != classes.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} probabilities for {} classes",
            prob_row.len(),
            classes.len()
        )));
    }
    Ok(classes.ids()[argmax(prob_row)])
}

/// Index of the first maximal entry.
pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &p) in row.iter().enumerate().skip(1) {
        if p > row[best] {
            best = j;
        }
    }
    best
}

/// Fraction of retained rows whose argmax over the view's columns is the label.
pub fn accuracy(view: &DatasetView<'_>) -> Result<f64> {
    let labels = view
        .source
        .labels
        .as_ref()
        .ok_or_else(|| Error::LabelsRequired(view.source.name.clone()))?;
    if view.is_empty() {
        return Err(Error::EmptyView);
    }
    let probs = &view.source.probabilities;
    let correct = view
        .rows
        .iter()
        .filter(|&&r| {
            let row = probs.row(r);
            let mut best = 0;
            for (j, &c) in view.cols.iter().enumerate().skip(1) {
                if row[c] > row[view.cols[best]] {
                    best = j;
                }
            }
            view.classes.ids()[best] == labels[r]
        })
        .count();
    Ok(correct as f64 / view.len() as f64)
}

/// Accuracy on B′ minus accuracy on T′; positive when the model degrades on T.
pub fn accuracy_gap(base: &Dataset, target: &Dataset) -> Result<f64> {
    let both = intersect_labels(base, target)?;
    Ok(accuracy(&base.restrict(&both)?)? - accuracy(&target.restrict(&both)?)?)
}
