//! A synthetic universe for running the calibrate/validate protocol end to
//! end: Gaussian-blob tasks, a logistic reference classifier, parameterized
//! shift families and a demo that ties them together.
//!
//! Inputs live on a square grid of side `⌈√d⌉` (row-major, zero-padded), so
//! quarter-turn rotations are well defined. Every input carries a fixed
//! top-to-bottom ramp, which gives rotation prediction something to detect.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{argmax, ClassId, Dataset, DatasetView, LabelSpace};
use crate::error::{Error, Result};
use crate::io::{permutation, write_distance_csv, write_evaluation_csv, write_manifest, Catalog, DistanceRow, EvaluationRow};
use crate::learners::{fit_logistic, LinearModel, LogisticConfig};
use crate::matrix::Matrix;
use crate::pipeline::{format_table, run_protocol, Method, ProtocolConfig, ProtocolResult};

/// SplitMix64 finalizer, used to derive independent stream seeds.
pub fn mix_seed(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn stream(seed: u64, tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix_seed(seed ^ mix_seed(tag)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTask {
    pub k: usize,
    pub d: usize,
    /// K × D.
    pub class_means: Matrix,
    /// Isotropic within-class standard deviation.
    pub class_cov_scale: f64,
    pub seed: u64,
    /// Unit direction used by the mean-translation family.
    pub translation_dir: Vec<f64>,
}

/// Raw inputs with their labels and the label space they were drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x: Matrix,
    pub y: Vec<ClassId>,
    pub label_space: LabelSpace,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskSplits {
    pub task: SyntheticTask,
    pub train: Sample,
    pub val: Sample,
    pub test: Sample,
}

/// Accuracy band targeted by the radius search.
pub const BASE_ACC_RANGE: (f64, f64) = (0.7, 0.9);
const SEARCH_BAND: (f64, f64) = (0.76, 0.84);
const RADIUS_STEPS: usize = 20;

fn grid_side(d: usize) -> usize {
    (d as f64).sqrt().ceil() as usize
}

/// The fixed orientation ramp, one value per input coordinate.
fn ramp(d: usize) -> Vec<f64> {
    let s = grid_side(d);
    (0..d)
        .map(|i| {
            let row = (i / s) as f64;
            if s > 1 {
                row / (s - 1) as f64 - 0.5
            } else {
                0.0
            }
        })
        .collect()
}

/// Rotates a row-major input by `quarter_turns · 90°` on its grid. Cells
/// that land outside the first `d` positions are dropped; vacated ones are 0.
pub fn rotate_grid(x: &[f64], quarter_turns: usize) -> Vec<f64> {
    let d = x.len();
    let s = grid_side(d);
    let mut grid = vec![0.0; s * s];
    grid[..d].copy_from_slice(x);
    for _ in 0..quarter_turns % 4 {
        let mut next = vec![0.0; s * s];
        for r in 0..s {
            for c in 0..s {
                // clockwise: (r, c) -> (c, s - 1 - r)
                next[c * s + (s - 1 - r)] = grid[r * s + c];
            }
        }
        grid = next;
    }
    grid.truncate(d);
    grid
}

/// The four rotations of every row.
pub fn rotations_of(x: &Matrix) -> Vec<Matrix> {
    (0..4)
        .map(|r| {
            let data = x.iter_rows().flat_map(|row| rotate_grid(row, r)).collect();
            Matrix::new(x.rows(), x.cols(), data).expect("same shape")
        })
        .collect()
}

fn unit_vector(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-9 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

fn nearest_mean_accuracy(dirs: &[Vec<f64>], r: f64, labels: &[usize], noise: &[Vec<f64>]) -> f64 {
    let mut hits = 0;
    for (y, z) in labels.iter().zip(noise) {
        let x: Vec<f64> = dirs[*y].iter().zip(z).map(|(u, e)| r * u + e).collect();
        let mut best = (f64::INFINITY, 0);
        for (c, u) in dirs.iter().enumerate() {
            let dist: f64 = x.iter().zip(u).map(|(a, b)| (a - r * b) * (a - r * b)).sum();
            if dist < best.0 {
                best = (dist, c);
            }
        }
        hits += usize::from(best.1 == *y);
    }
    hits as f64 / labels.len() as f64
}

/// Draws a task whose class means sit on a sphere, with the radius bisected
/// until the Bayes (nearest-mean) accuracy lands near the middle of
/// [`BASE_ACC_RANGE`], then samples `n` points for each split.
pub fn gen_task(seed: u64, k: usize, d: usize, n: usize) -> Result<TaskSplits> {
    if k < 2 || d < 2 {
        return Err(Error::InvalidArgument(format!("need k ≥ 2 and d ≥ 2, got k={k}, d={d}")));
    }
    if n < k * 50 {
        return Err(Error::InvalidArgument(format!("need at least {} points per split, got {n}", k * 50)));
    }
    let mut rng = stream(seed, 1);
    let dirs: Vec<Vec<f64>> = (0..k).map(|_| unit_vector(&mut rng, d)).collect();
    let translation_dir = unit_vector(&mut rng, d);

    // common random numbers keep the accuracy curve smooth in r
    let m = 4000;
    let labels: Vec<usize> = (0..m).map(|_| rng.random_range(0..k)).collect();
    let noise: Vec<Vec<f64>> = (0..m).map(|_| (0..d).map(|_| StandardNormal.sample(&mut rng)).collect()).collect();
    let acc = |r: f64| nearest_mean_accuracy(&dirs, r, &labels, &noise);

    let mut hi = 1.0;
    while acc(hi) < SEARCH_BAND.1 {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::Infeasible("class means cannot reach the accuracy band".into()));
        }
    }
    let mut lo = 0.0;
    let mut radius = None;
    for _ in 0..RADIUS_STEPS {
        let mid = 0.5 * (lo + hi);
        let a = acc(mid);
        if a < SEARCH_BAND.0 {
            lo = mid;
        } else if a > SEARCH_BAND.1 {
            hi = mid;
        } else {
            radius = Some(mid);
            break;
        }
    }
    let radius = radius.ok_or_else(|| {
        Error::Infeasible(format!("no radius reached accuracy in {SEARCH_BAND:?} after {RADIUS_STEPS} steps"))
    })?;

    let means: Vec<f64> = dirs.iter().flat_map(|u| u.iter().map(|v| v * radius)).collect();
    let task = SyntheticTask {
        k,
        d,
        class_means: Matrix::new(k, d, means)?,
        class_cov_scale: 1.0,
        seed,
        translation_dir,
    };
    let split = |tag: u64| apply_shift(&task, ShiftKind::FeatureNoise, 0.0, n, mix_seed(seed ^ tag));
    Ok(TaskSplits {
        train: split(0xA1)?,
        val: split(0xA2)?,
        test: split(0xA3)?,
        task,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftKind {
    FeatureNoise,
    MeanTranslation,
    CovarianceScale,
    LabelSubset,
    GridRotationConfound,
}

impl ShiftKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ShiftKind::FeatureNoise => "feature_noise",
            ShiftKind::MeanTranslation => "mean_translation",
            ShiftKind::CovarianceScale => "covariance_scale",
            ShiftKind::LabelSubset => "label_subset",
            ShiftKind::GridRotationConfound => "grid_rotation_confound",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftFamily {
    pub kind: ShiftKind,
    pub intensity_grid: Vec<f64>,
    pub seed: u64,
}

impl ShiftFamily {
    pub fn new(kind: ShiftKind, intensity_grid: Vec<f64>, seed: u64) -> Result<Self> {
        let ok = intensity_grid.iter().all(|v| v.is_finite() && *v >= 0.0)
            && intensity_grid.windows(2).all(|w| w[0] < w[1]);
        if !ok {
            return Err(Error::InvalidArgument("intensities must be non-negative and increasing".into()));
        }
        Ok(Self {
            kind,
            intensity_grid,
            seed,
        })
    }

    pub fn sample(&self, task: &SyntheticTask, index: usize, n: usize) -> Result<Sample> {
        let i = *self
            .intensity_grid
            .get(index)
            .ok_or_else(|| Error::InvalidArgument(format!("intensity index {index} out of range")))?;
        apply_shift(task, self.kind, i, n, mix_seed(self.seed ^ mix_seed(index as u64)))
    }
}

/// Samples `n` labeled points from the task's generative process under one
/// shift. Intensity 0 reproduces the base distribution for every kind.
pub fn apply_shift(task: &SyntheticTask, kind: ShiftKind, intensity: f64, n: usize, seed: u64) -> Result<Sample> {
    if !(intensity.is_finite() && intensity >= 0.0) {
        return Err(Error::InvalidArgument(format!("intensity must be ≥ 0, got {intensity}")));
    }
    let (k, d) = (task.k, task.d);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let classes: Vec<u64> = if kind == ShiftKind::LabelSubset {
        let removed = (intensity * k as f64 - 1e-9).ceil().max(0.0) as usize;
        if removed >= k {
            return Err(Error::InvalidArgument(format!("label_subset at {intensity} removes every class")));
        }
        let mut keep: Vec<u64> = permutation(k, mix_seed(seed))[removed..].iter().map(|&c| c as u64).collect();
        keep.sort_unstable();
        keep
    } else {
        (0..k as u64).collect()
    };
    let label_space = LabelSpace::new(classes.iter().copied().map(ClassId).collect())?;

    let sd = task.class_cov_scale
        * if kind == ShiftKind::CovarianceScale {
            (1.0 + intensity).sqrt()
        } else {
            1.0
        };
    let offset = ramp(d);
    let mut data = Vec::with_capacity(n * d);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let c = classes[rng.random_range(0..classes.len())];
        let mean = task.class_means.row(c as usize);
        let mut x: Vec<f64> = (0..d)
            .map(|j| {
                let z: f64 = StandardNormal.sample(&mut rng);
                mean[j] + sd * z + offset[j]
            })
            .collect();
        match kind {
            ShiftKind::FeatureNoise => {
                for v in &mut x {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    *v += intensity * e;
                }
            }
            ShiftKind::MeanTranslation => {
                for (v, u) in x.iter_mut().zip(&task.translation_dir) {
                    *v += intensity * u;
                }
            }
            ShiftKind::GridRotationConfound => {
                let u: f64 = rng.random();
                let q = rng.random_range(1..4usize);
                if u < intensity {
                    x = rotate_grid(&x, q);
                }
            }
            ShiftKind::CovarianceScale | ShiftKind::LabelSubset => {}
        }
        data.extend(x);
        y.push(ClassId(c));
    }
    Ok(Sample {
        x: Matrix::new(n, d, data)?,
        y,
        label_space,
    })
}

/// The task's logistic classifier and how it turns samples into datasets.
///
/// The classifier sees each input rescaled to norm `√d`. On raw inputs a
/// linear softmax grows more confident under additive noise (the logits
/// spread out); on norm-scaled inputs noise dilutes the class signal, so
/// confidence falls as accuracy falls.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceClassifier {
    pub model: LinearModel,
    pub l2: f64,
    pub k: usize,
}

/// Rescales every row to Euclidean norm `√d` (zero rows stay zero).
pub fn norm_scale(x: &Matrix) -> Matrix {
    let target = (x.cols() as f64).sqrt();
    let mut out = x.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let n = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 0.0 {
            row.iter_mut().for_each(|v| *v *= target / n);
        }
    }
    out
}

/// Fits the logistic classifier on the train split, picking l2 from a small
/// grid by validation NLL.
pub fn train_reference_classifier(splits: &TaskSplits) -> Result<ReferenceClassifier> {
    let cfg = LogisticConfig::default();
    let mut best: Option<(f64, f64, LinearModel)> = None;
    for l2 in [1e-4, 1e-3, 1e-2] {
        let model = fit_logistic(&norm_scale(&splits.train.x), &splits.train.y, l2, &cfg)?;
        let probs = model.predict_proba(&norm_scale(&splits.val.x))?;
        let nll: f64 = probs
            .iter_rows()
            .zip(&splits.val.y)
            .map(|(row, c)| -row[model.classes.position(*c).expect("all classes trained")].max(1e-300).ln())
            .sum();
        if best.as_ref().is_none_or(|b| nll < b.0) {
            best = Some((nll, l2, model));
        }
    }
    let (_, l2, model) = best.expect("non-empty grid");
    if model.classes.len() != splits.task.k {
        return Err(Error::InvalidArgument("train split is missing classes".into()));
    }
    Ok(ReferenceClassifier {
        model,
        l2,
        k: splits.task.k,
    })
}

impl ReferenceClassifier {
    pub fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        self.model.predict_proba(&norm_scale(x))
    }

    /// Dataset with features = raw inputs, their four grid rotations,
    /// probabilities = model outputs, and the sample's labels.
    pub fn featurize(&self, name: &str, sample: &Sample) -> Result<Dataset> {
        let probs = self.predict_proba(&sample.x)?;
        Dataset::new(name, probs, self.model.classes.clone())?
            .with_label_space(sample.label_space.clone())?
            .with_labels(sample.y.clone())?
            .with_features(sample.x.clone())?
            .with_rotated_features(rotations_of(&sample.x))
    }
}

pub const ORACLE_MIN_ROWS: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct CalibratedOracle {
    /// `bins + 1` edges over `[0, 1]` after merging empty bins.
    pub bin_edges: Vec<f64>,
    /// Empirical accuracy of each bin; also the confidence it assigns.
    pub bin_accuracy: Vec<f64>,
    pub bin_counts: Vec<usize>,
    pub n: usize,
}

/// Sets each row's top probability to the empirical accuracy of its
/// confidence bin. The remaining mass is spread over the other classes in
/// proportion to their original values, capped just below the new top, so
/// every row keeps its argmax. Rows are normalized over the view's columns
/// first. Empty bins are merged into their left neighbor (the right one for
/// a leading empty bin).
pub fn make_calibrated_oracle(view: &DatasetView<'_>, bins: usize, name: &str) -> Result<(CalibratedOracle, Dataset)> {
    if bins == 0 {
        return Err(Error::InvalidArgument("need at least one bin".into()));
    }
    if !view.is_labeled() {
        return Err(Error::LabelsRequired(view.source().name().to_string()));
    }
    if view.len() < ORACLE_MIN_ROWS {
        return Err(Error::InvalidArgument(format!(
            "calibrated oracle needs at least {ORACLE_MIN_ROWS} rows, got {}",
            view.len()
        )));
    }
    let k = view.classes().len();
    let rows: Vec<Vec<f64>> = view
        .prob_rows()
        .map(|r| {
            let s: f64 = r.iter().sum();
            r.into_iter().map(|v| v / s).collect()
        })
        .collect();
    let top: Vec<usize> = rows.iter().map(|r| argmax(r)).collect();
    let hit: Vec<bool> = (0..rows.len())
        .map(|i| Some(view.classes().ids()[top[i]]) == view.label(i))
        .collect();

    let raw_bin = |c: f64| ((c * bins as f64) as usize).min(bins - 1);
    let mut counts = vec![0usize; bins];
    for (r, &t) in rows.iter().zip(&top) {
        counts[raw_bin(r[t])] += 1;
    }
    // an empty bin joins the next non-empty bin on its left, or on its
    // right when none exists
    let nonempty: Vec<usize> = (0..bins).filter(|&b| counts[b] > 0).collect();
    let merged: Vec<usize> = (0..bins)
        .map(|b| nonempty.iter().filter(|&&e| e < b).count().saturating_sub(usize::from(counts[b] == 0)))
        .collect();
    let mut edges = vec![0.0];
    edges.extend(nonempty[..nonempty.len() - 1].iter().map(|&b| (b + 1) as f64 / bins as f64));
    edges.push(1.0);
    let nb = edges.len() - 1;
    let mut bin_counts = vec![0usize; nb];
    let mut bin_hits = vec![0usize; nb];
    for i in 0..rows.len() {
        let b = merged[raw_bin(rows[i][top[i]])].min(nb - 1);
        bin_counts[b] += 1;
        bin_hits[b] += usize::from(hit[i]);
    }
    let bin_accuracy: Vec<f64> = bin_counts
        .iter()
        .zip(&bin_hits)
        .map(|(&c, &h)| if c == 0 { 0.0 } else { h as f64 / c as f64 })
        .collect();

    let floor = 1.0 / k as f64 + 1e-9;
    let mut out = Matrix::zeros(rows.len(), k);
    for (i, row) in rows.iter().enumerate() {
        let b = merged[raw_bin(row[top[i]])].min(nb - 1);
        let a = if k == 1 { 1.0 } else { bin_accuracy[b].max(floor).min(1.0) };
        let new_row = out.row_mut(i);
        new_row[top[i]] = a;
        water_fill(row, top[i], a, new_row);
    }
    let ds = view.to_dataset(name)?.with_probabilities(out)?;
    Ok((
        CalibratedOracle {
            bin_edges: edges,
            bin_accuracy,
            bin_counts,
            n: rows.len(),
        },
        ds,
    ))
}

/// Distributes `1 − a` over the non-top entries proportionally to `row`,
/// capping each at just under `a`.
fn water_fill(row: &[f64], top: usize, a: f64, out: &mut [f64]) {
    let k = row.len();
    let cap = a * (1.0 - 1e-12);
    let mut free: Vec<usize> = (0..k).filter(|&j| j != top).collect();
    let mut mass = 1.0 - a;
    loop {
        if free.is_empty() {
            break;
        }
        let weight: f64 = free.iter().map(|&j| row[j]).sum();
        let share = |j: usize| {
            if weight > 0.0 {
                mass * row[j] / weight
            } else {
                mass / free.len() as f64
            }
        };
        let over: Vec<usize> = free.iter().copied().filter(|&j| share(j) > cap).collect();
        if over.is_empty() {
            for &j in &free {
                out[j] = share(j);
            }
            break;
        }
        for &j in &over {
            out[j] = cap;
            mass -= cap;
        }
        free.retain(|j| !over.contains(j));
    }
    // exact normalization against round-off
    let s: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= s);
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoConfig {
    pub k: usize,
    pub d: usize,
    /// Points per train/val/test split of the task.
    pub n_split: usize,
    /// Points per shifted target.
    pub n_target: usize,
    pub noise_grid: Vec<f64>,
    pub noise_repeats: usize,
    pub translation_grid: Vec<f64>,
    pub covscale_grid: Vec<f64>,
    pub subset_grid: Vec<f64>,
}

impl Default for DemoConfig {
    fn default() -> Self {
        Self {
            k: 10,
            d: 16,
            n_split: 2000,
            n_target: 2000,
            noise_grid: vec![0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 1.6],
            noise_repeats: 3,
            translation_grid: vec![0.5, 1.0, 1.5, 2.0, 2.5, 3.0],
            covscale_grid: vec![0.25, 0.5, 1.0, 1.5, 2.0, 3.0],
            subset_grid: vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6],
        }
    }
}

pub const BASE_NAME: &str = "base";
pub const CALIBRATION_GROUP: &str = "noise";
pub const VALIDATION_GROUPS: [&str; 3] = ["translation", "covscale", "subset"];

pub struct DemoResult {
    pub catalog: Catalog,
    /// Catalog insertion order: (group, name).
    pub order: Vec<(String, String)>,
    pub protocol: ProtocolResult,
    pub table: String,
    pub base_accuracy: f64,
}

/// Builds the task and classifier, generates the calibration and validation
/// shifts, and runs the protocol with every method.
pub fn run_demo(seed: u64, cfg: &DemoConfig) -> Result<DemoResult> {
    let splits = gen_task(seed, cfg.k, cfg.d, cfg.n_split)?;
    let clf = train_reference_classifier(&splits)?;
    let base = clf.featurize(BASE_NAME, &splits.test)?;
    let base_accuracy = crate::data::accuracy(&base.full_view())?;

    let mut jobs: Vec<(String, String, ShiftKind, f64, u64)> = Vec::new();
    for rep in 0..cfg.noise_repeats {
        for (i, &v) in cfg.noise_grid.iter().enumerate() {
            let name = format!("noise_i{i}_r{rep}");
            jobs.push((CALIBRATION_GROUP.into(), name, ShiftKind::FeatureNoise, v, (rep * 100 + i) as u64));
        }
    }
    let families = [
        (VALIDATION_GROUPS[0], ShiftKind::MeanTranslation, &cfg.translation_grid),
        (VALIDATION_GROUPS[1], ShiftKind::CovarianceScale, &cfg.covscale_grid),
        (VALIDATION_GROUPS[2], ShiftKind::LabelSubset, &cfg.subset_grid),
    ];
    for (f, (group, kind, grid)) in families.iter().enumerate() {
        for (i, &v) in grid.iter().enumerate() {
            jobs.push((group.to_string(), format!("{group}_i{i}"), *kind, v, (1000 * (f + 1) + i) as u64));
        }
    }
    let task = &splits.task;
    let targets: Vec<Dataset> = jobs
        .par_iter()
        .map(|(_, name, kind, v, tag)| {
            let sample = apply_shift(task, *kind, *v, cfg.n_target, mix_seed(seed ^ mix_seed(0x5EED + tag)))?;
            clf.featurize(name, &sample)
        })
        .collect::<Result<_>>()?;

    let mut catalog = Catalog::new();
    let mut order = vec![(BASE_NAME.to_string(), BASE_NAME.to_string())];
    catalog.insert(BASE_NAME, base)?;
    for ((group, name, ..), ds) in jobs.iter().zip(targets) {
        catalog.insert(group.clone(), ds)?;
        order.push((group.clone(), name.clone()));
    }

    let protocol_cfg = ProtocolConfig {
        measure: crate::pipeline::MeasureConfig::with_seed(seed),
        ..ProtocolConfig::default()
    };
    let cal = vec![CALIBRATION_GROUP.to_string()];
    let val: Vec<String> = VALIDATION_GROUPS.iter().map(|s| s.to_string()).collect();
    let protocol = run_protocol(&catalog, BASE_NAME, &cal, &val, &Method::ALL, &protocol_cfg)?;
    let table = format_table(&protocol.reports);
    Ok(DemoResult {
        catalog,
        order,
        protocol,
        table,
        base_accuracy,
    })
}

impl DemoResult {
    /// Every measured (target, method) scalar, sorted by target then method.
    pub fn distance_rows(&self) -> Vec<DistanceRow> {
        let mut rows = Vec::new();
        for m in self.protocol.calibration.iter().chain(&self.protocol.validation) {
            for (method, value) in &m.features {
                rows.push(DistanceRow {
                    base: m.base_name.clone(),
                    target: m.target_name.clone(),
                    method: method.to_string(),
                    value: *value,
                });
            }
        }
        rows.sort_by(|a, b| (&a.target, &a.method).cmp(&(&b.target, &b.method)));
        rows
    }

    /// Writes the manifest and tensors, `distances.csv`, one
    /// `eval_<method>.csv` per method and `summary.txt`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let entries: Vec<(&str, &Dataset)> = self
            .order
            .iter()
            .map(|(g, n)| Ok((g.as_str(), self.catalog.get(n)?)))
            .collect::<Result<_>>()?;
        write_manifest(dir, entries)?;
        write_distance_csv(fs::File::create(dir.join("distances.csv"))?, &self.distance_rows())?;
        for (method, report) in &self.protocol.reports {
            let mut rows: Vec<EvaluationRow> = report
                .rows
                .iter()
                .map(|r| EvaluationRow {
                    target: r.target.clone(),
                    true_acc: r.true_acc,
                    pred_acc: r.pred_acc,
                    abs_err: r.abs_err,
                })
                .collect();
            rows.sort_by(|a, b| a.target.cmp(&b.target));
            write_evaluation_csv(fs::File::create(dir.join(format!("eval_{method}.csv")))?, &rows)?;
        }
        fs::write(dir.join("summary.txt"), &self.table)?;
        Ok(())
    }

    pub fn mae(&self, method: Method) -> Option<f64> {
        self.protocol.reports.get(&method).map(|r| r.mae)
    }

    pub fn maes(&self) -> BTreeMap<Method, f64> {
        self.protocol.reports.iter().map(|(m, r)| (*m, r.mae)).collect()
    }
}
