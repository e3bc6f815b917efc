//! Distances between base and target feature distributions.
//!
//! * Frechet distance between Gaussian fits of the two feature sets.
//! * MMD with a linear kernel: the norm of the mean difference.
//! * A logistic discriminator trained to tell the sets apart, reported as
//!   held-out accuracy, ROC AUC and the A-proxy `2(1 − 2·error)`.
//! * Rotation-prediction accuracy of a classifier trained on the base's
//!   rotated features and evaluated on the target's.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::data::ClassId;
use crate::error::{Error, Result};
use crate::io::{make_splits, SplitSpec};
use crate::learners::{fit_logistic, fit_mlp_regressor, LinearModel, LogisticConfig, MlpConfig};
use crate::matrix::{Matrix, Standardizer};

/// Mean and sample covariance (`n − 1` denominator) of a feature set.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSummary {
    pub mean: Vec<f64>,
    pub cov: Matrix,
}

pub fn gaussian_summary(x: &Matrix) -> Result<GaussianSummary> {
    let (n, d) = (x.rows(), x.cols());
    if n < 2 {
        return Err(Error::NeedTwoSamples);
    }
    if !x.is_finite() {
        return Err(Error::NonFinite("features"));
    }
    let mean = x.column_means();
    let mut cov = DMatrix::<f64>::zeros(d, d);
    let mut centered = vec![0.0; d];
    for row in x.iter_rows() {
        for (c, (v, m)) in centered.iter_mut().zip(row.iter().zip(&mean)) {
            *c = v - m;
        }
        for i in 0..d {
            let ci = centered[i];
            for j in i..d {
                cov[(i, j)] += ci * centered[j];
            }
        }
    }
    let denom = (n - 1) as f64;
    for i in 0..d {
        for j in i..d {
            let v = cov[(i, j)] / denom;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    Ok(GaussianSummary {
        mean,
        cov: Matrix::from_nalgebra(&cov),
    })
}

fn check_symmetric(a: &DMatrix<f64>) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch(format!("{}×{} is not square", a.nrows(), a.ncols())));
    }
    let mut worst = 0.0f64;
    for i in 0..a.nrows() {
        for j in 0..i {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    if worst > 1e-6 {
        return Err(Error::Asymmetric(worst));
    }
    Ok(())
}

fn sym_eigen(a: &DMatrix<f64>) -> SymmetricEigen<f64, nalgebra::Dyn> {
    let sym = (a + a.transpose()) * 0.5;
    SymmetricEigen::new(sym)
}

/// Principal square root of a symmetric positive semi-definite matrix;
/// negative eigenvalues from round-off are clamped to zero.
pub fn matrix_sqrt_psd(a: &Matrix) -> Result<Matrix> {
    let a = a.to_nalgebra();
    check_symmetric(&a)?;
    let eig = sym_eigen(&a);
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let v = &eig.eigenvectors;
    let out = v * DMatrix::from_diagonal(&roots) * v.transpose();
    Ok(Matrix::from_nalgebra(&out))
}

/// Frechet distance between two Gaussians:
/// `||μa − μb||² + tr(Σa + Σb − 2 (Σa^½ Σb Σa^½)^½)`, clamped at zero.
pub fn frechet_between(a: &GaussianSummary, b: &GaussianSummary) -> Result<f64> {
    let d = a.mean.len();
    if b.mean.len() != d {
        return Err(Error::DimensionMismatch(format!("feature dims {d} and {}", b.mean.len())));
    }
    let mean_term: f64 = a.mean.iter().zip(&b.mean).map(|(x, y)| (x - y) * (x - y)).sum();
    let sa = a.cov.to_nalgebra();
    let sb = b.cov.to_nalgebra();
    check_symmetric(&sa)?;
    check_symmetric(&sb)?;
    let root_a = matrix_sqrt_psd(&a.cov)?.to_nalgebra();
    let inner = &root_a * &sb * &root_a;
    let cross: f64 = sym_eigen(&inner).eigenvalues.iter().map(|l| l.max(0.0).sqrt()).sum();
    let value = mean_term + sa.trace() + sb.trace() - 2.0 * cross;
    Ok(value.max(0.0))
}

/// Frechet distance between Gaussian fits of two feature sets.
pub fn frechet(base: &Matrix, target: &Matrix) -> Result<f64> {
    check_dims(base, target)?;
    frechet_between(&gaussian_summary(base)?, &gaussian_summary(target)?)
}

/// Linear-kernel MMD: `||mean(base) − mean(target)||`.
pub fn mmd(base: &Matrix, target: &Matrix) -> Result<f64> {
    check_dims(base, target)?;
    if base.rows() == 0 || target.rows() == 0 {
        return Err(Error::Empty("feature set"));
    }
    if !base.is_finite() || !target.is_finite() {
        return Err(Error::NonFinite("features"));
    }
    let (mb, mt) = (base.column_means(), target.column_means());
    Ok(mb.iter().zip(&mt).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
}

fn check_dims(a: &Matrix, b: &Matrix) -> Result<()> {
    if a.cols() != b.cols() {
        return Err(Error::DimensionMismatch(format!("feature dims {} and {}", a.cols(), b.cols())));
    }
    Ok(())
}

/// Area under the ROC curve of `scores` for the positive class, via the
/// Mann–Whitney statistic; tied pairs count one half.
pub fn roc_auc(scores: &[f64], positive: &[bool]) -> Result<f64> {
    if scores.len() != positive.len() {
        return Err(Error::DimensionMismatch(format!("{} scores, {} labels", scores.len(), positive.len())));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("scores"));
    }
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[i].total_cmp(&scores[j]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks are 1-based; ties share their average rank
        let avg = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += avg * order[i..=j].iter().filter(|&&k| positive[k]).count() as f64;
        i = j + 1;
    }
    let (p, n) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// `2 (1 − 2·error)`: 2 for a perfect discriminator, 0 at chance.
pub fn a_proxy(error: f64) -> f64 {
    2.0 * (1.0 - 2.0 * error)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub enum DiscriminatorLearner {
    /// Logistic regression, l2 chosen on the tune split.
    #[default]
    Logistic,
    /// Least-squares MLP on 0/1 targets, thresholded at one half.
    Mlp(MlpConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorConfig {
    pub l2_grid: Vec<f64>,
    pub logistic: LogisticConfig,
    pub standardize: bool,
    /// Fractions and seed for the per-side train/tune/test split.
    pub split: SplitSpec,
    pub learner: DiscriminatorLearner,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        Self {
            l2_grid: vec![1e-4, 1e-3, 1e-2, 1e-1],
            logistic: LogisticConfig::default(),
            standardize: true,
            split: SplitSpec::with_seed(0),
            learner: DiscriminatorLearner::Logistic,
        }
    }
}

impl DiscriminatorConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            split: SplitSpec::with_seed(seed),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorReport {
    /// Held-out accuracy.
    pub accuracy: f64,
    /// Held-out ROC AUC, target as the positive class.
    pub auc: f64,
    pub a_proxy: f64,
    /// Regularization strength picked on the tune split (logistic only).
    pub l2: Option<f64>,
}

impl DiscriminatorReport {
    pub fn from_scores(accuracy: f64, auc: f64, l2: Option<f64>) -> Self {
        Self {
            accuracy,
            auc,
            a_proxy: a_proxy(1.0 - accuracy),
            l2,
        }
    }
}

/// Offset between the base and target split seeds, so the two sides are
/// not shuffled identically.
const TARGET_SEED_OFFSET: u64 = 0x9E37_79B9_7F4A_7C15;

/// Trains a classifier to separate base (label 0) from target (label 1)
/// features and reports its performance on the held-out test portions.
pub fn discriminative_distance(base: &Matrix, target: &Matrix, cfg: &DiscriminatorConfig) -> Result<DiscriminatorReport> {
    check_dims(base, target)?;
    if !base.is_finite() || !target.is_finite() {
        return Err(Error::NonFinite("features"));
    }
    let sb = make_splits(base.rows(), &cfg.split)?;
    let mut target_spec = cfg.split;
    target_spec.seed = cfg.split.seed.wrapping_add(TARGET_SEED_OFFSET);
    let st = make_splits(target.rows(), &target_spec)?;

    let part = |b_idx: &[usize], t_idx: &[usize]| -> Result<(Matrix, Vec<ClassId>)> {
        let x = Matrix::vstack(&[&base.select_rows(b_idx), &target.select_rows(t_idx)])?;
        let mut y = vec![ClassId(0); b_idx.len()];
        y.resize(b_idx.len() + t_idx.len(), ClassId(1));
        Ok((x, y))
    };
    let (x_train, y_train) = part(&sb.train, &st.train)?;
    let (x_tune, y_tune) = part(&sb.tune, &st.tune)?;
    let (x_test, y_test) = part(&sb.test, &st.test)?;

    let scaler = if cfg.standardize {
        Standardizer::fit(&x_train)
    } else {
        Standardizer::identity(x_train.cols())
    };
    let (x_train, x_tune, x_test) = (scaler.transform(&x_train), scaler.transform(&x_tune), scaler.transform(&x_test));
    let positive: Vec<bool> = y_test.iter().map(|c| c.0 == 1).collect();

    match &cfg.learner {
        DiscriminatorLearner::Logistic => {
            if cfg.l2_grid.is_empty() {
                return Err(Error::InvalidArgument("empty l2 grid".into()));
            }
            let mut best: Option<(f64, f64, LinearModel)> = None;
            for &l2 in &cfg.l2_grid {
                let model = fit_logistic(&x_train, &y_train, l2, &cfg.logistic)?;
                let nll = mean_nll(&model, &x_tune, &y_tune)?;
                if best.as_ref().is_none_or(|(b, _, _)| nll < *b) {
                    best = Some((nll, l2, model));
                }
            }
            let (_, l2, model) = best.expect("non-empty grid");
            let probs = model.predict_proba(&x_test)?;
            let col = model.classes.position(ClassId(1)).expect("both sides present");
            let scores: Vec<f64> = probs.iter_rows().map(|r| r[col]).collect();
            let predicted = model.predict(&x_test)?;
            let hits = predicted.iter().zip(&y_test).filter(|(a, b)| a == b).count();
            let acc = hits as f64 / y_test.len() as f64;
            Ok(DiscriminatorReport::from_scores(acc, roc_auc(&scores, &positive)?, Some(l2)))
        }
        DiscriminatorLearner::Mlp(mlp) => {
            let g: Vec<f64> = y_train.iter().map(|c| c.0 as f64).collect();
            let model = fit_mlp_regressor(&x_train, &g, mlp)?;
            let scores = x_test.iter_rows().map(|r| model.predict(r)).collect::<Result<Vec<_>>>()?;
            let hits = scores.iter().zip(&positive).filter(|(s, p)| (**s > 0.5) == **p).count();
            let acc = hits as f64 / positive.len() as f64;
            Ok(DiscriminatorReport::from_scores(acc, roc_auc(&scores, &positive)?, None))
        }
    }
}

fn mean_nll(model: &LinearModel, x: &Matrix, y: &[ClassId]) -> Result<f64> {
    let probs = model.predict_proba(x)?;
    let mut total = 0.0;
    for (row, c) in probs.iter_rows().zip(y) {
        let j = model.classes.position(*c).expect("label seen in training");
        total -= row[j].max(1e-300).ln();
    }
    Ok(total / y.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationConfig {
    pub l2: f64,
    pub logistic: LogisticConfig,
    pub standardize: bool,
}

impl Default for RotationConfig {
    fn default() -> Self {
        Self {
            l2: 1e-3,
            logistic: LogisticConfig::default(),
            standardize: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationReport {
    /// Accuracy on the target's rotated features.
    pub accuracy: f64,
    /// Macro one-vs-rest ROC AUC over the four rotations on the target.
    pub auc: f64,
}

/// A classifier trained to predict which of the four rotations produced a
/// base feature row; the same model scored on the target's rotated rows.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationModel {
    scaler: Standardizer,
    model: LinearModel,
}

fn stack_rotations(rotations: &[Matrix]) -> Result<(Matrix, Vec<ClassId>)> {
    if rotations.len() != 4 {
        return Err(Error::InvalidArgument(format!("expected 4 rotations, got {}", rotations.len())));
    }
    let refs: Vec<&Matrix> = rotations.iter().collect();
    let x = Matrix::vstack(&refs)?;
    let y = rotations
        .iter()
        .enumerate()
        .flat_map(|(r, m)| std::iter::repeat_n(ClassId(r as u64), m.rows()))
        .collect();
    Ok((x, y))
}

impl RotationModel {
    pub fn fit(base_rotations: &[Matrix], cfg: &RotationConfig) -> Result<Self> {
        let (x, y) = stack_rotations(base_rotations)?;
        if x.rows() == 0 {
            return Err(Error::Empty("rotated features"));
        }
        if !x.is_finite() {
            return Err(Error::NonFinite("rotated features"));
        }
        let scaler = if cfg.standardize {
            Standardizer::fit(&x)
        } else {
            Standardizer::identity(x.cols())
        };
        let model = fit_logistic(&scaler.transform(&x), &y, cfg.l2, &cfg.logistic)?;
        Ok(Self { scaler, model })
    }

    pub fn score(&self, target_rotations: &[Matrix]) -> Result<RotationReport> {
        let (x, y) = stack_rotations(target_rotations)?;
        if x.rows() == 0 {
            return Err(Error::Empty("rotated features"));
        }
        let x = self.scaler.transform(&x);
        let probs = self.model.predict_proba(&x)?;
        let predicted = self.model.predict(&x)?;
        let hits = predicted.iter().zip(&y).filter(|(a, b)| a == b).count();
        let mut aucs = Vec::with_capacity(4);
        for (col, c) in self.model.classes.ids().iter().enumerate() {
            let scores: Vec<f64> = probs.iter_rows().map(|r| r[col]).collect();
            let positive: Vec<bool> = y.iter().map(|v| v == c).collect();
            aucs.push(roc_auc(&scores, &positive)?);
        }
        Ok(RotationReport {
            accuracy: hits as f64 / y.len() as f64,
            auc: aucs.iter().sum::<f64>() / aucs.len() as f64,
        })
    }
}

pub fn rotation_score(base_rotations: &[Matrix], target_rotations: &[Matrix], cfg: &RotationConfig) -> Result<RotationReport> {
    RotationModel::fit(base_rotations, cfg)?.score(target_rotations)
}
