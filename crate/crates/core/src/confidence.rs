//! Average confidence, average entropy, their base-vs-target differences,
//! and temperature scaling.
//!
//! All summaries run over a [`DatasetView`], so they see only the rows and
//! probability columns of the intersected label space. Columns are never
//! renormalized. Entropy uses the natural logarithm with `0 ln 0 = 0`.

use serde::{Deserialize, Serialize};

use crate::data::{accuracy, argmax, intersect_labels, Dataset, DatasetView, LabelSpace};
use crate::error::{Error, Result};
use crate::learners::softmax_in_place;
use crate::matrix::Matrix;

/// Floor applied to probabilities before taking logarithms.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceSummary {
    pub avg_confidence: f64,
    pub avg_entropy: f64,
    pub n: usize,
    pub label_space: LabelSpace,
}

pub fn summarize(view: &DatasetView<'_>) -> Result<ConfidenceSummary> {
    if view.is_empty() {
        return Err(Error::EmptyView);
    }
    let (mut conf, mut ent) = (0.0, 0.0);
    for row in view.prob_rows() {
        conf += row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        ent -= row.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum::<f64>();
    }
    let n = view.len();
    Ok(ConfidenceSummary {
        avg_confidence: conf / n as f64,
        avg_entropy: ent / n as f64,
        n,
        label_space: view.classes().clone(),
    })
}

fn paired_summaries(base: &Dataset, target: &Dataset) -> Result<(ConfidenceSummary, ConfidenceSummary)> {
    let both = intersect_labels(base, target)?;
    Ok((summarize(&base.restrict(&both)?)?, summarize(&target.restrict(&both)?)?))
}

/// Difference of confidences: AC on B′ minus AC on T′.
pub fn doc(base: &Dataset, target: &Dataset) -> Result<f64> {
    let (b, t) = paired_summaries(base, target)?;
    Ok(b.avg_confidence - t.avg_confidence)
}

/// Difference of average entropies, base minus target.
pub fn doe(base: &Dataset, target: &Dataset) -> Result<f64> {
    let (b, t) = paired_summaries(base, target)?;
    Ok(b.avg_entropy - t.avg_entropy)
}

/// Regressor-free estimate: base accuracy minus DoC, clamped to `[0, 1]`.
pub fn doc_feat_predict(base_acc: f64, doc_value: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&base_acc) {
        return Err(Error::InvalidArgument(format!("base accuracy {base_acc} outside [0, 1]")));
    }
    Ok((base_acc - doc_value).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Temperature(f64);

impl Temperature {
    pub fn new(t: f64) -> Result<Self> {
        if t.is_finite() && t > 0.0 {
            Ok(Self(t))
        } else {
            Err(Error::InvalidArgument(format!("temperature must be positive and finite, got {t}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Floored log-probabilities of a view plus each row's label column.
struct LogProbs {
    rows: Vec<Vec<f64>>,
    target: Vec<usize>,
}

impl LogProbs {
    fn new(view: &DatasetView<'_>) -> Result<Self> {
        if !view.is_labeled() {
            return Err(Error::LabelsRequired(view.source().name().to_string()));
        }
        if view.is_empty() {
            return Err(Error::EmptyView);
        }
        let classes = view.classes();
        let mut rows = Vec::with_capacity(view.len());
        let mut target = Vec::with_capacity(view.len());
        for i in 0..view.len() {
            let label = view.label(i).expect("labeled view");
            target.push(classes.position(label).expect("restricted rows carry view labels"));
            rows.push(view.prob_row(i).into_iter().map(|p| p.max(PROB_FLOOR).ln()).collect());
        }
        Ok(Self { rows, target })
    }

    fn nll(&self, t: f64) -> f64 {
        let mut total = 0.0;
        for (lp, &y) in self.rows.iter().zip(&self.target) {
            let m = lp.iter().copied().fold(f64::NEG_INFINITY, f64::max) / t;
            let lse = m + lp.iter().map(|v| (v / t - m).exp()).sum::<f64>().ln();
            total += lse - lp[y] / t;
        }
        total / self.rows.len() as f64
    }
}

/// Mean negative log-likelihood of `softmax(ln p / t)` against the labels.
pub fn temperature_nll(view: &DatasetView<'_>, t: Temperature) -> Result<f64> {
    Ok(LogProbs::new(view)?.nll(t.0))
}

const T_MIN: f64 = 0.05;
const T_MAX: f64 = 20.0;
const GRID_POINTS: usize = 61;

/// NLL-minimizing temperature on `[0.05, 20]`: a geometric grid, then
/// golden-section refinement around the best grid point to `|ΔT| < 1e-4`.
/// Never returns a temperature worse than `T = 1`.
pub fn fit_temperature(view: &DatasetView<'_>) -> Result<Temperature> {
    if view.classes().len() < 2 {
        return Err(Error::InvalidArgument("temperature scaling needs at least two classes".into()));
    }
    let lp = LogProbs::new(view)?;
    let ratio = (T_MAX / T_MIN).powf(1.0 / (GRID_POINTS - 1) as f64);
    let grid: Vec<f64> = (0..GRID_POINTS).map(|i| T_MIN * ratio.powi(i as i32)).collect();
    let losses: Vec<f64> = grid.iter().map(|&t| lp.nll(t)).collect();
    let best = argmin(&losses);

    let mut lo = grid[best.saturating_sub(1)];
    let mut hi = grid[(best + 1).min(GRID_POINTS - 1)];
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - phi * (hi - lo);
    let mut d = lo + phi * (hi - lo);
    let (mut fc, mut fd) = (lp.nll(c), lp.nll(d));
    while hi - lo >= 1e-4 {
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - phi * (hi - lo);
            fc = lp.nll(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + phi * (hi - lo);
            fd = lp.nll(d);
        }
    }
    let refined = 0.5 * (lo + hi);
    let candidates = [(refined, lp.nll(refined)), (grid[best], losses[best]), (1.0, lp.nll(1.0))];
    let (t, _) = candidates
        .into_iter()
        .fold((1.0, f64::INFINITY), |acc, (t, f)| if f < acc.1 { (t, f) } else { acc });
    Temperature::new(t)
}

fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x < v[best] {
            best = i;
        }
    }
    best
}

/// Replaces every probability row by `softmax(ln p / t)`.
pub fn apply_temperature(dataset: &Dataset, t: Temperature) -> Result<Dataset> {
    let probs = dataset.probabilities();
    let mut out = Matrix::zeros(probs.rows(), probs.cols());
    for i in 0..probs.rows() {
        let row = out.row_mut(i);
        for (o, &p) in row.iter_mut().zip(probs.row(i)) {
            *o = p.max(PROB_FLOOR).ln() / t.0;
        }
        softmax_in_place(row);
    }
    dataset.with_probabilities(out)
}

/// Expected calibration error over equal-width confidence bins.
pub fn expected_calibration_error(view: &DatasetView<'_>, bins: usize) -> Result<f64> {
    if bins == 0 {
        return Err(Error::InvalidArgument("need at least one bin".into()));
    }
    if !view.is_labeled() {
        return Err(Error::LabelsRequired(view.source().name().to_string()));
    }
    if view.is_empty() {
        return Err(Error::EmptyView);
    }
    let mut conf = vec![0.0; bins];
    let mut hits = vec![0.0; bins];
    let mut count = vec![0usize; bins];
    for i in 0..view.len() {
        let row = view.prob_row(i);
        let j = argmax(&row);
        let c = row[j];
        let b = ((c * bins as f64) as usize).min(bins - 1);
        conf[b] += c;
        count[b] += 1;
        if Some(view.classes().ids()[j]) == view.label(i) {
            hits[b] += 1.0;
        }
    }
    let n = view.len() as f64;
    Ok((0..bins)
        .filter(|&b| count[b] > 0)
        .map(|b| (conf[b] - hits[b]).abs() / n)
        .sum())
}

/// Accuracy of a view; re-exported here for calibration checks.
pub fn view_accuracy(view: &DatasetView<'_>) -> Result<f64> {
    accuracy(view)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ClassId;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ds(rows: &[&[f64]]) -> Dataset {
        Dataset::new("d", Matrix::from_rows(rows).unwrap(), LabelSpace::range(rows[0].len() as u64)).unwrap()
    }

    fn labeled(rows: &[&[f64]], labels: &[u64]) -> Dataset {
        ds(rows).with_labels(labels.iter().copied().map(ClassId).collect()).unwrap()
    }

    #[test]
    fn summary_examples() {
        let d = ds(&[&[0.9, 0.1], &[0.7, 0.3]]);
        assert!((summarize(&d.full_view()).unwrap().avg_confidence - 0.8).abs() < 1e-12);

        let u = ds(&[&[0.25, 0.25, 0.25, 0.25]]);
        assert!((summarize(&u.full_view()).unwrap().avg_entropy - 4f64.ln()).abs() < 1e-12);
        assert!((4f64.ln() - 1.386294).abs() < 1e-6);

        let one_hot = ds(&[&[1.0, 0.0]]);
        let s = summarize(&one_hot.full_view()).unwrap();
        assert_eq!((s.avg_confidence, s.avg_entropy), (1.0, 0.0));
    }

    #[test]
    fn doc_of_constructed_rows() {
        // AC 0.8 on base, 0.6 on target
        let b = ds(&[&[0.9, 0.1], &[0.7, 0.3]]);
        let t = ds(&[&[0.6, 0.4], &[0.4, 0.6]]);
        assert!((doc(&b, &t).unwrap() - 0.2).abs() < 1e-12);
        assert_eq!(doc(&b, &b).unwrap(), 0.0);
        assert_eq!(doc(&t, &b).unwrap(), -doc(&b, &t).unwrap());
    }

    #[test]
    fn doe_of_one_hot_vs_uniform() {
        let b = ds(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let t = ds(&[&[0.5, 0.5], &[0.5, 0.5]]);
        assert!((doe(&b, &t).unwrap() + 2f64.ln()).abs() < 1e-12);
        assert_eq!(doe(&b, &b).unwrap(), 0.0);
        assert_eq!(doe(&t, &b).unwrap(), -doe(&b, &t).unwrap());
    }

    #[test]
    fn doc_uses_the_label_intersection() {
        let b = labeled(&[&[0.9, 0.05, 0.05], &[0.2, 0.2, 0.6]], &[0, 2]);
        let t = labeled(&[&[0.7, 0.2, 0.1]], &[0])
            .with_label_space(LabelSpace::new(vec![ClassId(0), ClassId(1)]).unwrap())
            .unwrap();
        // B′ keeps row 0 only, columns {0, 1}
        assert!((doc(&b, &t).unwrap() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn disjoint_labels_propagate() {
        let b = labeled(&[&[0.5, 0.5]], &[0]).with_label_space(LabelSpace::new(vec![ClassId(0)]).unwrap()).unwrap();
        let t = labeled(&[&[0.5, 0.5]], &[1]).with_label_space(LabelSpace::new(vec![ClassId(1)]).unwrap()).unwrap();
        assert!(matches!(doc(&b, &t), Err(Error::DisjointLabels)));
    }

    #[test]
    fn doc_feat_examples() {
        assert!((doc_feat_predict(0.76, 0.13).unwrap() - 0.63).abs() < 1e-12);
        assert_eq!(doc_feat_predict(0.42, 0.0).unwrap(), 0.42);
        assert_eq!(doc_feat_predict(0.3, 0.5).unwrap(), 0.0);
        assert!(doc_feat_predict(1.5, 0.0).is_err());
    }

    #[test]
    fn temperature_must_be_positive() {
        assert!(Temperature::new(0.0).is_err());
        assert!(Temperature::new(f64::INFINITY).is_err());
        assert!(Temperature::new(2.0).is_ok());
    }

    #[test]
    fn apply_temperature_examples() {
        let d = ds(&[&[0.6, 0.4], [0.1, 0.7, 0.2][..2].iter().map(|v| v / 0.8).collect::<Vec<_>>().as_slice()]);
        let same = apply_temperature(&d, Temperature::new(1.0).unwrap()).unwrap();
        for (a, b) in same.probabilities().as_slice().iter().zip(d.probabilities().as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }

        let flat = apply_temperature(&d, Temperature::new(1e6).unwrap()).unwrap();
        assert!(flat.probabilities().as_slice().iter().all(|p| (p - 0.5).abs() < 1e-4));

        let sharp = apply_temperature(&ds(&[&[0.6, 0.4]]), Temperature::new(0.5).unwrap()).unwrap();
        let p = sharp.probabilities().get(0, 0);
        assert!((p - 0.36 / 0.52).abs() < 1e-12);
        assert!((p - 0.6923).abs() < 1e-4);
    }

    /// Labels drawn from the rows' own probabilities: calibrated by construction.
    fn sampled(n: usize, sharpen: bool, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let raw: Vec<f64> = (0..3).map(|_| rng.random::<f64>().powi(3) + 0.01).collect();
            let s: f64 = raw.iter().sum();
            let p: Vec<f64> = raw.iter().map(|v| v / s).collect();
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut y = 2;
            for (j, pj) in p.iter().enumerate() {
                acc += pj;
                if u < acc {
                    y = j;
                    break;
                }
            }
            labels.push(ClassId(y as u64));
            rows.push(if sharpen {
                let sq: Vec<f64> = p.iter().map(|v| v * v).collect();
                let s: f64 = sq.iter().sum();
                sq.into_iter().map(|v| v / s).collect()
            } else {
                p
            });
        }
        Dataset::new("s", Matrix::from_rows(&rows).unwrap(), LabelSpace::range(3))
            .unwrap()
            .with_labels(labels)
            .unwrap()
    }

    #[test]
    fn calibrated_view_fits_unit_temperature() {
        let d = sampled(20_000, false, 5);
        let t = fit_temperature(&d.full_view()).unwrap().value();
        assert!((t - 1.0).abs() < 0.05, "T = {t}");
    }

    #[test]
    fn sharpened_view_fits_temperature_above_one() {
        let d = sampled(20_000, true, 6);
        let view = d.full_view();
        let t = fit_temperature(&view).unwrap();
        // grid oracle: squaring doubles the logits, so the optimum sits near 2
        let oracle = (0..400)
            .map(|i| 0.05 * 1.015f64.powi(i))
            .map(|t| (t, temperature_nll(&view, Temperature::new(t).unwrap()).unwrap()))
            .fold((1.0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        assert!(t.value() > 1.0);
        assert!((t.value() - oracle.0).abs() / oracle.0 < 0.02, "{} vs {}", t.value(), oracle.0);
        let nll_t = temperature_nll(&view, t).unwrap();
        assert!(nll_t <= temperature_nll(&view, Temperature::new(1.0).unwrap()).unwrap() + 1e-9);
        assert!(nll_t <= oracle.1 + 1e-9);
    }

    #[test]
    fn temperature_needs_labels() {
        let d = ds(&[&[0.5, 0.5]]);
        assert!(matches!(fit_temperature(&d.full_view()), Err(Error::LabelsRequired(_))));
    }

    #[test]
    fn exact_zeros_are_floored() {
        let d = labeled(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 0.0]], &[0, 1, 1]);
        let t = fit_temperature(&d.full_view()).unwrap();
        assert!(t.value().is_finite());
        assert!(temperature_nll(&d.full_view(), t).unwrap().is_finite());
    }

    #[test]
    fn ece_is_zero_for_matching_confidence() {
        let d = labeled(&[&[1.0, 0.0], &[0.0, 1.0]], &[0, 1]);
        assert_eq!(expected_calibration_error(&d.full_view(), 10).unwrap(), 0.0);
    }
}
