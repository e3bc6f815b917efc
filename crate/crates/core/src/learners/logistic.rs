//! Multinomial logistic regression.
//!
//! Minimizes `mean NLL + (l2 / 2) * ||W||²` (bias unpenalized) by full-batch
//! gradient descent. Each step tries a Barzilai–Borwein step length and
//! halves it until the Armijo condition holds, so the objective never
//! increases. Parameters start at zero, which makes fits seed-free.

use serde::{Deserialize, Serialize};

use crate::data::{argmax, ClassId, LabelSpace};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticConfig {
    pub max_iter: usize,
    /// Stop once the gradient norm falls below this.
    pub tol: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        Self {
            max_iter: 5000,
            tol: 1e-6,
        }
    }
}

/// Softmax-linear classifier: `p = softmax(W x + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    /// K × D.
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub classes: LabelSpace,
}

impl LinearModel {
    pub fn zeros(classes: LabelSpace, dim: usize) -> Self {
        let k = classes.len();
        Self {
            weights: Matrix::zeros(k, dim),
            bias: vec![0.0; k],
            classes,
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.cols()
    }

    fn check_dim(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "model expects {} features, got {}",
                self.dim(),
                x.cols()
            )));
        }
        Ok(())
    }

    pub fn logits_row(&self, x: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.bias[j] + dot(self.weights.row(j), x);
        }
    }

    pub fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        self.check_dim(x)?;
        let k = self.classes.len();
        let mut out = Matrix::zeros(x.rows(), k);
        for i in 0..x.rows() {
            let row = out.row_mut(i);
            self.logits_row(x.row(i), row);
            softmax_in_place(row);
        }
        Ok(out)
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<ClassId>> {
        let p = self.predict_proba(x)?;
        Ok(p.iter_rows().map(|r| self.classes.ids()[argmax(r)]).collect())
    }
}

pub fn predict_proba(model: &LinearModel, x: &Matrix) -> Result<Matrix> {
    model.predict_proba(x)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn softmax_in_place(z: &mut [f64]) {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for v in z.iter_mut() {
        *v = (*v - m).exp();
        s += *v;
    }
    for v in z.iter_mut() {
        *v /= s;
    }
}

/// Training data with labels mapped to column indices.
pub struct LogisticProblem<'a> {
    x: &'a Matrix,
    y: Vec<usize>,
    k: usize,
    l2: f64,
}

impl<'a> LogisticProblem<'a> {
    pub fn new(x: &'a Matrix, y: &[ClassId], classes: &LabelSpace, l2: f64) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} rows but {} labels",
                x.rows(),
                y.len()
            )));
        }
        if !x.is_finite() {
            return Err(Error::NonFinite("training features"));
        }
        if !(l2.is_finite() && l2 >= 0.0) {
            return Err(Error::InvalidArgument(format!("l2 must be ≥ 0, got {l2}")));
        }
        let y = y
            .iter()
            .map(|&c| classes.position(c).ok_or(Error::UnknownClass(c.0)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            x,
            y,
            k: classes.len(),
            l2,
        })
    }

    /// Parameters are `W` row-major followed by `b`.
    pub fn n_params(&self) -> usize {
        self.k * (self.x.cols() + 1)
    }

    /// Objective and, when `grad` is given, its gradient.
    pub fn eval(&self, params: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let (n, d, k) = (self.x.rows(), self.x.cols(), self.k);
        let (w, b) = params.split_at(k * d);
        let mut grad = grad;
        if let Some(g) = grad.as_deref_mut() {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
        let mut z = vec![0.0; k];
        let mut nll = 0.0;
        for i in 0..n {
            let xi = self.x.row(i);
            for j in 0..k {
                z[j] = b[j] + dot(&w[j * d..(j + 1) * d], xi);
            }
            let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            nll += lse - z[self.y[i]];
            if let Some(g) = grad.as_deref_mut() {
                let (gw, gb) = g.split_at_mut(k * d);
                for j in 0..k {
                    let r = (z[j] - lse).exp() - if j == self.y[i] { 1.0 } else { 0.0 };
                    if r != 0.0 {
                        for (gv, &xv) in gw[j * d..(j + 1) * d].iter_mut().zip(xi) {
                            *gv += r * xv;
                        }
                    }
                    gb[j] += r;
                }
            }
        }
        let inv_n = 1.0 / n as f64;
        let penalty = 0.5 * self.l2 * w.iter().map(|v| v * v).sum::<f64>();
        if let Some(g) = grad {
            g.iter_mut().for_each(|v| *v *= inv_n);
            for (gv, &wv) in g[..k * d].iter_mut().zip(w) {
                *gv += self.l2 * wv;
            }
        }
        nll * inv_n + penalty
    }
}

/// Fits the model; returns it with the objective after every accepted step
/// (first entry is the objective at zero).
pub fn fit_logistic_traced(
    x: &Matrix,
    y: &[ClassId],
    l2: f64,
    cfg: &LogisticConfig,
) -> Result<(LinearModel, Vec<f64>)> {
    let classes = LabelSpace::from_unsorted(y.iter().copied());
    if classes.len() < 2 {
        return Err(Error::SingleClass);
    }
    let problem = LogisticProblem::new(x, y, &classes, l2)?;
    let np = problem.n_params();
    let mut theta = vec![0.0; np];
    let mut grad = vec![0.0; np];
    let mut f = problem.eval(&theta, Some(&mut grad));
    let mut trace = vec![f];

    let mut trial = vec![0.0; np];
    let mut trial_grad = vec![0.0; np];
    let mut step = 1.0;
    for _ in 0..cfg.max_iter {
        let gnorm2: f64 = grad.iter().map(|g| g * g).sum();
        if gnorm2.sqrt() < cfg.tol {
            break;
        }
        let mut s = step;
        let mut accepted = false;
        for _ in 0..60 {
            for ((t, &th), &g) in trial.iter_mut().zip(&theta).zip(&grad) {
                *t = th - s * g;
            }
            let ft = problem.eval(&trial, None);
            if ft <= f - 1e-4 * s * gnorm2 {
                accepted = true;
                break;
            }
            s *= 0.5;
        }
        if !accepted {
            break;
        }
        let ft = problem.eval(&trial, Some(&mut trial_grad));
        // Barzilai–Borwein length for the next trial step
        let (mut ss, mut sy) = (0.0, 0.0);
        for i in 0..np {
            let ds = trial[i] - theta[i];
            ss += ds * ds;
            sy += ds * (trial_grad[i] - grad[i]);
        }
        step = if sy > 0.0 && (ss / sy).is_finite() { ss / sy } else { s * 2.0 };
        std::mem::swap(&mut theta, &mut trial);
        std::mem::swap(&mut grad, &mut trial_grad);
        f = ft;
        trace.push(f);
    }

    let d = x.cols();
    let k = classes.len();
    let weights = Matrix::new(k, d, theta[..k * d].to_vec())?;
    let bias = theta[k * d..].to_vec();
    Ok((
        LinearModel {
            weights,
            bias,
            classes,
        },
        trace,
    ))
}

pub fn fit_logistic(x: &Matrix, y: &[ClassId], l2: f64, cfg: &LogisticConfig) -> Result<LinearModel> {
    fit_logistic_traced(x, y, l2, cfg).map(|(m, _)| m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn col(v: &[f64]) -> Matrix {
        Matrix::new(v.len(), 1, v.to_vec()).unwrap()
    }

    fn ids(v: &[u64]) -> Vec<ClassId> {
        v.iter().copied().map(ClassId).collect()
    }

    #[test]
    fn separable_one_dimensional() {
        let x = col(&[-1.0, -1.0, -1.0, 1.0, 1.0, 1.0]);
        let y = ids(&[0, 0, 0, 1, 1, 1]);
        let m = fit_logistic(&x, &y, 1e-3, &LogisticConfig::default()).unwrap();
        assert_eq!(m.predict(&col(&[-1.0, 1.0])).unwrap(), ids(&[0, 1]));
    }

    #[test]
    fn uninformative_features_predict_near_prior() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 2000;
        let x = Matrix::new(n, 2, (0..2 * n).map(|_| rng.random::<f64>()).collect()).unwrap();
        // 70/30 prior independent of x
        let y: Vec<ClassId> = (0..n).map(|_| ClassId(u64::from(rng.random::<f64>() < 0.3))).collect();
        let m = fit_logistic(&x, &y, 1e-2, &LogisticConfig::default()).unwrap();
        let pred = m.predict(&x).unwrap();
        let acc = pred.iter().zip(&y).filter(|(a, b)| a == b).count() as f64 / n as f64;
        let majority = y.iter().filter(|c| c.0 == 0).count() as f64 / n as f64;
        assert!((acc - majority).abs() < 0.02, "acc {acc} vs majority {majority}");
    }

    #[test]
    fn huge_l2_collapses_to_priors() {
        let x = col(&[-2.0, -1.0, 0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        let y = ids(&[0, 0, 0, 1, 1, 1, 1, 1]);
        let m = fit_logistic(&x, &y, 1e6, &LogisticConfig::default()).unwrap();
        assert!(m.weights.as_slice().iter().all(|w| w.abs() < 1e-5));
        let p = m.predict_proba(&col(&[100.0])).unwrap();
        assert!((p.get(0, 1) - 5.0 / 8.0).abs() < 1e-4);
    }

    #[test]
    fn single_class_rejected() {
        let err = fit_logistic(&col(&[1.0, 2.0]), &ids(&[3, 3]), 0.0, &LogisticConfig::default());
        assert!(matches!(err, Err(Error::SingleClass)));
    }

    #[test]
    fn non_finite_rejected() {
        let err = fit_logistic(&col(&[1.0, f64::NAN]), &ids(&[0, 1]), 0.0, &LogisticConfig::default());
        assert!(matches!(err, Err(Error::NonFinite(_))));
    }

    #[test]
    fn objective_never_increases() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 300;
        let x = Matrix::new(n, 3, (0..3 * n).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect()).unwrap();
        let y: Vec<ClassId> = (0..n)
            .map(|i| {
                let r = x.row(i);
                ClassId(if r[0] + 0.5 * r[1] > 0.3 { 2 } else if r[2] > 0.0 { 1 } else { 0 })
            })
            .collect();
        let (_, trace) = fit_logistic_traced(&x, &y, 1e-3, &LogisticConfig::default()).unwrap();
        assert!(trace.len() > 2);
        assert!(trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn zero_model_is_uniform() {
        let m = LinearModel::zeros(LabelSpace::range(4), 3);
        let p = m.predict_proba(&Matrix::new(2, 3, vec![1.0, -2.0, 3.0, 0.0, 0.0, 9.0]).unwrap()).unwrap();
        assert!(p.as_slice().iter().all(|&v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn softmax_is_shift_invariant_and_saturates() {
        let mut a = [1.0, 2.0, 3.0];
        let mut b = [101.0, 102.0, 103.0];
        softmax_in_place(&mut a);
        softmax_in_place(&mut b);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-15);
        }
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);

        let mut m = LinearModel::zeros(LabelSpace::range(3), 2);
        m.weights.set(1, 0, 1.0);
        let far = m.predict_proba(&Matrix::new(1, 2, vec![1e3, 0.0]).unwrap()).unwrap();
        assert!(far.get(0, 1) > 1.0 - 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let m = LinearModel::zeros(LabelSpace::range(2), 3);
        assert!(m.predict_proba(&Matrix::zeros(1, 2)).is_err());
    }
}
