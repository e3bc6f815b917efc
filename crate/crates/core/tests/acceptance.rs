//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Reference values come from closed forms or brute-force oracles
//! computed here, independently of the library code under test.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use shiftcast::confidence::{apply_temperature, doc, doe, fit_temperature, summarize, temperature_nll, Temperature};
use shiftcast::distances::{a_proxy, discriminative_distance, frechet, mmd, DiscriminatorConfig};
use shiftcast::io::{read_tensor, write_tensor, Tensor};
use shiftcast::learners::{fit_ols, LogisticProblem, MlpRegressor};
use shiftcast::pipeline::{fit_predictor, predict_accuracy, Method, PredictorConfig, ShiftMeasurement};
use shiftcast::workbench::{
    apply_shift, gen_task, make_calibrated_oracle, run_demo, train_reference_classifier, DemoConfig, ShiftKind,
};
use shiftcast::{accuracy, ClassId, Dataset, LabelSpace, Matrix};

struct Outcome {
    pass: bool,
    detail: String,
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn random_dataset(rng: &mut ChaCha8Rng, i: usize) -> Dataset {
    let n = rng.random_range(20..300);
    let k = rng.random_range(2..8);
    let d = rng.random_range(1..6);
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>().powi(2)).collect();
        let s: f64 = raw.iter().sum();
        rows.push(raw.into_iter().map(|v| v / s).collect::<Vec<_>>());
    }
    let labels = (0..n).map(|_| ClassId(rng.random_range(0..k as u64))).collect();
    let feats = Matrix::new(n, d, (0..n * d).map(|_| 10.0 * normal(rng)).collect()).unwrap();
    Dataset::new(format!("d{i}"), Matrix::from_rows(&rows).unwrap(), LabelSpace::range(k as u64))
        .unwrap()
        .with_labels(labels)
        .unwrap()
        .with_features(feats)
        .unwrap()
}

fn identity_suite() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst_frechet = 0.0f64;
    let mut exact = true;
    for i in 0..20 {
        let b = random_dataset(&mut rng, i);
        let f = b.features().unwrap();
        exact &= doc(&b, &b).unwrap() == 0.0 && doe(&b, &b).unwrap() == 0.0 && mmd(f, f).unwrap() == 0.0;
        worst_frechet = worst_frechet.max(frechet(f, f).unwrap());
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        pass: exact && worst_frechet < 1e-8 && secs < 10.0,
        detail: format!("DoC/DoE/MMD exact zero: {exact}, max Frechet(B,B) {worst_frechet:.2e}, {secs:.2}s"),
    }
}

fn gaussian_sample(rng: &mut ChaCha8Rng, n: usize, mean: &[f64], cov: &DMatrix<f64>) -> Matrix {
    let l = cov.clone().cholesky().unwrap().l();
    let d = mean.len();
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n {
        let z = DVector::from_iterator(d, (0..d).map(|_| normal(rng)));
        let x = &l * z;
        data.extend(x.iter().zip(mean).map(|(v, m)| v + m));
    }
    Matrix::new(n, d, data).unwrap()
}

/// `||μa − μb||² + tr Σa + tr Σb − 2 Σ sqrt(λ(Σa Σb))`, using the eigenvalues
/// of the (non-symmetric) product.
fn frechet_closed_form(ma: &[f64], ca: &DMatrix<f64>, mb: &[f64], cb: &DMatrix<f64>) -> f64 {
    let mean: f64 = ma.iter().zip(mb).map(|(a, b)| (a - b) * (a - b)).sum();
    let cross: f64 = (ca * cb).complex_eigenvalues().iter().map(|z| z.sqrt().re).sum();
    mean + ca.trace() + cb.trace() - 2.0 * cross
}

fn random_spd(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| normal(rng));
    &a * a.transpose() / d as f64 + DMatrix::identity(d, d) * 0.5
}

fn frechet_closed_form_check() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let (ca, cb) = (random_spd(&mut rng, 4), random_spd(&mut rng, 4));
    let (ma, mb) = (vec![0.0, 1.0, -1.0, 0.5], vec![1.5, 0.0, 0.5, -0.5]);
    let xa = gaussian_sample(&mut rng, 50_000, &ma, &ca);
    let xb = gaussian_sample(&mut rng, 50_000, &mb, &cb);
    let analytic = frechet_closed_form(&ma, &ca, &mb, &cb);
    let empirical = frechet(&xa, &xb).unwrap();
    let rel = (empirical - analytic).abs() / analytic;
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        pass: rel < 0.02 && secs < 30.0,
        detail: format!("empirical {empirical:.4} vs analytic {analytic:.4}, rel {rel:.4}, {secs:.2}s"),
    }
}

fn a_proxy_check() -> Outcome {
    let got = [a_proxy(0.0), a_proxy(0.25), a_proxy(0.5)];
    Outcome {
        pass: got == [2.0, 1.0, 0.0],
        detail: format!("errors 0, 0.25, 0.5 -> {got:?}"),
    }
}

fn calibration_law() -> Outcome {
    let task = gen_task(31, 10, 16, 2000).unwrap();
    let clf = train_reference_classifier(&task).unwrap();
    let clean = clf.featurize("b", &apply_shift(&task.task, ShiftKind::FeatureNoise, 0.0, 10_000, 1).unwrap()).unwrap();
    let noisy = clf.featurize("t", &apply_shift(&task.task, ShiftKind::FeatureNoise, 1.0, 10_000, 2).unwrap()).unwrap();
    let (_, b) = make_calibrated_oracle(&clean.full_view(), 15, "b").unwrap();
    let (_, t) = make_calibrated_oracle(&noisy.full_view(), 15, "t").unwrap();
    let gap_ac = |d: &Dataset| {
        let ac = summarize(&d.full_view()).unwrap().avg_confidence;
        let acc = accuracy(&d.full_view()).unwrap();
        (ac, acc)
    };
    let ((ac_b, acc_b), (ac_t, acc_t)) = (gap_ac(&b), gap_ac(&t));
    let doc_err = (doc(&b, &t).unwrap() - (acc_b - acc_t)).abs();
    let worst = (ac_b - acc_b).abs().max((ac_t - acc_t).abs());
    Outcome {
        pass: worst < 0.01 && doc_err < 0.02,
        detail: format!("max |AC - acc| {worst:.2e}, |DoC - gap| {doc_err:.2e} (gap {:.3})", acc_b - acc_t),
    }
}

fn discriminator_chance() -> Outcome {
    let sample = |seed: u64, shift: f64| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::new(2000, 8, (0..2000 * 8).map(|_| normal(&mut rng) + shift).collect()).unwrap()
    };
    let mut pass = true;
    let mut accs = Vec::new();
    let mut proxies = Vec::new();
    for seed in 0..5u64 {
        let r = discriminative_distance(&sample(2 * seed + 1000, 0.0), &sample(2 * seed + 1001, 0.0), &DiscriminatorConfig::with_seed(seed))
            .unwrap();
        pass &= (0.45..=0.55).contains(&r.accuracy) && (-0.2..=0.2).contains(&r.a_proxy);
        accs.push(r.accuracy);
        proxies.push(r.a_proxy);
    }
    let far = discriminative_distance(&sample(7, 0.0), &sample(8, 3.0), &DiscriminatorConfig::default()).unwrap();
    pass &= far.accuracy >= 0.99;
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ");
    Outcome {
        pass,
        detail: format!("same-dist acc [{}], A-proxy [{}], separable acc {:.4}", fmt(&accs), fmt(&proxies), far.accuracy),
    }
}

fn measurement(name: &str, s: f64, base: f64, gap: Option<f64>) -> ShiftMeasurement {
    ShiftMeasurement {
        base_name: "base".into(),
        target_name: name.into(),
        group: "g".into(),
        features: BTreeMap::from([(Method::Doc, s)]),
        base_acc_on_intersection: base,
        true_target_acc: gap.map(|g| base - g),
        true_gap: gap,
        base_temperature: None,
    }
}

fn regression_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let (slope, intercept, base) = (1.7, 0.02, 0.85);
    let cal: Vec<_> = (0..24)
        .map(|i| {
            let s: f64 = rng.random_range(0.0..0.3);
            measurement(&format!("c{i}"), s, base, Some(intercept + slope * s))
        })
        .collect();
    let p = fit_predictor(&cal, Method::Doc, &PredictorConfig::default()).unwrap();
    let mut worst_pred = 0.0f64;
    for i in 0..50 {
        let s: f64 = rng.random_range(0.0..0.3);
        let oracle = base - (intercept + slope * s);
        let got = predict_accuracy(&p, &measurement(&format!("v{i}"), s, base, None)).unwrap();
        worst_pred = worst_pred.max((got - oracle).abs());
    }

    // orthogonality of OLS residuals on noisy multi-feature data
    let (n, m) = (40, 3);
    let x = Matrix::new(n, m, (0..n * m).map(|_| normal(&mut rng)).collect()).unwrap();
    let g: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
    let fit = fit_ols(&x, &g, 0.0).unwrap();
    let resid: Vec<f64> = x.iter_rows().zip(&g).map(|(r, y)| y - fit.predict(r).unwrap()).collect();
    let mut worst_dot = resid.iter().sum::<f64>().abs();
    for j in 0..m {
        worst_dot = worst_dot.max(resid.iter().enumerate().map(|(i, e)| e * x.get(i, j)).sum::<f64>().abs());
    }
    Outcome {
        pass: worst_pred < 1e-6 && worst_dot < 1e-8,
        detail: format!("max prediction error {worst_pred:.2e}, max residual dot {worst_dot:.2e}"),
    }
}

fn relative_gap(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: f64 = analytic.iter().zip(numeric).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let na = analytic.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nn = numeric.iter().map(|v| v * v).sum::<f64>().sqrt();
    diff / na.max(nn).max(1e-12)
}

fn central_difference(f: impl Fn(&[f64]) -> f64, at: &[f64], h: f64) -> Vec<f64> {
    let mut p = at.to_vec();
    (0..at.len())
        .map(|i| {
            p[i] = at[i] + h;
            let up = f(&p);
            p[i] = at[i] - h;
            let down = f(&p);
            p[i] = at[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn gradient_checks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let (n, d) = (30, 4);
    let x = Matrix::new(n, d, (0..n * d).map(|_| normal(&mut rng)).collect()).unwrap();
    let y: Vec<ClassId> = (0..n).map(|i| ClassId((i % 3) as u64)).collect();
    let problem = LogisticProblem::new(&x, &y, &LabelSpace::range(3), 0.05).unwrap();

    let s = Matrix::new(n, 2, (0..n * 2).map(|_| normal(&mut rng)).collect()).unwrap();
    let g: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
    let mut net = MlpRegressor::init(&[2, 6, 5, 1], 9);

    let (mut worst_lr, mut worst_mlp) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let theta: Vec<f64> = (0..problem.n_params()).map(|_| normal(&mut rng)).collect();
        let mut grad = vec![0.0; theta.len()];
        problem.eval(&theta, Some(&mut grad));
        let numeric = central_difference(|p| problem.eval(p, None), &theta, 1e-5);
        worst_lr = worst_lr.max(relative_gap(&grad, &numeric));

        let params: Vec<f64> = (0..net.n_params()).map(|_| 0.8 * normal(&mut rng)).collect();
        net.set_params(&params).unwrap();
        let (_, grad) = net.mse_and_grad(&s, &g).unwrap();
        let numeric = central_difference(
            |p| {
                let mut probe = net.clone();
                probe.set_params(p).unwrap();
                probe.mse_and_grad(&s, &g).unwrap().0
            },
            &params,
            1e-6,
        );
        worst_mlp = worst_mlp.max(relative_gap(&grad, &numeric));
    }
    Outcome {
        pass: worst_lr < 1e-5 && worst_mlp < 1e-5,
        detail: format!("max relative error: logistic {worst_lr:.2e}, MLP {worst_mlp:.2e}"),
    }
}

fn end_to_end() -> Outcome {
    let start = Instant::now();
    let (mut beats_base, mut beats_ac) = (0, 0);
    let mut lines = Vec::new();
    for seed in 0..10 {
        let r = run_demo(seed, &DemoConfig::default()).unwrap();
        let (d, b, a) = (
            r.mae(Method::Doc).unwrap(),
            r.mae(Method::BaseAcc).unwrap(),
            r.mae(Method::Ac).unwrap(),
        );
        beats_base += usize::from(d < b);
        beats_ac += usize::from(d <= a);
        lines.push(format!("{d:.3}/{b:.3}/{a:.3}"));
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        pass: beats_base == 10 && beats_ac >= 8 && secs < 1200.0,
        detail: format!(
            "DoC<base_acc {beats_base}/10, DoC<=AC {beats_ac}/10, {secs:.1}s; MAE doc/base_acc/ac per seed: {}",
            lines.join(" ")
        ),
    }
}

fn temperature_scaling() -> Outcome {
    let task = gen_task(41, 10, 16, 2000).unwrap();
    let clf = train_reference_classifier(&task).unwrap();
    let data = clf.featurize("b", &apply_shift(&task.task, ShiftKind::FeatureNoise, 0.0, 10_000, 5).unwrap()).unwrap();
    let (_, oracle) = make_calibrated_oracle(&data.full_view(), 15, "o").unwrap();
    // squaring and renormalizing doubles every logit
    let sharp = oracle.probabilities().map(|p| p * p);
    let rows: Vec<Vec<f64>> = sharp
        .iter_rows()
        .map(|r| {
            let s: f64 = r.iter().sum();
            r.iter().map(|v| v / s).collect()
        })
        .collect();
    let sharp = oracle.with_probabilities(Matrix::from_rows(&rows).unwrap()).unwrap();
    let view = sharp.full_view();
    let t = fit_temperature(&view).unwrap();
    let nll_t = temperature_nll(&view, t).unwrap();
    let nll_1 = temperature_nll(&view, Temperature::new(1.0).unwrap()).unwrap();
    let scaled = apply_temperature(&sharp, t).unwrap();
    let top = |r: &[f64]| r.iter().enumerate().fold(0, |b, (i, v)| if *v > r[b] { i } else { b });
    let same_argmax = sharp
        .probabilities()
        .iter_rows()
        .zip(scaled.probabilities().iter_rows())
        .all(|(a, b)| top(a) == top(b));
    Outcome {
        pass: t.value() > 1.0 && nll_t <= nll_1 && same_argmax,
        detail: format!("T* {:.4}, NLL(T*) {nll_t:.5} vs NLL(1) {nll_1:.5}, argmax unchanged: {same_argmax}", t.value()),
    }
}

fn random_tensor(rng: &mut ChaCha8Rng) -> Tensor {
    let dims: Vec<usize> = if rng.random_bool(0.5) {
        vec![rng.random_range(0..50)]
    } else {
        vec![rng.random_range(0..20), rng.random_range(0..20)]
    };
    let len = dims.iter().product();
    if rng.random_bool(0.5) {
        Tensor::F64 {
            dims,
            data: (0..len).map(|_| f64::from_bits(rng.random::<u64>())).collect(),
        }
    } else {
        Tensor::I64 {
            dims,
            data: (0..len).map(|_| rng.random::<i64>()).collect(),
        }
    }
}

fn files_of(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect()
}

fn io_checks() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut exact = 0;
    for i in 0..200 {
        let t = random_tensor(&mut rng);
        let path = tmp.path().join(format!("t{i}.bin"));
        write_tensor(&path, &t).unwrap();
        exact += usize::from(read_tensor(&path).unwrap().bit_eq(&t));
    }
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_demo(0, &DemoConfig::default()).unwrap().write(&a).unwrap();
    run_demo(0, &DemoConfig::default()).unwrap().write(&b).unwrap();
    let (fa, fb) = (files_of(&a), files_of(&b));
    let identical = !fa.is_empty() && fa == fb;
    Outcome {
        pass: exact == 200 && identical,
        detail: format!("{exact}/200 tensors bit-exact, demo outputs byte-identical: {identical} ({} files)", fa.len()),
    }
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("identity suite", identity_suite),
        ("Frechet closed form", frechet_closed_form_check),
        ("A-proxy arithmetic", a_proxy_check),
        ("calibration law", calibration_law),
        ("discriminator chance level", discriminator_chance),
        ("regression exactness", regression_exactness),
        ("gradient checks", gradient_checks),
        ("end-to-end protocol", end_to_end),
        ("temperature scaling", temperature_scaling),
        ("I/O round trip and determinism", io_checks),
    ];
    let mut failed = 0;
    let total = Instant::now();
    for (name, check) in criteria {
        let start = Instant::now();
        let outcome = check();
        let status = if outcome.pass { "PASS" } else { "FAIL" };
        failed += usize::from(!outcome.pass);
        println!("{status} {name}: {} [{:.1?}]", outcome.detail, round(start.elapsed()));
    }
    println!("{} of {} criteria passed in {:.1?}", 10 - failed, 10, round(total.elapsed()));
    if failed > 0 {
        std::process::exit(1);
    }
}

fn round(d: Duration) -> Duration {
    Duration::from_millis(d.as_millis() as u64)
}
