//! Measure shift features for (base, target) pairs, fit accuracy-gap
//! predictors on a calibration group, and evaluate them on validation
//! groups.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::confidence::{apply_temperature, doc_feat_predict, fit_temperature, summarize, Temperature};
use crate::data::{accuracy, intersect_labels, Dataset, LabelSpace};
use crate::distances::{
    discriminative_distance, frechet, mmd, DiscriminatorConfig, RotationConfig, RotationModel,
};
use crate::error::{Error, Result};
use crate::io::{read_tensor, write_tensor, Catalog, Tensor};
use crate::learners::{Dense, LinearRegressor, MlpConfig, MlpRegressor, Regressor, RegressorKind};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    BaseAcc,
    Ac,
    AcTempscaling,
    DocFeat,
    Frechet,
    DiscAProxy,
    DiscAuc,
    Mmd,
    Rotation,
    Doe,
    Doc,
}

impl Method {
    pub const ALL: [Method; 11] = [
        Method::BaseAcc,
        Method::Ac,
        Method::AcTempscaling,
        Method::DocFeat,
        Method::Frechet,
        Method::DiscAProxy,
        Method::DiscAuc,
        Method::Mmd,
        Method::Rotation,
        Method::Doe,
        Method::Doc,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::BaseAcc => "base_acc",
            Method::Ac => "ac",
            Method::AcTempscaling => "ac_tempscaling",
            Method::DocFeat => "doc_feat",
            Method::Frechet => "frechet",
            Method::DiscAProxy => "disc_a_proxy",
            Method::DiscAuc => "disc_auc",
            Method::Mmd => "mmd",
            Method::Rotation => "rotation",
            Method::Doe => "doe",
            Method::Doc => "doc",
        }
    }

    /// The four baselines that estimate accuracy directly.
    pub fn needs_regressor(self) -> bool {
        !matches!(self, Method::BaseAcc | Method::Ac | Method::AcTempscaling | Method::DocFeat)
    }

    fn code(self) -> usize {
        Method::ALL.iter().position(|&m| m == self).expect("listed")
    }

    /// Parses a comma-separated list; `all` expands to every method.
    pub fn parse_list(s: &str) -> Result<Vec<Method>> {
        let mut out = BTreeSet::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            if part == "all" {
                out.extend(Method::ALL);
            } else {
                out.insert(part.parse()?);
            }
        }
        if out.is_empty() {
            return Err(Error::InvalidArgument("no methods given".into()));
        }
        Ok(out.into_iter().collect())
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::UnknownMethod(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MeasureConfig {
    pub discriminator: DiscriminatorConfig,
    pub rotation: RotationConfig,
}

impl MeasureConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            discriminator: DiscriminatorConfig::with_seed(seed),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftMeasurement {
    pub base_name: String,
    pub target_name: String,
    pub group: String,
    /// One scalar per requested method.
    pub features: BTreeMap<Method, f64>,
    pub base_acc_on_intersection: f64,
    pub true_target_acc: Option<f64>,
    pub true_gap: Option<f64>,
    /// Temperature fitted on the base, when `ac_tempscaling` was measured.
    pub base_temperature: Option<f64>,
}

impl ShiftMeasurement {
    pub fn feature(&self, method: Method) -> Result<f64> {
        self.features.get(&method).copied().ok_or_else(|| Error::MissingFeature {
            target: self.target_name.clone(),
            method: method.to_string(),
        })
    }

    pub fn is_labeled(&self) -> bool {
        self.true_gap.is_some()
    }
}

/// Quantities that depend on the base alone (or on the base and the
/// intersected label space), computed once and shared across targets.
pub struct BaseContext<'a> {
    base: &'a Dataset,
    methods: Vec<Method>,
    cfg: MeasureConfig,
    temperature: Option<Temperature>,
    rotation: BTreeMap<Vec<u64>, RotationModel>,
}

fn require_features(d: &Dataset, method: Method) -> Result<&Matrix> {
    d.features().ok_or(Error::MissingModality {
        method: method.to_string(),
        what: "features",
    })
}

fn require_rotations(d: &Dataset) -> Result<&[Matrix]> {
    d.rotated_features().ok_or(Error::MissingModality {
        method: Method::Rotation.to_string(),
        what: "rotated features",
    })
}

impl<'a> BaseContext<'a> {
    pub fn new(base: &'a Dataset, methods: &[Method], cfg: &MeasureConfig) -> Result<Self> {
        if !base.is_labeled() {
            return Err(Error::LabelsRequired(base.name().to_string()));
        }
        for &m in methods {
            match m {
                Method::Frechet | Method::Mmd | Method::DiscAProxy | Method::DiscAuc => {
                    require_features(base, m)?;
                }
                Method::Rotation => {
                    require_rotations(base)?;
                }
                _ => {}
            }
        }
        let temperature = if methods.contains(&Method::AcTempscaling) {
            Some(fit_temperature(&base.full_view())?)
        } else {
            None
        };
        let mut dedup = methods.to_vec();
        dedup.sort();
        dedup.dedup();
        Ok(Self {
            base,
            methods: dedup,
            cfg: cfg.clone(),
            temperature,
            rotation: BTreeMap::new(),
        })
    }

    /// Fits the rotation classifiers needed for these targets' label
    /// intersections.
    pub fn prepare(&mut self, targets: &[&Dataset]) -> Result<()> {
        if !self.methods.contains(&Method::Rotation) {
            return Ok(());
        }
        for t in targets {
            let both = intersect_labels(self.base, t)?;
            let key = space_key(&both);
            if !self.rotation.contains_key(&key) {
                let view = self.base.restrict(&both)?;
                let rot = view.rotated_features().expect("checked in new");
                self.rotation.insert(key, RotationModel::fit(&rot, &self.cfg.rotation)?);
            }
        }
        Ok(())
    }

    pub fn temperature(&self) -> Option<Temperature> {
        self.temperature
    }

    pub fn measure(&self, target: &Dataset, group: &str) -> Result<ShiftMeasurement> {
        let base = self.base;
        let both = intersect_labels(base, target)?;
        let bv = base.restrict(&both)?;
        let tv = target.restrict(&both)?;
        let base_acc = accuracy(&bv)?;

        let mut features = BTreeMap::new();
        let needs_conf = self.methods.iter().any(|m| matches!(m, Method::Ac | Method::Doc | Method::DocFeat | Method::Doe));
        let conf = if needs_conf { Some((summarize(&bv)?, summarize(&tv)?)) } else { None };
        let mut disc = None;
        for &m in &self.methods {
            let value = match m {
                Method::BaseAcc => base_acc,
                Method::Ac => conf.as_ref().expect("computed").1.avg_confidence,
                Method::Doc | Method::DocFeat => {
                    let (b, t) = conf.as_ref().expect("computed");
                    b.avg_confidence - t.avg_confidence
                }
                Method::Doe => {
                    let (b, t) = conf.as_ref().expect("computed");
                    b.avg_entropy - t.avg_entropy
                }
                Method::AcTempscaling => {
                    let t = self.temperature.expect("fitted when requested");
                    let scaled = apply_temperature(target, t)?;
                    summarize(&scaled.restrict(&both)?)?.avg_confidence
                }
                Method::Frechet | Method::Mmd | Method::DiscAProxy | Method::DiscAuc => {
                    require_features(target, m)?;
                    let bf = bv.features().expect("checked in new");
                    let tf = tv.features().expect("checked above");
                    match m {
                        Method::Frechet => frechet(&bf, &tf)?,
                        Method::Mmd => mmd(&bf, &tf)?,
                        _ => {
                            let report = match disc {
                                Some(r) => r,
                                None => {
                                    let r = discriminative_distance(&bf, &tf, &self.cfg.discriminator)?;
                                    disc = Some(r);
                                    r
                                }
                            };
                            if m == Method::DiscAuc {
                                report.auc
                            } else {
                                report.a_proxy
                            }
                        }
                    }
                }
                Method::Rotation => {
                    require_rotations(target)?;
                    let model = match self.rotation.get(&space_key(&both)) {
                        Some(model) => model.clone(),
                        None => {
                            let rot = bv.rotated_features().expect("checked in new");
                            RotationModel::fit(&rot, &self.cfg.rotation)?
                        }
                    };
                    model.score(&tv.rotated_features().expect("checked above"))?.accuracy
                }
            };
            features.insert(m, value);
        }

        let true_target_acc = if target.is_labeled() { Some(accuracy(&tv)?) } else { None };
        Ok(ShiftMeasurement {
            base_name: base.name().to_string(),
            target_name: target.name().to_string(),
            group: group.to_string(),
            features,
            base_acc_on_intersection: base_acc,
            true_target_acc,
            true_gap: true_target_acc.map(|t| base_acc - t),
            base_temperature: self.temperature.map(Temperature::value),
        })
    }
}

fn space_key(s: &LabelSpace) -> Vec<u64> {
    s.ids().iter().map(|c| c.0).collect()
}

/// Measures every requested method for one (base, target) pair.
pub fn measure(base: &Dataset, target: &Dataset, methods: &[Method], cfg: &MeasureConfig) -> Result<ShiftMeasurement> {
    BaseContext::new(base, methods, cfg)?.measure(target, "")
}

/// Measures many targets against one base, in parallel; output follows
/// the input order.
pub fn measure_all(
    base: &Dataset,
    targets: &[(&str, &Dataset)],
    methods: &[Method],
    cfg: &MeasureConfig,
) -> Result<Vec<ShiftMeasurement>> {
    let mut ctx = BaseContext::new(base, methods, cfg)?;
    let ds: Vec<&Dataset> = targets.iter().map(|(_, d)| *d).collect();
    ctx.prepare(&ds)?;
    targets.par_iter().map(|(group, t)| ctx.measure(t, group)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorConfig {
    pub kind: RegressorKind,
    pub ridge: f64,
    pub mlp: MlpConfig,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self {
            kind: RegressorKind::Linear,
            ridge: 0.0,
            mlp: MlpConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyPredictor {
    pub method: Method,
    /// Present exactly when the method needs one.
    pub regressor: Option<Regressor>,
    pub fitted_temperature: Option<f64>,
}

pub fn fit_predictor(cal: &[ShiftMeasurement], method: Method, cfg: &PredictorConfig) -> Result<AccuracyPredictor> {
    if let Some(m) = cal.iter().find(|m| !m.is_labeled()) {
        return Err(Error::LabelsRequired(m.target_name.clone()));
    }
    let fitted_temperature = cal.first().and_then(|m| m.base_temperature);
    if !method.needs_regressor() {
        return Ok(AccuracyPredictor {
            method,
            regressor: None,
            fitted_temperature,
        });
    }
    if cal.len() < 2 {
        return Err(Error::NeedCalibration(method.to_string()));
    }
    let s = cal.iter().map(|m| m.feature(method)).collect::<Result<Vec<_>>>()?;
    let g: Vec<f64> = cal.iter().map(|m| m.true_gap.expect("checked")).collect();
    let s = Matrix::new(s.len(), 1, s)?;
    Ok(AccuracyPredictor {
        method,
        regressor: Some(Regressor::fit(cfg.kind, &s, &g, cfg.ridge, &cfg.mlp)?),
        fitted_temperature,
    })
}

pub fn predict_accuracy(p: &AccuracyPredictor, m: &ShiftMeasurement) -> Result<f64> {
    let base = m.base_acc_on_intersection;
    let value = match (p.method, &p.regressor) {
        (Method::BaseAcc, _) => base,
        (Method::Ac, _) => m.feature(Method::Ac)?,
        (Method::AcTempscaling, _) => m.feature(Method::AcTempscaling)?,
        (Method::DocFeat, _) => doc_feat_predict(base, m.feature(Method::DocFeat)?)?,
        (method, Some(r)) => base - r.predict(&[m.feature(method)?])?,
        (method, None) => return Err(Error::BadPredictor(format!("{method} predictor has no regressor"))),
    };
    Ok(value.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationEntry {
    pub target: String,
    pub group: String,
    pub true_acc: f64,
    pub pred_acc: f64,
    pub abs_err: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub method: Method,
    pub rows: Vec<EvaluationEntry>,
    pub mae: f64,
    /// Population standard deviation of the absolute errors.
    pub std: f64,
    pub grouping: String,
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl EvaluationReport {
    fn from_rows(method: Method, rows: Vec<EvaluationEntry>, grouping: String) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Empty("validation set"));
        }
        let errs: Vec<f64> = rows.iter().map(|r| r.abs_err).collect();
        let (mae, std) = mean_std(&errs);
        Ok(Self {
            method,
            rows,
            mae,
            std,
            grouping,
        })
    }

    /// The rows of one group, re-aggregated.
    pub fn for_group(&self, group: &str) -> Result<Self> {
        let rows = self.rows.iter().filter(|r| r.group == group).cloned().collect();
        Self::from_rows(self.method, rows, group.to_string())
    }

    pub fn groups(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.rows.iter().map(|r| r.group.as_str()).collect();
        set.into_iter().map(String::from).collect()
    }
}

pub fn evaluate(p: &AccuracyPredictor, val: &[ShiftMeasurement]) -> Result<EvaluationReport> {
    let mut rows = Vec::with_capacity(val.len());
    for m in val {
        let true_acc = m.true_target_acc.ok_or_else(|| Error::LabelsRequired(m.target_name.clone()))?;
        let pred_acc = predict_accuracy(p, m)?;
        rows.push(EvaluationEntry {
            target: m.target_name.clone(),
            group: m.group.clone(),
            true_acc,
            pred_acc,
            abs_err: (pred_acc - true_acc).abs(),
        });
    }
    let groups: BTreeSet<&str> = val.iter().map(|m| m.group.as_str()).collect();
    let grouping = groups.into_iter().collect::<Vec<_>>().join(",");
    EvaluationReport::from_rows(p.method, rows, grouping)
}

/// How to combine reports of several classifiers evaluated on the same
/// targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregation {
    /// Average each target's error over classifiers, then over targets.
    PerShiftFirst,
    /// Each classifier's MAE first, then mean and spread over classifiers.
    PerModelFirst,
}

pub fn aggregate_models(reports: &[EvaluationReport], how: Aggregation) -> Result<(f64, f64)> {
    if reports.is_empty() {
        return Err(Error::Empty("reports"));
    }
    match how {
        Aggregation::PerModelFirst => Ok(mean_std(&reports.iter().map(|r| r.mae).collect::<Vec<_>>())),
        Aggregation::PerShiftFirst => {
            let mut per_target: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
            for r in reports {
                for row in &r.rows {
                    per_target.entry(row.target.as_str()).or_default().push(row.abs_err);
                }
            }
            if per_target.values().any(|v| v.len() != reports.len()) {
                return Err(Error::InvalidArgument("reports cover different targets".into()));
            }
            let avg: Vec<f64> = per_target.values().map(|v| v.iter().sum::<f64>() / v.len() as f64).collect();
            Ok(mean_std(&avg))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProtocolConfig {
    pub measure: MeasureConfig,
    pub predictor: PredictorConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolResult {
    pub reports: BTreeMap<Method, EvaluationReport>,
    pub predictors: BTreeMap<Method, AccuracyPredictor>,
    pub calibration: Vec<ShiftMeasurement>,
    pub validation: Vec<ShiftMeasurement>,
}

pub fn check_disjoint(cal_groups: &[String], val_groups: &[String]) -> Result<()> {
    let overlap: Vec<&String> = cal_groups.iter().filter(|g| val_groups.contains(g)).collect();
    if !overlap.is_empty() {
        let names: Vec<&str> = overlap.iter().map(|s| s.as_str()).collect();
        return Err(Error::Leakage(format!("group(s) {} used for both", names.join(", "))));
    }
    Ok(())
}

/// Calibrates one predictor per method on `cal_groups` and evaluates each
/// on `val_groups`. Validation targets are measured only after every
/// predictor has been fitted.
pub fn run_protocol(
    catalog: &Catalog,
    base_name: &str,
    cal_groups: &[String],
    val_groups: &[String],
    methods: &[Method],
    cfg: &ProtocolConfig,
) -> Result<ProtocolResult> {
    check_disjoint(cal_groups, val_groups)?;
    let base = catalog.get(base_name)?;
    let cal_targets: Vec<(&str, &Dataset)> =
        catalog.in_groups(cal_groups).filter(|(_, d)| d.name() != base_name).collect();
    let val_targets: Vec<(&str, &Dataset)> =
        catalog.in_groups(val_groups).filter(|(_, d)| d.name() != base_name).collect();
    if val_targets.is_empty() {
        return Err(Error::Empty("validation set"));
    }

    let mut ctx = BaseContext::new(base, methods, &cfg.measure)?;
    let all: Vec<&Dataset> = cal_targets.iter().chain(&val_targets).map(|(_, d)| *d).collect();
    ctx.prepare(&all)?;

    let calibration: Vec<ShiftMeasurement> =
        cal_targets.par_iter().map(|(g, t)| ctx.measure(t, g)).collect::<Result<_>>()?;
    let mut predictors = BTreeMap::new();
    for &m in methods {
        predictors.insert(m, fit_predictor(&calibration, m, &cfg.predictor)?);
    }

    let validation: Vec<ShiftMeasurement> =
        val_targets.par_iter().map(|(g, t)| ctx.measure(t, g)).collect::<Result<_>>()?;
    let mut reports = BTreeMap::new();
    for (&m, p) in &predictors {
        reports.insert(m, evaluate(p, &validation)?);
    }
    Ok(ProtocolResult {
        reports,
        predictors,
        calibration,
        validation,
    })
}

/// Method × group table of `MAE (std)`, with a final pooled `all` column.
pub fn format_table(reports: &BTreeMap<Method, EvaluationReport>) -> String {
    let groups: Vec<String> = reports
        .values()
        .flat_map(|r| r.groups())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut header = vec!["method".to_string()];
    header.extend(groups.iter().cloned());
    header.push("all".into());
    let mut lines = vec![header];
    for (m, r) in reports {
        let mut line = vec![m.to_string()];
        for g in &groups {
            line.push(match r.for_group(g) {
                Ok(s) => format!("{:.3} ({:.3})", s.mae, s.std),
                Err(_) => "-".into(),
            });
        }
        line.push(format!("{:.3} ({:.3})", r.mae, r.std));
        lines.push(line);
    }
    let widths: Vec<usize> = (0..lines[0].len())
        .map(|c| lines.iter().map(|l| l[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for l in &lines {
        let cells: Vec<String> = l.iter().zip(&widths).map(|(s, w)| format!("{s:<w$}")).collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}

const PREDICTOR_VERSION: f64 = 1.0;

impl AccuracyPredictor {
    /// Packs the predictor into one flat f64 vector:
    /// `[version, method, kind, has_temperature, temperature, payload...]`
    /// with kind 0 = none, 1 = linear (`m, w.., b`), 2 = MLP
    /// (`n_sizes, sizes.., in_mean.., in_scale.., out_mean, out_scale, params..`).
    pub fn to_tensor(&self) -> Tensor {
        let mut v = vec![PREDICTOR_VERSION, self.method.code() as f64];
        let kind = match &self.regressor {
            None => 0.0,
            Some(Regressor::Linear(_)) => 1.0,
            Some(Regressor::Mlp(_)) => 2.0,
        };
        v.push(kind);
        v.push(if self.fitted_temperature.is_some() { 1.0 } else { 0.0 });
        v.push(self.fitted_temperature.unwrap_or(0.0));
        match &self.regressor {
            None => {}
            Some(Regressor::Linear(r)) => {
                v.push(r.weights.len() as f64);
                v.extend_from_slice(&r.weights);
                v.push(r.bias);
            }
            Some(Regressor::Mlp(r)) => {
                let sizes = r.layer_sizes();
                v.push(sizes.len() as f64);
                v.extend(sizes.iter().map(|&s| s as f64));
                v.extend_from_slice(&r.in_mean);
                v.extend_from_slice(&r.in_scale);
                v.push(r.out_mean);
                v.push(r.out_scale);
                v.extend(r.params());
            }
        }
        Tensor::vector(v)
    }

    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        let Tensor::F64 { dims, data } = t else {
            return Err(Error::BadPredictor("expected an f64 tensor".into()));
        };
        if dims.len() != 1 {
            return Err(Error::BadPredictor("expected a 1-D tensor".into()));
        }
        let mut r = Reader { data, pos: 0 };
        if r.next()? != PREDICTOR_VERSION {
            return Err(Error::BadPredictor("unsupported version".into()));
        }
        let method = *Method::ALL
            .get(r.count()?)
            .ok_or_else(|| Error::BadPredictor("unknown method code".into()))?;
        let kind = r.count()?;
        let fitted_temperature = match r.count()? {
            0 => {
                r.next()?;
                None
            }
            1 => Some(r.next()?),
            _ => return Err(Error::BadPredictor("bad temperature flag".into())),
        };
        let regressor = match kind {
            0 => None,
            1 => {
                let m = r.count()?;
                let weights = r.take(m)?.to_vec();
                let bias = r.next()?;
                Some(Regressor::Linear(LinearRegressor { weights, bias }))
            }
            2 => {
                let n = r.count()?;
                if n < 2 {
                    return Err(Error::BadPredictor("MLP needs at least two layer sizes".into()));
                }
                let sizes = (0..n).map(|_| r.count()).collect::<Result<Vec<_>>>()?;
                let in_mean = r.take(sizes[0])?.to_vec();
                let in_scale = r.take(sizes[0])?.to_vec();
                let out_mean = r.next()?;
                let out_scale = r.next()?;
                let mut mlp = MlpRegressor {
                    layers: sizes
                        .windows(2)
                        .map(|w| Dense {
                            w: Matrix::zeros(w[1], w[0]),
                            b: vec![0.0; w[1]],
                        })
                        .collect(),
                    in_mean,
                    in_scale,
                    out_mean,
                    out_scale,
                };
                let np = mlp.n_params();
                mlp.set_params(r.take(np)?)?;
                Some(Regressor::Mlp(mlp))
            }
            _ => return Err(Error::BadPredictor("unknown regressor kind".into())),
        };
        if r.pos != data.len() {
            return Err(Error::BadPredictor("trailing values".into()));
        }
        if regressor.is_some() != method.needs_regressor() {
            return Err(Error::BadPredictor(format!("regressor presence does not match {method}")));
        }
        Ok(Self {
            method,
            regressor,
            fitted_temperature,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_tensor(path, &self.to_tensor())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_tensor(&read_tensor(path)?)
    }
}

struct Reader<'a> {
    data: &'a [f64],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [f64]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.data.len());
        let end = end.ok_or_else(|| Error::BadPredictor("truncated".into()))?;
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn next(&mut self) -> Result<f64> {
        Ok(self.take(1)?[0])
    }

    fn count(&mut self) -> Result<usize> {
        let v = self.next()?;
        if v < 0.0 || v.fract() != 0.0 || v > 1e9 {
            return Err(Error::BadPredictor(format!("bad count {v}")));
        }
        Ok(v as usize)
    }
}
