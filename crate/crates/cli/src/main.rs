//! `shiftcast`: measure shifts, calibrate accuracy predictors, and predict
//! or evaluate accuracy on target datasets described by a manifest.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 data error.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use shiftcast::io::{load_manifest, write_distance_csv, write_evaluation_csv, Catalog, DistanceRow, EvaluationRow};
use shiftcast::learners::RegressorKind;
use shiftcast::pipeline::{
    check_disjoint, evaluate, fit_predictor, format_table, measure_all, predict_accuracy, run_protocol,
    AccuracyPredictor, EvaluationReport, MeasureConfig, Method, PredictorConfig, ProtocolConfig,
};
use shiftcast::workbench::{run_demo, DemoConfig};
use shiftcast::{Dataset, Error};

#[derive(Parser)]
#[command(name = "shiftcast", version, about = "Predict classifier accuracy under distribution shift")]
struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Directory for written artifacts.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Table,
}

#[derive(Clone, Copy, ValueEnum)]
enum RegressorArg {
    Linear,
    Mlp,
}

#[derive(Subcommand)]
enum Command {
    /// Shift features for each (base, target) pair.
    Measure {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_delimiter = ',')]
        targets: Vec<String>,
    },
    /// Fit one predictor per method on a calibration group and save them.
    Calibrate {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        cal_group: Vec<String>,
        #[arg(long, value_enum, default_value_t = RegressorArg::Linear)]
        regressor: RegressorArg,
    },
    /// Predict accuracy on (possibly unlabeled) targets with saved predictors.
    Predict {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_delimiter = ',')]
        targets: Vec<String>,
        /// Where `<method>.pred` files live; defaults to --output-dir.
        #[arg(long)]
        predictor_dir: Option<PathBuf>,
    },
    /// Error of predicted against true accuracy on labeled validation groups.
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        val_group: Vec<String>,
        /// Calibrate on these groups first.
        #[arg(long, value_delimiter = ',', conflicts_with = "predictor_dir")]
        cal_group: Vec<String>,
        /// Use saved predictors instead of calibrating.
        #[arg(long)]
        predictor_dir: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = RegressorArg::Linear)]
        regressor: RegressorArg,
    },
    /// Run the synthetic end-to-end protocol and write its artifacts.
    Demo,
    /// Print dataset shapes and label spaces.
    Inspect {
        #[arg(long)]
        manifest: PathBuf,
    },
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    base: String,
    /// Comma-separated method names, or `all`.
    #[arg(long, default_value = "all")]
    methods: String,
}

enum Failure {
    Config(String),
    Data(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_config() {
            Failure::Config(e.to_string())
        } else {
            Failure::Data(e.to_string())
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

type Outcome = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn run(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Measure { data, targets } => cmd_measure(cli, data, targets),
        Command::Calibrate {
            data,
            cal_group,
            regressor,
        } => cmd_calibrate(cli, data, cal_group, *regressor),
        Command::Predict {
            data,
            targets,
            predictor_dir,
        } => cmd_predict(cli, data, targets, predictor_dir.as_deref()),
        Command::Evaluate {
            data,
            val_group,
            cal_group,
            predictor_dir,
            regressor,
        } => cmd_evaluate(cli, data, val_group, cal_group, predictor_dir.as_deref(), *regressor),
        Command::Demo => cmd_demo(cli),
        Command::Inspect { manifest } => cmd_inspect(cli, manifest),
    }
}

fn writable_dir(dir: &Path) -> Outcome {
    let probe = dir.join(".shiftcast-probe");
    fs::create_dir_all(dir)
        .and_then(|_| fs::write(&probe, b""))
        .and_then(|_| fs::remove_file(&probe))
        .map_err(|e| Failure::Config(format!("output directory {} is not writable: {e}", dir.display())))
}

fn output_dir(cli: &Cli) -> std::result::Result<Option<&Path>, Failure> {
    match &cli.output_dir {
        Some(d) => {
            writable_dir(d)?;
            Ok(Some(d.as_path()))
        }
        None => Ok(None),
    }
}

/// Named targets, or every dataset except the base.
fn select_targets<'a>(catalog: &'a Catalog, base: &str, names: &[String]) -> std::result::Result<Vec<(&'a str, &'a Dataset)>, Failure> {
    if names.is_empty() {
        return Ok(catalog.iter().filter(|(_, d)| d.name() != base).collect());
    }
    let mut sorted = names.to_vec();
    sorted.sort();
    sorted.dedup();
    sorted
        .iter()
        .map(|n| {
            let d = catalog.get(n)?;
            Ok((catalog.group_of(n).unwrap_or(""), d))
        })
        .collect()
}

fn render_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let widths: Vec<usize> = (0..header.len())
        .map(|c| rows.iter().map(|r| r[c].len()).chain([header[c].len()]).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    let line = |cells: Vec<&str>| {
        let padded: Vec<String> = cells.iter().zip(&widths).map(|(s, w)| format!("{s:<w$}")).collect();
        format!("{}\n", padded.join("  ").trim_end())
    };
    out.push_str(&line(header.to_vec()));
    for r in rows {
        out.push_str(&line(r.iter().map(String::as_str).collect()));
    }
    out
}

fn emit(cli: &Cli, header: &[&str], rows: &[Vec<String>]) -> Outcome {
    let text = match cli.format {
        Format::Table => render_table(header, rows),
        Format::Csv => {
            let mut s = header.join(",");
            s.push('\n');
            for r in rows {
                s.push_str(&r.join(","));
                s.push('\n');
            }
            s
        }
    };
    io::stdout().write_all(text.as_bytes())?;
    Ok(())
}

fn cmd_measure(cli: &Cli, data: &DataArgs, targets: &[String]) -> Outcome {
    let methods = Method::parse_list(&data.methods)?;
    let out = output_dir(cli)?;
    let catalog = load_manifest(&data.manifest)?;
    let base = catalog.get(&data.base)?;
    let targets = select_targets(&catalog, &data.base, targets)?;
    let measured = measure_all(base, &targets, &methods, &MeasureConfig::with_seed(cli.seed))?;
    let mut rows: Vec<DistanceRow> = measured
        .iter()
        .flat_map(|m| {
            m.features.iter().map(|(method, v)| DistanceRow {
                base: m.base_name.clone(),
                target: m.target_name.clone(),
                method: method.to_string(),
                value: *v,
            })
        })
        .collect();
    rows.sort_by(|a, b| (&a.target, &a.method).cmp(&(&b.target, &b.method)));
    if let Some(dir) = out {
        write_distance_csv(fs::File::create(dir.join("distances.csv"))?, &rows)?;
    }
    match cli.format {
        Format::Csv => write_distance_csv(io::stdout().lock(), &rows)?,
        Format::Table => {
            let cells: Vec<Vec<String>> = rows
                .iter()
                .map(|r| vec![r.base.clone(), r.target.clone(), r.method.clone(), format!("{:.6}", r.value)])
                .collect();
            emit(cli, &["base", "target", "method", "value"], &cells)?;
        }
    }
    Ok(())
}

fn predictor_config(regressor: RegressorArg, seed: u64) -> PredictorConfig {
    let mut cfg = PredictorConfig {
        kind: match regressor {
            RegressorArg::Linear => RegressorKind::Linear,
            RegressorArg::Mlp => RegressorKind::Mlp,
        },
        ..PredictorConfig::default()
    };
    cfg.mlp.seed = seed;
    cfg
}

fn cmd_calibrate(cli: &Cli, data: &DataArgs, cal_group: &[String], regressor: RegressorArg) -> Outcome {
    let methods = Method::parse_list(&data.methods)?;
    let dir = output_dir(cli)?.unwrap_or(Path::new("."));
    writable_dir(dir)?;
    let catalog = load_manifest(&data.manifest)?;
    let base = catalog.get(&data.base)?;
    let targets: Vec<(&str, &Dataset)> =
        catalog.in_groups(cal_group).filter(|(_, d)| d.name() != data.base).collect();
    let cal = measure_all(base, &targets, &methods, &MeasureConfig::with_seed(cli.seed))?;
    let cfg = predictor_config(regressor, cli.seed);
    let mut rows = Vec::new();
    for m in &methods {
        let p = fit_predictor(&cal, *m, &cfg)?;
        let path = dir.join(format!("{m}.pred"));
        p.save(&path)?;
        rows.push(vec![m.to_string(), path.display().to_string()]);
    }
    emit(cli, &["method", "predictor"], &rows)
}

fn load_predictors(dir: &Path, methods: &[Method]) -> std::result::Result<Vec<AccuracyPredictor>, Failure> {
    methods
        .iter()
        .map(|m| {
            let path = dir.join(format!("{m}.pred"));
            let p = AccuracyPredictor::load(&path)?;
            if p.method != *m {
                return Err(Failure::Data(format!("{} holds a {} predictor", path.display(), p.method)));
            }
            Ok(p)
        })
        .collect()
}

fn cmd_predict(cli: &Cli, data: &DataArgs, targets: &[String], predictor_dir: Option<&Path>) -> Outcome {
    let methods = Method::parse_list(&data.methods)?;
    let out = output_dir(cli)?;
    let pdir = predictor_dir.or(out).unwrap_or(Path::new("."));
    let predictors = load_predictors(pdir, &methods)?;
    let catalog = load_manifest(&data.manifest)?;
    let base = catalog.get(&data.base)?;
    let targets = select_targets(&catalog, &data.base, targets)?;
    // predictions never look at target labels
    let unlabeled: Vec<Dataset> = targets.iter().map(|(_, d)| d.without_labels()).collect();
    let pairs: Vec<(&str, &Dataset)> = targets.iter().map(|(g, _)| *g).zip(&unlabeled).collect();
    let measured = measure_all(base, &pairs, &methods, &MeasureConfig::with_seed(cli.seed))?;
    let mut rows = Vec::new();
    for m in &measured {
        for p in &predictors {
            rows.push(vec![m.target_name.clone(), p.method.to_string(), predict_accuracy(p, m)?.to_string()]);
        }
    }
    if let Some(dir) = out {
        let mut s = String::from("target,method,pred_acc\n");
        for r in &rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        fs::write(dir.join("predictions.csv"), s)?;
    }
    emit(cli, &["target", "method", "pred_acc"], &rows)
}

fn cmd_evaluate(
    cli: &Cli,
    data: &DataArgs,
    val_group: &[String],
    cal_group: &[String],
    predictor_dir: Option<&Path>,
    regressor: RegressorArg,
) -> Outcome {
    let methods = Method::parse_list(&data.methods)?;
    check_disjoint(cal_group, val_group)?;
    let out = output_dir(cli)?;
    let catalog = load_manifest(&data.manifest)?;
    let measure_cfg = MeasureConfig::with_seed(cli.seed);

    let reports: BTreeMap<Method, EvaluationReport> = if cal_group.is_empty() {
        let pdir = predictor_dir.or(out).unwrap_or(Path::new("."));
        let predictors = load_predictors(pdir, &methods)?;
        let base = catalog.get(&data.base)?;
        let targets: Vec<(&str, &Dataset)> =
            catalog.in_groups(val_group).filter(|(_, d)| d.name() != data.base).collect();
        if let Some((_, d)) = targets.iter().find(|(_, d)| !d.is_labeled()) {
            return Err(Error::LabelsRequired(d.name().to_string()).into());
        }
        let val = measure_all(base, &targets, &methods, &measure_cfg)?;
        predictors
            .iter()
            .map(|p| Ok((p.method, evaluate(p, &val)?)))
            .collect::<std::result::Result<_, Error>>()?
    } else {
        let cfg = ProtocolConfig {
            measure: measure_cfg,
            predictor: predictor_config(regressor, cli.seed),
        };
        run_protocol(&catalog, &data.base, cal_group, val_group, &methods, &cfg)?.reports
    };

    if let Some(dir) = out {
        for (m, r) in &reports {
            let mut rows: Vec<EvaluationRow> = r
                .rows
                .iter()
                .map(|e| EvaluationRow {
                    target: e.target.clone(),
                    true_acc: e.true_acc,
                    pred_acc: e.pred_acc,
                    abs_err: e.abs_err,
                })
                .collect();
            rows.sort_by(|a, b| a.target.cmp(&b.target));
            write_evaluation_csv(fs::File::create(dir.join(format!("eval_{m}.csv")))?, &rows)?;
        }
    }
    print_summary(cli, &reports)
}

fn print_summary(cli: &Cli, reports: &BTreeMap<Method, EvaluationReport>) -> Outcome {
    if cli.format == Format::Table {
        io::stdout().write_all(format_table(reports).as_bytes())?;
        return Ok(());
    }
    let mut rows = Vec::new();
    for (m, r) in reports {
        for g in r.groups() {
            let s = r.for_group(&g)?;
            rows.push(vec![m.to_string(), g, s.mae.to_string(), s.std.to_string(), s.rows.len().to_string()]);
        }
        rows.push(vec![m.to_string(), "all".into(), r.mae.to_string(), r.std.to_string(), r.rows.len().to_string()]);
    }
    emit(cli, &["method", "group", "mae", "std", "n"], &rows)
}

fn cmd_demo(cli: &Cli) -> Outcome {
    let Some(dir) = &cli.output_dir else {
        return Err(Failure::Config("demo needs --output-dir".into()));
    };
    writable_dir(dir)?;
    let result = run_demo(cli.seed, &DemoConfig::default())?;
    result.write(dir)?;
    print_summary(cli, &result.protocol.reports)
}

fn cmd_inspect(cli: &Cli, manifest: &Path) -> Outcome {
    let catalog = load_manifest(manifest)?;
    let ids = |ls: &shiftcast::LabelSpace| ls.ids().iter().map(|c| c.0.to_string()).collect::<Vec<_>>().join(" ");
    let rows: Vec<Vec<String>> = catalog
        .iter()
        .map(|(g, d)| {
            vec![
                d.name().to_string(),
                g.to_string(),
                d.len().to_string(),
                d.prob_classes().len().to_string(),
                d.features().map_or("-".into(), |f| f.cols().to_string()),
                d.rotated_features().is_some().to_string(),
                d.is_labeled().to_string(),
                ids(d.label_space()),
            ]
        })
        .collect();
    emit(
        cli,
        &["name", "group", "rows", "prob_cols", "feature_dim", "rotations", "labeled", "label_space"],
        &rows,
    )
}
