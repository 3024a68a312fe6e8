mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gdrc_conic::SolveOptions;
use gdrc_core::bench::{self, BenchmarkReport, ExperimentConfig, Source, SourceSpec};
use gdrc_core::data::{parse_feature_csv, split, Dataset, SplitSpec};
use gdrc_core::models::{fit, ModelParams, TrainedClassifier};
use serde_json::json;

use config::{apply_params, parse_model_choice, parse_source, parse_value, resolve_model, DataArgs, ParamArgs};

/// Environment variable holding the worker count for benchmark trials.
const WORKERS_ENV: &str = "GDRC_WORKERS";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Core(gdrc_core::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use gdrc_core::Error as E;
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Core(E::Config { .. } | E::Range(_) | E::CertificateRequired) => 2,
            CliError::Core(e) if e.is_solver_error() => 4,
            CliError::Core(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<gdrc_core::Error> for CliError {
    fn from(e: gdrc_core::Error) -> Self {
        CliError::Core(e)
    }
}

#[derive(Parser)]
#[command(name = "gdrc", version, about = "Distributionally robust chance-constrained SVM toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model and write the classifier with its validation report.
    Train(TrainArgs),
    /// Label a data file with a trained classifier.
    Predict(PredictArgs),
    /// Run a repeated-trial experiment from a preset or config file.
    Benchmark(BenchArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// svm, drc, drc-mu, gdrc or gdrc-app.
    #[arg(long, default_value = "gdrc")]
    model: String,
    /// Data file, `demo2d`, or `gaussian:n=..,N=..,cov=..`.
    #[arg(long)]
    data: String,
    #[command(flatten)]
    data_args: DataArgs,
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long)]
    rank_fraction: Option<f64>,
    /// Fraction of points used for training; the rest are scored.
    /// Defaults to 0.2 for generated data and 1 for files.
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-8)]
    tolerance: f64,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    /// Classifier JSON written by `train`.
    #[arg(long)]
    classifier: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    data_args: DataArgs,
    /// Treat the file as an unlabelled numeric CSV.
    #[arg(long)]
    unlabeled: bool,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// demo2d, table1, table2, table3, table5, table6 or table7.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Override the sample count of generated data.
    #[arg(long)]
    n_samples: Option<usize>,
    /// Directory holding the real datasets used by presets.
    #[arg(long, default_value = "data")]
    data_dir: PathBuf,
    /// Worker threads (also read from GDRC_WORKERS; 0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

fn load_dataset(spec: &SourceSpec, seed: u64) -> Result<Dataset, CliError> {
    Ok(match spec.load()? {
        Source::Fixed(ds) => ds,
        Source::Gaussian(g) => bench::gaussian_generator(g.n, g.total, g.mean_scale, g.cov_scale, seed)?,
    })
}

fn cmd_train(args: TrainArgs) -> Result<(), CliError> {
    let kv = args.params.merged()?;
    if let Some(k) = kv.keys().find(|k| !config::PARAM_KEYS.contains(&k.as_str())) {
        return Err(CliError::Usage(format!("config key `{k}` is not used by train")));
    }
    let mut params = ModelParams::default();
    apply_params(&mut params, &kv)?;
    let source = parse_source(&args.data, &args.data_args)?;
    let generated = matches!(source, SourceSpec::Gaussian(_));
    let data = load_dataset(&source, args.seed)?;
    let kind = resolve_model(&args.model, args.rank, args.rank_fraction, data.n())?;
    let train_fraction = args.train_fraction.unwrap_or(if generated { 0.2 } else { 1.0 });
    if !(train_fraction > 0.0 && train_fraction <= 1.0) {
        return Err(CliError::Usage(format!("--train-fraction must lie in (0, 1], got {train_fraction}")));
    }
    let (train, test) = if train_fraction < 1.0 {
        let (tr, te) = split(&data, &SplitSpec { train_fraction, seed: args.seed, stratified: true })?;
        (tr, Some(te))
    } else {
        (data, None)
    };

    let resolved = json!({
        "model": kind,
        "data": source,
        "train_fraction": train_fraction,
        "seed": args.seed,
        "tolerance": args.tolerance,
        "params": params,
    });
    let fitted = fit(kind, &train, &params, &SolveOptions::with_tolerance(args.tolerance))?;
    let mut clf: TrainedClassifier = fitted.classifier;
    clf.config = Some(resolved.clone());

    let classifier_path = args.out.join("classifier.json");
    write_file(&classifier_path, &clf.to_json())?;
    let report = json!({
        "model": kind.to_string(),
        "status": fitted.solution.status,
        "objective": clf.objective,
        "iterations": fitted.solution.iterations,
        "validation": fitted.validation,
        "config": resolved,
    });
    write_file(&args.out.join("validation.json"), &serde_json::to_string_pretty(&report).expect("json"))?;

    println!("{kind}: objective {:.6}, ||w|| = {:.4e}", clf.objective, clf.w_norm());
    let (scored, what) = match &test {
        Some(te) => (te, "test"),
        None => (&train, "training"),
    };
    println!("{what} accuracy: {:.4} ({} points)", bench::accuracy(&clf, scored)?, scored.len());
    if clf.w_norm() <= 1e-3 {
        eprintln!(
            "warning: ||w|| is approximately 0; the hyperplane is degenerate (theta = 0 drops the core-set term)"
        );
    }
    if !fitted.validation.passed {
        eprintln!("warning: certificate validation failed (worst margin {:.3e})", fitted.validation.worst_margin());
    }
    println!("wrote {}", classifier_path.display());
    Ok(())
}

fn cmd_predict(args: PredictArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.classifier)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", args.classifier.display())))?;
    let clf = TrainedClassifier::from_json(&text)?;
    let (labels, truth) = if args.unlabeled {
        let x = parse_feature_csv(&args.data)?;
        let pred =
            (0..x.nrows()).map(|i| clf.predict(x.row(i).transpose().as_slice())).collect::<Result<Vec<_>, _>>()?;
        (pred, None)
    } else {
        let spec = parse_source(&args.data.to_string_lossy(), &args.data_args)?;
        let ds = load_dataset(&spec, 0)?;
        (clf.predict_all(&ds)?, Some(ds))
    };
    let body: String = labels.iter().map(|l| format!("{l}\n")).collect();
    let path = args.out.join("predictions.txt");
    write_file(&path, &body)?;
    if let Some(ds) = truth {
        println!("accuracy: {:.4} ({} points)", bench::accuracy(&clf, &ds)?, ds.len());
    }
    println!("wrote {} labels to {}", labels.len(), path.display());
    Ok(())
}

fn workers(flag: Option<usize>) -> Result<usize, CliError> {
    if let Some(w) = flag {
        return Ok(w);
    }
    match std::env::var(WORKERS_ENV) {
        Ok(v) => parse_value(WORKERS_ENV, &v),
        Err(_) => Ok(0),
    }
}

/// Builds experiments from a config file that names no preset.
fn experiment_from_file(kv: &config::KeyValues) -> Result<ExperimentConfig, CliError> {
    let data = kv.get("data").ok_or_else(|| CliError::Usage("config needs `data` or `preset`".into()))?;
    let data_args = DataArgs {
        format: kv.get("format").cloned(),
        label_column: kv.get("label_column").cloned().unwrap_or_else(|| "class".into()),
        positive_label: kv.get("positive_label").cloned(),
        negative_label: kv.get("negative_label").cloned(),
    };
    let source = parse_source(data, &data_args)?;
    let models = kv
        .get("models")
        .map(String::as_str)
        .unwrap_or("svm,drc,drc-mu,gdrc")
        .split(',')
        .map(parse_model_choice)
        .collect::<Result<Vec<_>, _>>()?;
    let get_or = |k: &str, d: &str| kv.get(k).cloned().unwrap_or_else(|| d.to_string());
    Ok(ExperimentConfig {
        name: format!("custom {data}"),
        scale: parse_value("scale", &get_or("scale", &(!matches!(source, SourceSpec::Gaussian(_))).to_string()))?,
        source,
        models,
        trials: 20,
        seed: 0,
        train_fraction: parse_value("train_fraction", &get_or("train_fraction", "0.2"))?,
        stratified: parse_value("stratified", &get_or("stratified", "true"))?,
        params: ModelParams::default(),
        tolerance: 1e-8,
        workers: 0,
    })
}

fn cmd_benchmark(args: BenchArgs) -> Result<(), CliError> {
    let kv = args.params.merged()?;
    let preset = args.preset.clone().or_else(|| kv.get("preset").cloned());
    let mut experiments = match &preset {
        Some(name) => bench::preset(name, &args.data_dir).map_err(|e| CliError::Usage(e.to_string()))?,
        None if args.params.config.is_some() => vec![experiment_from_file(&kv)?],
        None => return Err(CliError::Usage("benchmark needs --preset or --config".into())),
    };
    let trials = match args.trials {
        Some(t) => Some(t),
        None => kv.get("trials").map(|v| parse_value("trials", v)).transpose()?,
    };
    let seed = match args.seed {
        Some(s) => Some(s),
        None => kv.get("seed").map(|v| parse_value("seed", v)).transpose()?,
    };
    let n_samples = match args.n_samples {
        Some(n) => Some(n),
        None => kv.get("n_samples").map(|v| parse_value("n_samples", v)).transpose()?,
    };
    let fresh: Option<bool> = kv.get("fresh_data").map(|v| parse_value("fresh_data", v)).transpose()?;
    let workers = workers(args.workers)?;
    for e in experiments.iter_mut() {
        apply_params(&mut e.params, &kv)?;
        if let Some(t) = trials {
            e.trials = t;
        }
        if let Some(s) = seed {
            e.seed = s;
        }
        if let SourceSpec::Gaussian(g) = &mut e.source {
            if let Some(n) = n_samples {
                g.total = n;
            }
            if let Some(f) = fresh {
                g.fresh_per_trial = f;
            }
        }
        e.workers = workers;
    }

    gdrc_core::single_threaded_blas();
    let mut reports: Vec<BenchmarkReport> = Vec::new();
    for e in &experiments {
        log::info!("running {} ({} trials)", e.name, e.trials);
        let source = e.source.load()?;
        let report = bench::run_experiment(&source, e)?;
        print!("{}", report.to_text_table());
        println!();
        reports.push(report);
    }

    let stem = preset.as_deref().unwrap_or("custom");
    write_file(&args.out.join(format!("{stem}.json")), &serde_json::to_string_pretty(&reports).expect("json"))?;
    let tables: String = reports.iter().map(|r| r.to_text_table() + "\n").collect();
    write_file(&args.out.join(format!("{stem}.txt")), &tables)?;
    for (i, r) in reports.iter().enumerate() {
        write_file(&args.out.join(format!("{stem}-{i}-trials.csv")), &r.to_csv())?;
    }
    println!("wrote {}", args.out.join(format!("{stem}.json")).display());

    let failed: Vec<String> = reports
        .iter()
        .flat_map(|r| r.rows.iter().filter(|m| m.model_failed).map(move |m| format!("{}: {}", r.experiment, m.model)))
        .collect();
    if !failed.is_empty() {
        return Err(CliError::Core(gdrc_core::Error::Numerical(format!(
            "every trial failed for {}",
            failed.join(", ")
        ))));
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Benchmark(a) => cmd_benchmark(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
