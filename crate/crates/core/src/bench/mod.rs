//! Repeated-trial experiments and their reports.

mod presets;

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use gdrc_conic::{SolveOptions, SolveStatus};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use presets::{preset, PRESETS};

use crate::data::{parse_csv, parse_svmlight, split, CsvOptions, Dataset, DatasetSummary, MinMaxScaler, SplitSpec};
use crate::error::{Error, Result};
use crate::models::{compile, conservative_gap_bound, gap_bound, prepare, ModelKind, ModelParams, TrainedClassifier};

/// Fraction of `test` points whose predicted label matches.
pub fn accuracy(classifier: &TrainedClassifier, test: &Dataset) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::DegenerateDataset("empty test set".into()));
    }
    let pred = classifier.predict_all(test)?;
    let hits = pred.iter().zip(&test.labels).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / test.len() as f64)
}

/// Accuracy restricted to each class (`None` for an absent class).
pub fn class_accuracy(classifier: &TrainedClassifier, test: &Dataset) -> Result<[Option<f64>; 2]> {
    let pred = classifier.predict_all(test)?;
    let mut out = [None, None];
    for (k, slot) in out.iter_mut().enumerate() {
        let idx = test.class_index(k);
        if !idx.is_empty() {
            let hits = idx.iter().filter(|&&i| pred[i] == test.labels[i]).count();
            *slot = Some(hits as f64 / idx.len() as f64);
        }
    }
    Ok(out)
}

/// `total / 2` points per class from `N(+-mean_scale 1, cov_scale I)`,
/// positive class first. Seeded `ChaCha8Rng`.
pub fn gaussian_generator(n: usize, total: usize, mean_scale: f64, cov_scale: f64, seed: u64) -> Result<Dataset> {
    if n == 0 || total == 0 || total % 2 == 1 {
        return Err(Error::config("n_samples", format!("need n > 0 and an even positive total, got n={n}, N={total}")));
    }
    if !(cov_scale >= 0.0) {
        return Err(Error::config("cov_scale", "must be >= 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sd = cov_scale.sqrt();
    let half = total / 2;
    let mut labels = Vec::with_capacity(total);
    let mut feats = DMatrix::zeros(total, n);
    for i in 0..total {
        let y: i8 = if i < half { 1 } else { -1 };
        for j in 0..n {
            let z: f64 = StandardNormal.sample(&mut rng);
            feats[(i, j)] = y as f64 * mean_scale + sd * z;
        }
        labels.push(y);
    }
    Dataset::new(format!("gaussian-n{n}-N{total}"), feats, labels)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpec {
    pub n: usize,
    pub total: usize,
    pub mean_scale: f64,
    pub cov_scale: f64,
    /// Redraw the data every trial; otherwise draw once and re-split.
    pub fresh_per_trial: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SourceSpec {
    Gaussian(GaussianSpec),
    Csv {
        path: PathBuf,
        options: CsvOptions,
    },
    Svmlight {
        path: PathBuf,
        positive_label: Option<String>,
    },
    /// A dataset supplied directly by the caller.
    InMemory {
        name: String,
    },
}

pub enum Source {
    Gaussian(GaussianSpec),
    Fixed(Dataset),
}

impl SourceSpec {
    pub fn load(&self) -> Result<Source> {
        Ok(match self {
            SourceSpec::Gaussian(g) => Source::Gaussian(g.clone()),
            SourceSpec::Csv { path, options } => Source::Fixed(parse_csv(path, options)?),
            SourceSpec::Svmlight { path, positive_label } => {
                Source::Fixed(parse_svmlight(path, positive_label.as_deref())?)
            }
            SourceSpec::InMemory { name } => {
                return Err(Error::config("source", format!("in-memory dataset {name:?} cannot be loaded from a spec")))
            }
        })
    }
}

/// A model as requested in an experiment; ranks are given relative to the
/// data dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelChoice {
    Svm,
    Drc,
    DrcMu,
    Gdrc,
    GdrcApp { rank_fraction: f64 },
}

impl ModelChoice {
    pub fn resolve(&self, n: usize) -> ModelKind {
        match *self {
            ModelChoice::Svm => ModelKind::Svm,
            ModelChoice::Drc => ModelKind::Drc,
            ModelChoice::DrcMu => ModelKind::DrcMu,
            ModelChoice::Gdrc => ModelKind::Gdrc,
            ModelChoice::GdrcApp { rank_fraction } => ModelKind::GdrcApp { rank: rank_for(n, rank_fraction) },
        }
    }

    pub fn label(&self) -> String {
        match *self {
            ModelChoice::GdrcApp { rank_fraction } => format!("GDRC-SVM-app({}%)", (rank_fraction * 100.0).round()),
            other => other.resolve(1).to_string(),
        }
    }
}

/// `ceil(fraction * n)` clamped to `[1, n]`.
pub fn rank_for(n: usize, fraction: f64) -> usize {
    ((fraction * n as f64 - 1e-9).ceil() as usize).clamp(1, n)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub source: SourceSpec,
    pub models: Vec<ModelChoice>,
    pub trials: usize,
    pub seed: u64,
    pub train_fraction: f64,
    pub stratified: bool,
    /// Min-max scale features, fitted on each training split.
    pub scale: bool,
    pub params: ModelParams,
    pub tolerance: f64,
    /// Worker threads for trials (0 picks the rayon default).
    #[serde(skip)]
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub model: String,
    pub ok: bool,
    pub status: Option<SolveStatus>,
    pub error: Option<String>,
    pub accuracy: Option<f64>,
    pub class_accuracy: [Option<f64>; 2],
    pub objective: Option<f64>,
    pub w_norm: Option<f64>,
    pub true_gap: Option<f64>,
    pub bound: Option<f64>,
    /// Bound that also pays for the lifted moment constraint.
    pub sound_bound: Option<f64>,
    pub validation_passed: Option<bool>,
    pub worst_margin: Option<f64>,
    pub n_train: usize,
    pub n_test: usize,
    pub time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRow {
    pub model: String,
    pub trials_ok: usize,
    pub trials_failed: usize,
    /// Every trial failed.
    pub model_failed: bool,
    pub acc_mean: Option<f64>,
    pub acc_std: Option<f64>,
    pub class_acc_mean: [Option<f64>; 2],
    pub objective_mean: Option<f64>,
    pub objective_std: Option<f64>,
    pub gap_mean: Option<f64>,
    pub bound_mean: Option<f64>,
    pub sound_bound_mean: Option<f64>,
    pub validation_failures: usize,
    pub time_mean: Option<f64>,
    pub time_std: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub experiment: String,
    pub trials: usize,
    pub data: Option<DatasetSummary>,
    pub dropped_rows: usize,
    pub config: ExperimentConfig,
    pub rows: Vec<ModelRow>,
    pub records: Vec<TrialRecord>,
    pub environment: String,
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    Some((mean, var.sqrt()))
}

fn failed_record(trial: usize, seed: u64, model: String, err: &Error, n_train: usize, n_test: usize) -> TrialRecord {
    TrialRecord {
        trial,
        seed,
        model,
        ok: false,
        status: match err {
            Error::Solver(s) => Some(*s),
            _ => None,
        },
        error: Some(err.to_string()),
        accuracy: None,
        class_accuracy: [None, None],
        objective: None,
        w_norm: None,
        true_gap: None,
        bound: None,
        sound_bound: None,
        validation_passed: None,
        worst_margin: None,
        n_train,
        n_test,
        time_s: 0.0,
    }
}

fn trial_data(source: &Source, cfg: &ExperimentConfig, seed: u64) -> Result<Dataset> {
    match source {
        Source::Gaussian(g) => {
            let s = if g.fresh_per_trial { seed } else { cfg.seed };
            gaussian_generator(g.n, g.total, g.mean_scale, g.cov_scale, s)
        }
        Source::Fixed(ds) => Ok(ds.clone()),
    }
}

fn run_trial(source: &Source, cfg: &ExperimentConfig, t: usize) -> Vec<TrialRecord> {
    let seed = cfg.seed.wrapping_add(t as u64);
    let labels: Vec<String> = cfg.models.iter().map(|m| m.label()).collect();
    let all_failed = |err: &Error, n_train, n_test| {
        labels.iter().map(|l| failed_record(t, seed, l.clone(), err, n_train, n_test)).collect()
    };
    let spec = SplitSpec { train_fraction: cfg.train_fraction, seed, stratified: cfg.stratified };
    let (mut train, mut test) = match trial_data(source, cfg, seed).and_then(|d| split(&d, &spec)) {
        Ok(s) => s,
        Err(e) => return all_failed(&e, 0, 0),
    };
    if cfg.scale {
        let scaler = MinMaxScaler::fit(&train);
        train = scaler.transform(&train);
        test = scaler.transform(&test);
    }
    let (n_train, n_test) = (train.len(), test.len());
    let prep_start = Instant::now();
    let prepared = match prepare(&train, &cfg.params) {
        Ok(p) => p,
        Err(e) => return all_failed(&e, n_train, n_test),
    };
    let prep_time = prep_start.elapsed().as_secs_f64();
    let opts = SolveOptions::with_tolerance(cfg.tolerance);

    let mut records = Vec::new();
    let mut full_objective = None;
    for (choice, label) in cfg.models.iter().zip(&labels) {
        let kind = choice.resolve(train.n());
        let start = Instant::now();
        let fitted = compile(kind, &train, &prepared, &cfg.params).and_then(|m| m.solve(&opts));
        let elapsed = start.elapsed().as_secs_f64() + if kind.is_gdrc() { prep_time } else { 0.0 };
        let rec = match fitted {
            Err(e) => {
                log::warn!("{}: trial {t} {label} failed: {e}", cfg.name);
                let mut r = failed_record(t, seed, label.clone(), &e, n_train, n_test);
                r.time_s = elapsed;
                r
            }
            Ok(f) => {
                let clf = &f.classifier;
                let (bound, sound_bound) = match kind {
                    ModelKind::GdrcApp { .. } => (
                        gap_bound(clf, &prepared.profiles, cfg.params.c).ok(),
                        conservative_gap_bound(clf, &prepared.profiles, cfg.params.c).ok(),
                    ),
                    _ => (None, None),
                };
                if kind == ModelKind::Gdrc {
                    full_objective = Some(clf.objective);
                }
                TrialRecord {
                    trial: t,
                    seed,
                    model: label.clone(),
                    ok: true,
                    status: Some(f.solution.status),
                    error: None,
                    accuracy: accuracy(clf, &test).ok(),
                    class_accuracy: class_accuracy(clf, &test).unwrap_or([None, None]),
                    objective: Some(clf.objective),
                    w_norm: Some(clf.w_norm()),
                    true_gap: None,
                    bound,
                    sound_bound,
                    validation_passed: Some(f.validation.passed),
                    worst_margin: Some(f.validation.worst_margin()),
                    n_train,
                    n_test,
                    time_s: elapsed,
                }
            }
        };
        records.push(rec);
    }
    if let Some(full) = full_objective {
        for r in records.iter_mut().filter(|r| r.ok && r.bound.is_some()) {
            r.true_gap = r.objective.map(|v| full - v);
        }
    }
    records
}

fn summarize(label: &str, records: &[TrialRecord]) -> ModelRow {
    let mine: Vec<&TrialRecord> = records.iter().filter(|r| r.model == label).collect();
    let ok: Vec<&TrialRecord> = mine.iter().copied().filter(|r| r.ok).collect();
    let col = |f: &dyn Fn(&TrialRecord) -> Option<f64>| -> Vec<f64> { ok.iter().filter_map(|r| f(r)).collect() };
    let acc = mean_std(&col(&|r| r.accuracy.map(|a| 100.0 * a)));
    let obj = mean_std(&col(&|r| r.objective));
    let time = mean_std(&col(&|r| Some(r.time_s)));
    let class_mean = |k: usize| mean_std(&col(&|r| r.class_accuracy[k].map(|a| 100.0 * a))).map(|m| m.0);
    ModelRow {
        model: label.to_string(),
        trials_ok: ok.len(),
        trials_failed: mine.len() - ok.len(),
        model_failed: ok.is_empty(),
        acc_mean: acc.map(|m| m.0),
        acc_std: acc.map(|m| m.1),
        class_acc_mean: [class_mean(0), class_mean(1)],
        objective_mean: obj.map(|m| m.0),
        objective_std: obj.map(|m| m.1),
        gap_mean: mean_std(&col(&|r| r.true_gap)).map(|m| m.0),
        bound_mean: mean_std(&col(&|r| r.bound)).map(|m| m.0),
        sound_bound_mean: mean_std(&col(&|r| r.sound_bound)).map(|m| m.0),
        validation_failures: ok.iter().filter(|r| r.validation_passed == Some(false)).count(),
        time_mean: time.map(|m| m.0),
        time_std: time.map(|m| m.1),
    }
}

/// Runs `cfg.trials` independent trials (trial `t` uses seed `seed + t` for
/// data generation and splitting) and aggregates them in trial order.
pub fn run_experiment(source: &Source, cfg: &ExperimentConfig) -> Result<BenchmarkReport> {
    if cfg.trials == 0 {
        return Err(Error::config("trials", "must be at least 1"));
    }
    if cfg.models.is_empty() {
        return Err(Error::config("models", "no models requested"));
    }
    cfg.params.ambiguity.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::config("workers", e.to_string()))?;
    let per_trial: Vec<Vec<TrialRecord>> =
        pool.install(|| (0..cfg.trials).into_par_iter().map(|t| run_trial(source, cfg, t)).collect());
    let records: Vec<TrialRecord> = per_trial.into_iter().flatten().collect();
    let rows = cfg.models.iter().map(|m| summarize(&m.label(), &records)).collect();
    let (data, dropped_rows) = match source {
        Source::Fixed(ds) => (Some(ds.summary()), ds.dropped_rows),
        Source::Gaussian(_) => (None, 0),
    };
    Ok(BenchmarkReport {
        experiment: cfg.name.clone(),
        trials: cfg.trials,
        data,
        dropped_rows,
        config: cfg.clone(),
        rows,
        records,
        environment: format!(
            "{} {}; wall-clock timings are machine dependent",
            std::env::consts::OS,
            std::env::consts::ARCH
        ),
    })
}

fn fmt_opt(v: Option<f64>, prec: usize) -> String {
    v.map(|x| format!("{x:.prec$}")).unwrap_or_else(|| "-".into())
}

impl BenchmarkReport {
    pub fn row(&self, model: &str) -> Option<&ModelRow> {
        self.rows.iter().find(|r| r.model == model)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_text_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} ({} trials)", self.experiment, self.trials);
        let header = ["Model", "acc mean", "acc std", "time mean", "time std", "val", "gap", "ub", "failed"];
        let mut lines = vec![header.iter().map(|s| s.to_string()).collect::<Vec<_>>()];
        for r in &self.rows {
            lines.push(vec![
                r.model.clone(),
                fmt_opt(r.acc_mean, 2),
                fmt_opt(r.acc_std, 2),
                fmt_opt(r.time_mean, 3),
                fmt_opt(r.time_std, 3),
                fmt_opt(r.objective_mean, 4),
                fmt_opt(r.gap_mean, 4),
                fmt_opt(r.bound_mean, 4),
                r.trials_failed.to_string(),
            ]);
        }
        let widths: Vec<usize> =
            (0..header.len()).map(|c| lines.iter().map(|l| l[c].len()).max().unwrap_or(0)).collect();
        for (i, l) in lines.iter().enumerate() {
            let cells: Vec<String> = l
                .iter()
                .enumerate()
                .map(
                    |(c, s)| if c == 0 { format!("{s:<w$}", w = widths[c]) } else { format!("{s:>w$}", w = widths[c]) },
                )
                .collect();
            let _ = writeln!(out, "{}", cells.join("  "));
            if i == 0 {
                let _ = writeln!(out, "{}", "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
            }
        }
        let _ = writeln!(out, "{}", self.environment);
        out
    }

    /// One line per (trial, model).
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "trial,seed,model,ok,status,accuracy,acc_pos,acc_neg,objective,w_norm,true_gap,bound,sound_bound,validation_passed,time_s\n",
        );
        let f = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.trial,
                r.seed,
                r.model,
                r.ok,
                r.status.map(|s| s.to_string()).unwrap_or_default(),
                f(r.accuracy),
                f(r.class_accuracy[0]),
                f(r.class_accuracy[1]),
                f(r.objective),
                f(r.w_norm),
                f(r.true_gap),
                f(r.bound),
                f(r.sound_bound),
                r.validation_passed.map(|b| b.to_string()).unwrap_or_default(),
                r.time_s
            );
        }
        out
    }
}
