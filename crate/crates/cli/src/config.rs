//! Flat `key = value` config files and their merge with command-line flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use gdrc_core::bench::{GaussianSpec, ModelChoice, SourceSpec};
use gdrc_core::data::CsvOptions;
use gdrc_core::{ModelKind, ModelParams, NormOrder};

use crate::CliError;

/// Keys that map onto model parameters.
pub const PARAM_KEYS: [&str; 10] = [
    "c",
    "epsilon",
    "lambda",
    "theta",
    "containment_fraction",
    "radius_scale",
    "gamma1",
    "gamma2",
    "p_norm",
    "m_per_class",
];

/// Keys only meaningful to `benchmark`.
pub const EXPERIMENT_KEYS: [&str; 14] = [
    "preset",
    "models",
    "data",
    "format",
    "label_column",
    "positive_label",
    "negative_label",
    "train_fraction",
    "stratified",
    "scale",
    "trials",
    "seed",
    "n_samples",
    "fresh_data",
];

pub type KeyValues = BTreeMap<String, String>;

pub fn read_key_values(path: &Path) -> Result<KeyValues, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read config {}: {e}", path.display())))?;
    parse_key_values(&text)
}

pub fn parse_key_values(text: &str) -> Result<KeyValues, CliError> {
    let mut out = KeyValues::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected `key = value`, got {raw:?}", i + 1)))?;
        let key = k.trim().to_string();
        if !PARAM_KEYS.contains(&key.as_str()) && !EXPERIMENT_KEYS.contains(&key.as_str()) {
            return Err(CliError::Usage(format!("config line {}: unknown key `{key}`", i + 1)));
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

pub fn parse_value<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| CliError::Usage(format!("invalid value for `{key}`: {v:?} ({e})")))
}

/// Model parameter flags shared by `train` and `benchmark`.
#[derive(Args, Debug, Clone, Default)]
pub struct ParamArgs {
    /// Flat `key = value` config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Slack penalty.
    #[arg(long = "c")]
    pub c: Option<f64>,
    /// Per-class risk level in (0, 1).
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Core-set centre shift toward the other class mean, in [0, 0.5).
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Attention weight on the core-set distance.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Fraction of class points each core set must contain.
    #[arg(long)]
    pub containment_fraction: Option<f64>,
    /// Multiplier on the calibrated core-set radius.
    #[arg(long)]
    pub radius_scale: Option<f64>,
    #[arg(long)]
    pub gamma1: Option<f64>,
    #[arg(long)]
    pub gamma2: Option<f64>,
    /// Core-set norm: 1, 2 or inf.
    #[arg(long)]
    pub p_norm: Option<String>,
    /// Core sets per class.
    #[arg(long)]
    pub m_per_class: Option<usize>,
}

impl ParamArgs {
    fn flag_values(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                kv.insert(k.to_string(), v);
            }
        };
        put("c", self.c.map(|v| v.to_string()));
        put("epsilon", self.epsilon.map(|v| v.to_string()));
        put("lambda", self.lambda.map(|v| v.to_string()));
        put("theta", self.theta.map(|v| v.to_string()));
        put("containment_fraction", self.containment_fraction.map(|v| v.to_string()));
        put("radius_scale", self.radius_scale.map(|v| v.to_string()));
        put("gamma1", self.gamma1.map(|v| v.to_string()));
        put("gamma2", self.gamma2.map(|v| v.to_string()));
        put("p_norm", self.p_norm.clone());
        put("m_per_class", self.m_per_class.map(|v| v.to_string()));
        kv
    }

    /// File values overlaid with flag values.
    pub fn merged(&self) -> Result<KeyValues, CliError> {
        let mut kv = match &self.config {
            Some(p) => read_key_values(p)?,
            None => KeyValues::new(),
        };
        kv.extend(self.flag_values());
        Ok(kv)
    }
}

pub fn apply_params(params: &mut ModelParams, kv: &KeyValues) -> Result<(), CliError> {
    let a = &mut params.ambiguity;
    for (k, v) in kv {
        match k.as_str() {
            "c" => params.c = parse_value(k, v)?,
            "epsilon" => a.epsilon = parse_value(k, v)?,
            "lambda" => a.lambda = parse_value(k, v)?,
            "theta" => a.theta = parse_value(k, v)?,
            "containment_fraction" => a.containment_fraction = parse_value(k, v)?,
            "radius_scale" => a.radius_scale = parse_value(k, v)?,
            "gamma1" => a.gamma1 = parse_value(k, v)?,
            "gamma2" => a.gamma2 = parse_value(k, v)?,
            "p_norm" => a.p_norm = parse_value::<NormOrder>(k, v)?,
            "m_per_class" => a.core_sets_per_class = parse_value(k, v)?,
            _ => {}
        }
    }
    if !(params.c > 0.0) {
        return Err(CliError::Core(gdrc_core::Error::config("c", format!("must be positive, got {}", params.c))));
    }
    params.ambiguity.validate().map_err(CliError::Core)
}

/// `svm`, `drc`, `drc-mu`, `gdrc`, or `gdrc-app:<fraction>`.
pub fn parse_model_choice(s: &str) -> Result<ModelChoice, CliError> {
    let s = s.trim().to_ascii_lowercase();
    Ok(match s.as_str() {
        "svm" => ModelChoice::Svm,
        "drc" => ModelChoice::Drc,
        "drc-mu" | "drc_mu" => ModelChoice::DrcMu,
        "gdrc" => ModelChoice::Gdrc,
        other => match other.strip_prefix("gdrc-app:") {
            Some(f) => {
                let rank_fraction: f64 = parse_value("models", f)?;
                if !(rank_fraction > 0.0 && rank_fraction <= 1.0) {
                    return Err(CliError::Usage(format!("rank fraction must lie in (0, 1], got {rank_fraction}")));
                }
                ModelChoice::GdrcApp { rank_fraction }
            }
            None => {
                return Err(CliError::Usage(format!(
                    "unknown model `{other}` (expected svm, drc, drc-mu, gdrc or gdrc-app:<fraction>)"
                )))
            }
        },
    })
}

pub fn resolve_model(
    name: &str,
    rank: Option<usize>,
    rank_fraction: Option<f64>,
    n: usize,
) -> Result<ModelKind, CliError> {
    match name.trim().to_ascii_lowercase().as_str() {
        "gdrc-app" | "gdrc_app" => match (rank, rank_fraction) {
            (Some(r), None) if (1..=n).contains(&r) => Ok(ModelKind::GdrcApp { rank: r }),
            (Some(r), None) => Err(CliError::Usage(format!("--rank must lie in [1, {n}], got {r}"))),
            (None, Some(f)) => Ok(parse_model_choice(&format!("gdrc-app:{f}"))?.resolve(n)),
            (None, None) => Err(CliError::Usage("gdrc-app needs --rank or --rank-fraction".into())),
            (Some(_), Some(_)) => Err(CliError::Usage("give only one of --rank and --rank-fraction".into())),
        },
        other => {
            if rank.is_some() || rank_fraction.is_some() {
                return Err(CliError::Usage(format!("--rank only applies to gdrc-app, not `{other}`")));
            }
            Ok(parse_model_choice(other)?.resolve(n))
        }
    }
}

/// Options describing how to read a labelled data file.
#[derive(Args, Debug, Clone, Default)]
pub struct DataArgs {
    /// File format: csv or svmlight (default: from the file extension).
    #[arg(long)]
    pub format: Option<String>,
    /// CSV label column, by header name or 0-based index.
    #[arg(long, default_value = "class")]
    pub label_column: String,
    /// Label mapped to +1.
    #[arg(long)]
    pub positive_label: Option<String>,
    /// Label mapped to -1; rows with other labels are dropped.
    #[arg(long)]
    pub negative_label: Option<String>,
}

/// `demo2d`, `gaussian:n=..,N=..[,cov=..][,mean=..]`, or a file path.
pub fn parse_source(data: &str, args: &DataArgs) -> Result<SourceSpec, CliError> {
    if data == "demo2d" {
        return Ok(SourceSpec::Gaussian(GaussianSpec {
            n: 2,
            total: 100,
            mean_scale: 1.0,
            cov_scale: 1.0,
            fresh_per_trial: true,
        }));
    }
    if let Some(rest) = data.strip_prefix("gaussian:") {
        let mut g = GaussianSpec { n: 0, total: 0, mean_scale: 1.0, cov_scale: 1.0, fresh_per_trial: true };
        for part in rest.split(',').filter(|p| !p.trim().is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("generator spec: expected key=value, got {part:?}")))?;
            match k.trim() {
                "n" => g.n = parse_value("n", v.trim())?,
                "N" => g.total = parse_value("N", v.trim())?,
                "cov" => g.cov_scale = parse_value("cov", v.trim())?,
                "mean" => g.mean_scale = parse_value("mean", v.trim())?,
                other => return Err(CliError::Usage(format!("generator spec: unknown key `{other}`"))),
            }
        }
        if g.n == 0 || g.total == 0 || g.total % 2 == 1 {
            return Err(CliError::Usage("generator spec needs n > 0 and an even N > 0".into()));
        }
        return Ok(SourceSpec::Gaussian(g));
    }
    let path = PathBuf::from(data);
    let format = match &args.format {
        Some(f) => f.to_ascii_lowercase(),
        None => match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => "csv".into(),
            _ => "svmlight".into(),
        },
    };
    match format.as_str() {
        "csv" => Ok(SourceSpec::Csv {
            path,
            options: CsvOptions {
                label_column: args.label_column.clone(),
                positive_label: args.positive_label.clone().unwrap_or_else(|| "1".into()),
                negative_label: args.negative_label.clone(),
            },
        }),
        "svmlight" | "libsvm" => Ok(SourceSpec::Svmlight { path, positive_label: args.positive_label.clone() }),
        other => Err(CliError::Usage(format!("unknown format `{other}` (expected csv or svmlight)"))),
    }
}
