//! Layered settings: command-line flags over a `key=value` file over
//! built-in defaults.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use cfrefine::{Format, PipelineConfig, Variant};

use crate::args::ModelArgs;

/// Failure classes with stable exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags or configuration (exit 2).
    Config(String),
    /// Bad or unreadable data (exit 3).
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) | CliError::Data(m) => f.write_str(m),
        }
    }
}

impl From<cfrefine::Error> for CliError {
    fn from(e: cfrefine::Error) -> Self {
        if e.is_config() {
            CliError::Config(e.to_string())
        } else {
            CliError::Data(e.to_string())
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Values read from a config file; `None` means not mentioned.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct FileConfig {
    pub variant: Option<Vec<Variant>>,
    pub lambda: Option<f64>,
    pub clusters: Option<usize>,
    pub rank: Option<usize>,
    pub k1: Option<f64>,
    pub k2: Option<f64>,
    pub seed: Option<u64>,
    pub kmeans_max_iters: Option<usize>,
    pub kmeans_tol: Option<f64>,
    pub clamp: Option<bool>,
    pub format: Option<Format>,
}

fn value<T: FromStr>(key: &str, raw: &str, line: usize) -> CliResult<T>
where
    T::Err: fmt::Display,
{
    raw.parse()
        .map_err(|e| CliError::Config(format!("config line {line}: {key}: {e}")))
}

impl FileConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut cfg = FileConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.trim();
            if body.is_empty() || body.starts_with('#') {
                continue;
            }
            let Some((key, val)) = body.split_once('=') else {
                return Err(CliError::Config(format!(
                    "config line {line}: expected key=value, got {body:?}"
                )));
            };
            let (key, val) = (key.trim(), val.trim());
            match key {
                "variant" => {
                    let vs = val
                        .split(',')
                        .map(|v| value(key, v.trim(), line))
                        .collect::<CliResult<_>>()?;
                    cfg.variant = Some(vs);
                }
                "lambda" => cfg.lambda = Some(value(key, val, line)?),
                "clusters" | "k_clusters" => cfg.clusters = Some(value(key, val, line)?),
                "rank" | "svd_rank" => cfg.rank = Some(value(key, val, line)?),
                "k1" => cfg.k1 = Some(value(key, val, line)?),
                "k2" => cfg.k2 = Some(value(key, val, line)?),
                "seed" => cfg.seed = Some(value(key, val, line)?),
                "kmeans_max_iters" => cfg.kmeans_max_iters = Some(value(key, val, line)?),
                "kmeans_tol" => cfg.kmeans_tol = Some(value(key, val, line)?),
                "clamp" | "clamp_output" => cfg.clamp = Some(value(key, val, line)?),
                "format" => cfg.format = Some(value(key, val, line)?),
                other => {
                    return Err(CliError::Config(format!(
                        "config line {line}: unknown key {other:?}"
                    )))
                }
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

/// Fully resolved settings for `eval` and `sweep`.
#[derive(Debug, Clone)]
pub struct Settings {
    /// `variant` holds the first requested variant.
    pub pipeline: PipelineConfig,
    pub variants: Vec<Variant>,
    pub format: Format,
    pub lambda_given: bool,
    pub clusters_given: bool,
}

pub fn resolve(args: &ModelArgs) -> CliResult<Settings> {
    let file = match &args.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let d = PipelineConfig::default();
    let variants = if !args.variant.is_empty() {
        args.variant.clone()
    } else {
        file.variant.clone().unwrap_or_else(|| vec![d.variant])
    };
    let lambda = args.lambda.or(file.lambda);
    let clusters = args.clusters.or(file.clusters);
    let pipeline = PipelineConfig {
        lambda: lambda.unwrap_or(d.lambda),
        k_clusters: clusters.unwrap_or(d.k_clusters),
        svd_rank: args.rank.or(file.rank).unwrap_or(d.svd_rank),
        k1: args.k1.or(file.k1).unwrap_or(d.k1),
        k2: args.k2.or(file.k2).unwrap_or(d.k2),
        seed: args.seed.or(file.seed).unwrap_or(d.seed),
        kmeans_max_iters: args
            .kmeans_max_iters
            .or(file.kmeans_max_iters)
            .unwrap_or(d.kmeans_max_iters),
        kmeans_tol: args.kmeans_tol.or(file.kmeans_tol).unwrap_or(d.kmeans_tol),
        clamp_output: args.clamp || file.clamp.unwrap_or(d.clamp_output),
        variant: variants[0],
    };
    pipeline.validate()?;
    Ok(Settings {
        pipeline,
        variants,
        format: args.format.or(file.format).unwrap_or_default(),
        lambda_given: lambda.is_some(),
        clusters_given: clusters.is_some(),
    })
}

/// Notes on stderr for parameters the variant ignores.
pub fn warn_ignored(s: &Settings, variant: Variant) {
    if s.lambda_given && !variant.uses_lambda() {
        eprintln!("warning: variant {variant} ignores lambda");
    }
    if s.clusters_given && !variant.uses_clusters() {
        eprintln!("warning: variant {variant} ignores clusters");
    }
}
