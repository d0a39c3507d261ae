use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use cfrefine::ratings::write_csv_triples;
use cfrefine::{
    rating_histograms, rmse, run_variant, split, Components, DatasetSummary, Factored, Format,
    PipelineConfig, RatingsLoader, RatingsMatrix, StageTiming, SyntheticConfig, Variant,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::args::{Axis, EvalArgs, GenArgs, SplitArgs, StatsArgs, SweepArgs};
use crate::settings::{resolve, warn_ignored, CliError, CliResult, Settings};

pub const SCHEMA_VERSION: u32 = 1;

fn io_error(path: &Path, e: io::Error) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

/// Runs `write` against `path`, or stdout when `path` is `None`.
fn emit<F>(path: Option<&Path>, write: F) -> CliResult<()>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    match path {
        Some(p) => {
            let file = File::create(p).map_err(|e| io_error(p, e))?;
            let mut w = BufWriter::new(file);
            write(&mut w)
                .and_then(|_| w.flush())
                .map_err(|e| io_error(p, e))
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            write(&mut w)
                .and_then(|_| w.flush())
                .map_err(|e| CliError::Data(format!("stdout: {e}")))
        }
    }
}

fn load_one(path: &Path, format: Format) -> CliResult<RatingsMatrix> {
    Ok(cfrefine::load_ratings(path, format)?)
}

/// Train and test sharing one id space.
fn load_pair(
    train: &Path,
    test: &Path,
    format: Format,
) -> CliResult<(RatingsMatrix, RatingsMatrix)> {
    let mut loader = RatingsLoader::new();
    loader.read_path(train, format)?;
    loader.read_path(test, format)?;
    let mut parts = loader.finish().into_iter();
    let train = parts.next().expect("two batches");
    let test = parts.next().expect("two batches");
    if train.is_empty() {
        return Err(CliError::Data("training set is empty".into()));
    }
    Ok((train, test))
}

fn file_name(p: &Path) -> String {
    p.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

pub fn split_cmd(args: &SplitArgs) -> CliResult<()> {
    if !(args.fraction > 0.0 && args.fraction < 1.0) {
        return Err(CliError::Config(format!(
            "fraction {} not in (0, 1)",
            args.fraction
        )));
    }
    let src = load_one(&args.input, args.format.unwrap_or_default())?;
    let pair = split(&src, args.fraction, args.seed)?;
    let header = |part: &str| {
        format!(
            "{part} split of {} fraction={} seed={}",
            file_name(&args.input),
            args.fraction,
            args.seed
        )
    };
    let h = header("train");
    emit(Some(&args.train), |w| {
        write_csv_triples(&pair.train, w, Some(&h))
    })?;
    let h = header("test");
    emit(Some(&args.test), |w| {
        write_csv_triples(&pair.test, w, Some(&h))
    })?;
    if let Some(ids) = &args.ids {
        let map = src.ids().expect("loaded files carry ids");
        emit(Some(ids), |w| map.write_csv(w))?;
    }
    eprintln!(
        "split {} ratings into {} train and {} test (seed {})",
        src.len(),
        pair.train.len(),
        pair.test.len(),
        args.seed
    );
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct Datasets {
    pub train: DatasetSummary,
    pub test: DatasetSummary,
}

#[derive(Debug, Serialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub variant: Variant,
    pub config: PipelineConfig,
    pub rmse: f64,
    pub train_rmse: f64,
    pub dataset: Datasets,
    /// Wall-clock seconds per stage; the only nondeterministic field.
    pub timings: Vec<StageTiming>,
}

pub fn eval_cmd(args: &EvalArgs) -> CliResult<()> {
    let settings = resolve(&args.model)?;
    if settings.variants.len() != 1 {
        return Err(CliError::Config("eval takes exactly one variant".into()));
    }
    let cfg = &settings.pipeline;
    warn_ignored(&settings, cfg.variant);
    let (train, test) = load_pair(&args.train, &args.test, settings.format)?;
    if test.is_empty() {
        return Err(CliError::Data("test set is empty".into()));
    }
    let result = run_variant(&train, cfg)?;
    let report = ExperimentReport {
        schema_version: SCHEMA_VERSION,
        variant: cfg.variant,
        config: cfg.clone(),
        rmse: rmse(&result.predictions, &test)?,
        train_rmse: rmse(&result.predictions, &train)?,
        dataset: Datasets {
            train: train.summary(),
            test: test.summary(),
        },
        timings: result.timings.clone(),
    };
    if let Some(p) = &args.predictions {
        let file = File::create(p).map_err(|e| io_error(p, e))?;
        result.write_csv(&test, BufWriter::new(file))?;
    }
    emit(args.out.as_deref(), |w| {
        serde_json::to_writer_pretty(&mut *w, &report)?;
        writeln!(w)
    })
}

/// Comma-separated values and `start:end[:step]` ranges (step 1 by
/// default), sorted and deduplicated.
pub fn parse_grid(text: &str) -> CliResult<Vec<f64>> {
    let bad = |m: String| CliError::Config(format!("grid {text:?}: {m}"));
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| bad(format!("{s:?} is not a number")))
    };
    let mut out = Vec::new();
    for part in text.split(',').filter(|p| !p.trim().is_empty()) {
        let pieces: Vec<&str> = part.split(':').collect();
        match pieces.as_slice() {
            [v] => out.push(num(v)?),
            [a, b] | [a, b, _] => {
                let (lo, hi) = (num(a)?, num(b)?);
                let step = if pieces.len() == 3 {
                    num(pieces[2])?
                } else {
                    1.0
                };
                if step.is_nan() || step <= 0.0 || hi < lo {
                    return Err(bad(format!("bad range {part:?}")));
                }
                let n = ((hi - lo) / step + 1e-9).floor() as usize;
                if n > 100_000 {
                    return Err(bad("too many points".into()));
                }
                // rounding keeps 0:1:0.1 free of 0.30000000000000004
                out.extend((0..=n).map(|k| ((lo + k as f64 * step) * 1e9).round() / 1e9));
            }
            _ => return Err(bad(format!("bad range {part:?}"))),
        }
    }
    if out.is_empty() {
        return Err(bad("empty".into()));
    }
    out.sort_by(f64::total_cmp);
    out.dedup();
    Ok(out)
}

fn as_count(axis: &str, v: f64) -> CliResult<usize> {
    if v >= 1.0 && v.fract() == 0.0 {
        Ok(v as usize)
    } else {
        Err(CliError::Config(format!(
            "{axis} grid value {v} is not a positive integer"
        )))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub variant: Variant,
    pub value: f64,
    pub rmse: f64,
}

/// Test RMSE of every variant at every grid point. Rows come back grouped
/// by variant in request order, values ascending.
pub fn sweep(
    train: &RatingsMatrix,
    test: &RatingsMatrix,
    settings: &Settings,
    axis: Axis,
    grid: &[f64],
) -> CliResult<Vec<SweepRow>> {
    match axis {
        Axis::Lambda => {
            if let Some(v) = grid.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(CliError::Config(format!(
                    "lambda grid value {v} not in [0, 1]"
                )));
            }
        }
        Axis::Rank | Axis::Clusters => {
            for &v in grid {
                as_count("integer", v)?;
            }
        }
    }
    let per_variant = |&variant: &Variant| -> CliResult<Vec<SweepRow>> {
        let mut cfg = PipelineConfig {
            variant,
            ..settings.pipeline.clone()
        };
        let score = |preds: &cfrefine::DenseMatrix| rmse(preds, test).map_err(CliError::from);
        let values: Vec<f64> = match axis {
            Axis::Lambda => {
                let comps = Components::for_lambda_sweep(train, &cfg)?;
                let fixed = if variant.uses_lambda() {
                    None
                } else {
                    let init = comps.initial(cfg.lambda)?;
                    Some(score(&cfrefine::finish(
                        &init,
                        &comps.stats,
                        cfg.svd_rank,
                        cfg.clamp_output,
                    )?)?)
                };
                grid.par_iter()
                    .map(|&l| match fixed {
                        Some(r) => Ok(r),
                        None => {
                            let init = comps.initial(l)?;
                            score(&cfrefine::finish(
                                &init,
                                &comps.stats,
                                cfg.svd_rank,
                                cfg.clamp_output,
                            )?)
                        }
                    })
                    .collect::<CliResult<_>>()?
            }
            Axis::Rank => {
                cfg.svd_rank = grid[0] as usize;
                let max = train.num_users().min(train.num_items());
                let top = *grid.last().expect("nonempty grid") as usize;
                if top > max {
                    return Err(cfrefine::Error::Rank {
                        requested: top,
                        max,
                    }
                    .into());
                }
                let comps = Components::for_config(train, &cfg)?;
                let factored = Factored::new(&comps.initial(cfg.lambda)?, comps.stats.clone())?;
                grid.par_iter()
                    .map(|&c| score(&factored.predictions(c as usize, cfg.clamp_output)?))
                    .collect::<CliResult<_>>()?
            }
            Axis::Clusters => {
                let run = |k: usize| -> CliResult<f64> {
                    let cfg = PipelineConfig {
                        k_clusters: k,
                        ..cfg.clone()
                    };
                    score(&run_variant(train, &cfg)?.predictions)
                };
                if variant.uses_clusters() {
                    grid.par_iter()
                        .map(|&k| run(k as usize))
                        .collect::<CliResult<_>>()?
                } else {
                    vec![run(cfg.k_clusters)?; grid.len()]
                }
            }
        };
        Ok(grid
            .iter()
            .zip(values)
            .map(|(&value, rmse)| SweepRow {
                variant,
                value,
                rmse,
            })
            .collect())
    };
    let groups = settings
        .variants
        .par_iter()
        .map(per_variant)
        .collect::<CliResult<Vec<_>>>()?;
    Ok(groups.into_iter().flatten().collect())
}

pub fn write_sweep_csv(rows: &[SweepRow], mut w: impl Write) -> io::Result<()> {
    writeln!(w, "variant,value,rmse")?;
    for r in rows {
        writeln!(w, "{},{},{}", r.variant, r.value, r.rmse)?;
    }
    Ok(())
}

pub fn sweep_cmd(args: &SweepArgs) -> CliResult<()> {
    let settings = resolve(&args.model)?;
    for &v in &settings.variants {
        warn_ignored(&settings, v);
    }
    let grid = parse_grid(&args.grid)?;
    let (train, test) = load_pair(&args.train, &args.test, settings.format)?;
    if test.is_empty() {
        return Err(CliError::Data("test set is empty".into()));
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(CliError::Config("threads must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let rows = pool.install(|| sweep(&train, &test, &settings, args.axis, &grid))?;
    emit(args.out.as_deref(), |w| write_sweep_csv(&rows, w))
}

pub fn stats_cmd(args: &StatsArgs) -> CliResult<()> {
    if args.bins == 0 {
        return Err(CliError::Config("bins must be at least 1".into()));
    }
    let src = load_one(&args.input, args.format.unwrap_or_default())?;
    let (items, users) = rating_histograms(&src, args.bins)?;
    match &args.out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
            let items_path: PathBuf = dir.join("items_hist.csv");
            let users_path: PathBuf = dir.join("users_hist.csv");
            emit(Some(&items_path), |w| items.write_csv(w))?;
            emit(Some(&users_path), |w| users.write_csv(w))
        }
        None => emit(None, |w| {
            writeln!(w, "# ratings per item")?;
            items.write_csv(&mut *w)?;
            writeln!(w, "# ratings per user")?;
            users.write_csv(&mut *w)
        }),
    }
}

pub fn gen_cmd(args: &GenArgs) -> CliResult<()> {
    let cfg = SyntheticConfig {
        users: args.users,
        items: args.items,
        factors: args.factors,
        archetypes: args.archetypes,
        density: args.density,
        noise: args.noise,
        seed: args.seed,
    };
    let data = cfrefine::generate(&cfg)?;
    let comment = format!(
        "synthetic users={} items={} factors={} archetypes={} density={} noise={} seed={}",
        cfg.users, cfg.items, cfg.factors, cfg.archetypes, cfg.density, cfg.noise, cfg.seed
    );
    emit(args.out.as_deref(), |w| {
        write_csv_triples(&data.ratings, w, Some(&comment))
    })
}
