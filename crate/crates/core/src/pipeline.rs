//! The refined SVD pipeline and its ablations.
//!
//! Stage order for the refined variant:
//!
//! 1. fill missing cells with corrected averages (`R_corr`)
//! 2. fill missing cells with item means (`R_mean`)
//! 3. per-item mean/std of `R_mean`; normalize both fills with them
//! 4. top-K principal components of normalized `R_mean`
//! 5. K-means on normalized `R_mean`, seeded with those components
//! 6. distance-weighted neighbour fill of normalized `R_mean` (`R_w`)
//! 7. missing cells: `λ·R_corr + (1-λ)·R_w`; known cells keep their
//!    normalized rating
//! 8. rank-C truncated SVD reconstruction, then denormalize
//!
//! The pipeline is deterministic: no stage draws random numbers.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use serde::Serialize;

use crate::baseline::{CorrectedAveragesModel, DEFAULT_K1, DEFAULT_K2};
use crate::clustering::{self, ClusterModel, DEFAULT_MAX_ITERS, DEFAULT_TOL};
use crate::dense::{DenseMatrix, KnownMask};
use crate::error::{Error, Result};
use crate::linalg::{self, NormalizationStats, TruncatedSvd};
use crate::ratings::{RatingsMatrix, MAX_RATING, MIN_RATING};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Blend of corrected averages and the weighted cluster fill.
    #[default]
    Refined,
    /// Every missing cell set to the global mean rating.
    BaselineSvd,
    /// Corrected averages only (refined with λ = 1).
    CorrectedOnly,
    /// Weighted cluster fill only (refined with λ = 0).
    KmeansOnly,
    /// Refined, with the closest-centroid value in place of the weighted fill.
    CentroidVariant,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Refined,
        Variant::BaselineSvd,
        Variant::CorrectedOnly,
        Variant::KmeansOnly,
        Variant::CentroidVariant,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Refined => "refined",
            Variant::BaselineSvd => "baseline_svd",
            Variant::CorrectedOnly => "corrected_only",
            Variant::KmeansOnly => "kmeans_only",
            Variant::CentroidVariant => "centroid_variant",
        }
    }

    /// Whether λ changes this variant's output.
    pub fn uses_lambda(self) -> bool {
        matches!(self, Variant::Refined | Variant::CentroidVariant)
    }

    /// Whether K changes this variant's output.
    pub fn uses_clusters(self) -> bool {
        matches!(
            self,
            Variant::Refined | Variant::KmeansOnly | Variant::CentroidVariant
        )
    }

    /// Whether the corrected-averages constants change this variant's output.
    pub fn uses_shrinkage(self) -> bool {
        !matches!(self, Variant::BaselineSvd | Variant::KmeansOnly)
    }

    /// Blend weight actually applied, `None` for the baseline.
    fn effective_lambda(self, lambda: f64) -> Option<f64> {
        match self {
            Variant::Refined | Variant::CentroidVariant => Some(lambda),
            Variant::CorrectedOnly => Some(1.0),
            Variant::KmeansOnly => Some(0.0),
            Variant::BaselineSvd => None,
        }
    }

    fn cluster_fill(self) -> ClusterFill {
        match self {
            Variant::CentroidVariant => ClusterFill::Centroid,
            _ => ClusterFill::Weighted,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ClusterFill {
    Weighted,
    Centroid,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub lambda: f64,
    pub k_clusters: usize,
    pub svd_rank: usize,
    pub k1: f64,
    pub k2: f64,
    /// Echoed in reports; the pipeline itself draws no random numbers.
    pub seed: u64,
    pub kmeans_max_iters: usize,
    pub kmeans_tol: f64,
    pub clamp_output: bool,
    pub variant: Variant,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            lambda: 0.6,
            k_clusters: 7,
            svd_rank: 28,
            k1: DEFAULT_K1,
            k2: DEFAULT_K2,
            seed: 42,
            kmeans_max_iters: DEFAULT_MAX_ITERS,
            kmeans_tol: DEFAULT_TOL,
            clamp_output: false,
            variant: Variant::Refined,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        check_lambda(self.lambda)?;
        if self.k_clusters == 0 {
            return Err(Error::Config(
                "number of clusters must be at least 1".into(),
            ));
        }
        if self.svd_rank == 0 {
            return Err(Error::Config("SVD rank must be at least 1".into()));
        }
        for (name, v) in [("k1", self.k1), ("k2", self.k2)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!(
                    "{name} = {v} must be finite and >= 0"
                )));
            }
        }
        if self.kmeans_max_iters == 0 {
            return Err(Error::Config("kmeans_max_iters must be at least 1".into()));
        }
        if self.kmeans_tol.is_nan() || self.kmeans_tol < 0.0 {
            return Err(Error::Config("kmeans_tol must be >= 0".into()));
        }
        Ok(())
    }

    /// Checks that the configuration fits a `users × items` problem.
    pub fn validate_for(&self, users: usize, items: usize) -> Result<()> {
        self.validate()?;
        let max_rank = users.min(items);
        if self.svd_rank > max_rank {
            return Err(Error::Rank {
                requested: self.svd_rank,
                max: max_rank,
            });
        }
        if self.variant.uses_clusters() && self.k_clusters > max_rank {
            return Err(Error::Rank {
                requested: self.k_clusters,
                max: max_rank,
            });
        }
        Ok(())
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if (0.0..=1.0).contains(&lambda) {
        Ok(())
    } else {
        Err(Error::Config(format!("lambda {lambda} not in [0, 1]")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageTiming {
    pub stage: &'static str,
    pub seconds: f64,
}

#[derive(Debug, Default, Clone)]
struct Timer {
    stages: Vec<StageTiming>,
}

impl Timer {
    fn time<T>(&mut self, stage: &'static str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.stages.push(StageTiming {
            stage,
            seconds: start.elapsed().as_secs_f64(),
        });
        out
    }
}

/// Missing cells become `λ·corr + (1-λ)·omega`; known cells are copied from
/// `corr`. At `λ = 1` (resp. 0) missing cells are exactly `corr` (`omega`).
pub fn blend(
    corr: &DenseMatrix,
    omega: &DenseMatrix,
    mask: &KnownMask,
    lambda: f64,
) -> Result<DenseMatrix> {
    check_lambda(lambda)?;
    if (corr.rows(), corr.cols()) != (omega.rows(), omega.cols())
        || (corr.rows(), corr.cols()) != (mask.rows(), mask.cols())
    {
        return Err(Error::Shape(format!(
            "blend of {}x{} and {}x{} under a {}x{} mask",
            corr.rows(),
            corr.cols(),
            omega.rows(),
            omega.cols(),
            mask.rows(),
            mask.cols()
        )));
    }
    let mut out = corr.clone();
    for u in 0..out.rows() {
        for i in 0..out.cols() {
            if mask.is_missing(u, i) {
                let v = if lambda == 1.0 {
                    corr.get(u, i)
                } else if lambda == 0.0 {
                    omega.get(u, i)
                } else {
                    lambda * corr.get(u, i) + (1.0 - lambda) * omega.get(u, i)
                };
                out.set(u, i, v);
            }
        }
    }
    Ok(out)
}

/// Normalized fills that the variants blend, computed once so that sweeps
/// over λ or C can reuse them.
#[derive(Debug, Clone)]
pub struct Components {
    pub variant: Variant,
    pub mask: KnownMask,
    pub stats: NormalizationStats,
    /// Normalized item-mean fill; placeholders are exactly 0.
    pub mean_filled: DenseMatrix,
    /// Normalized corrected-averages fill.
    pub corrected: Option<DenseMatrix>,
    /// Normalized cluster fill (weighted neighbours or closest centroid).
    pub cluster_filled: Option<DenseMatrix>,
    /// Normalized global-mean fill (baseline only).
    pub global_filled: Option<DenseMatrix>,
    pub clusters: Option<ClusterModel>,
    pub timings: Vec<StageTiming>,
}

impl Components {
    /// The parts `cfg.variant` needs at `cfg.lambda`.
    pub fn for_config(train: &RatingsMatrix, cfg: &PipelineConfig) -> Result<Self> {
        let (corrected, cluster) = match cfg.variant.effective_lambda(cfg.lambda) {
            None => (false, false),
            Some(l) => (l > 0.0, l < 1.0),
        };
        Self::build(train, cfg, corrected, cluster)
    }

    /// Everything `cfg.variant` could blend at any λ.
    pub fn for_lambda_sweep(train: &RatingsMatrix, cfg: &PipelineConfig) -> Result<Self> {
        match cfg.variant {
            Variant::BaselineSvd => Self::build(train, cfg, false, false),
            Variant::CorrectedOnly => Self::build(train, cfg, true, false),
            Variant::KmeansOnly => Self::build(train, cfg, false, true),
            Variant::Refined | Variant::CentroidVariant => Self::build(train, cfg, true, true),
        }
    }

    fn build(
        train: &RatingsMatrix,
        cfg: &PipelineConfig,
        with_corrected: bool,
        with_clusters: bool,
    ) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::Empty);
        }
        cfg.validate_for(train.num_users(), train.num_items())?;
        let mut timer = Timer::default();
        let mask = KnownMask::from_ratings(train);

        let corrected_raw = if with_corrected {
            Some(timer.time("corrected_fill", || {
                CorrectedAveragesModel::fit(train, cfg.k1, cfg.k2).map(|m| m.fill(train))
            })?)
        } else {
            None
        };
        let mean_raw = timer.time("mean_fill", || linalg::mean_fill(train))?;
        let stats = timer.time("stats", || linalg::compute_stats(&mean_raw));
        let (mean_filled, corrected) = timer.time("normalize", || -> Result<_> {
            let mean = stats.normalize(&mean_raw)?;
            let corr = corrected_raw.map(|c| stats.normalize(&c)).transpose()?;
            Ok((mean, corr))
        })?;

        let global_filled = if cfg.variant == Variant::BaselineSvd {
            let global = train.global_mean().ok_or(Error::Empty)?;
            Some(stats.normalize(&DenseMatrix::from_ratings(train, global))?)
        } else {
            None
        };

        let (cluster_filled, clusters) = if with_clusters {
            let seeds = timer.time("pca", || {
                linalg::principal_components(&mean_filled, cfg.k_clusters)
            })?;
            let model = timer.time("kmeans", || {
                clustering::kmeans(&mean_filled, &seeds, cfg.kmeans_max_iters, cfg.kmeans_tol)
            })?;
            let filled = timer.time("cluster_fill", || match cfg.variant.cluster_fill() {
                ClusterFill::Weighted => clustering::predict_weighted(&mean_filled, &model, &mask),
                ClusterFill::Centroid => clustering::predict_centroid(&mean_filled, &model, &mask),
            })?;
            (Some(filled), Some(model))
        } else {
            (None, None)
        };

        Ok(Components {
            variant: cfg.variant,
            mask,
            stats,
            mean_filled,
            corrected,
            cluster_filled,
            global_filled,
            clusters,
            timings: timer.stages,
        })
    }

    /// Normalized matrix handed to the SVD for blend weight `lambda`
    /// (ignored by variants that do not blend).
    pub fn initial(&self, lambda: f64) -> Result<DenseMatrix> {
        check_lambda(lambda)?;
        let Some(lambda) = self.variant.effective_lambda(lambda) else {
            return self
                .global_filled
                .clone()
                .ok_or_else(|| missing_part("global-mean fill"));
        };
        match (&self.corrected, &self.cluster_filled) {
            (Some(c), Some(w)) => blend(c, w, &self.mask, lambda),
            (Some(c), None) if lambda == 1.0 => Ok(c.clone()),
            (None, Some(w)) if lambda == 0.0 => Ok(w.clone()),
            _ => Err(missing_part("fill for this blend weight")),
        }
    }
}

fn missing_part(what: &str) -> Error {
    Error::Config(format!("pipeline components lack the {what}"))
}

/// Full SVD of an initialized matrix, for reconstructing at several ranks.
#[derive(Debug, Clone)]
pub struct Factored {
    pub svd: TruncatedSvd,
    pub stats: NormalizationStats,
}

impl Factored {
    pub fn new(initial: &DenseMatrix, stats: NormalizationStats) -> Result<Self> {
        Ok(Factored {
            svd: TruncatedSvd::full(initial)?,
            stats,
        })
    }

    /// Denormalized rank-`c` reconstruction.
    pub fn predictions(&self, c: usize, clamp: bool) -> Result<DenseMatrix> {
        if c == 0 || c > self.svd.rank() {
            return Err(Error::Rank {
                requested: c,
                max: self.svd.rank(),
            });
        }
        let mut out = self.stats.denormalize(&self.svd.reconstruct_rank(c))?;
        if clamp {
            out.clamp(f64::from(MIN_RATING), f64::from(MAX_RATING));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub struct PredictionResult {
    /// Rating units, `users × items`.
    pub predictions: DenseMatrix,
    pub config: PipelineConfig,
    pub timings: Vec<StageTiming>,
    pub clusters: Option<ClusterModel>,
}

impl PredictionResult {
    /// CSV `user_id,item_id,prediction` for every entry of `query`.
    pub fn write_csv<W: Write>(&self, query: &RatingsMatrix, mut out: W) -> Result<()> {
        if query.num_users() > self.predictions.rows()
            || query.num_items() > self.predictions.cols()
        {
            return Err(Error::Shape("query exceeds prediction matrix".into()));
        }
        let io = |source| Error::Io {
            path: Default::default(),
            source,
        };
        writeln!(out, "user_id,item_id,prediction").map_err(io)?;
        for e in query.entries() {
            writeln!(
                out,
                "{},{},{}",
                query.user_label(e.user),
                query.item_label(e.item),
                self.predictions.get(e.user, e.item)
            )
            .map_err(io)?;
        }
        Ok(())
    }
}

/// Reconstruct `initial` at rank `c` and return rating-unit predictions.
pub fn finish(
    initial: &DenseMatrix,
    stats: &NormalizationStats,
    c: usize,
    clamp: bool,
) -> Result<DenseMatrix> {
    let svd = linalg::truncated_svd(initial, c)?;
    let mut out = stats.denormalize(&svd.reconstruct())?;
    if clamp {
        out.clamp(f64::from(MIN_RATING), f64::from(MAX_RATING));
    }
    Ok(out)
}

/// Runs `cfg.variant`.
pub fn run_variant(train: &RatingsMatrix, cfg: &PipelineConfig) -> Result<PredictionResult> {
    let comps = Components::for_config(train, cfg)?;
    let mut timer = Timer {
        stages: comps.timings.clone(),
    };
    let initial = timer.time("blend", || comps.initial(cfg.lambda))?;
    let predictions = timer.time("svd", || {
        finish(&initial, &comps.stats, cfg.svd_rank, cfg.clamp_output)
    })?;
    Ok(PredictionResult {
        predictions,
        config: cfg.clone(),
        timings: timer.stages,
        clusters: comps.clusters,
    })
}

/// The refined pipeline, whatever `cfg.variant` says.
pub fn run_refined(train: &RatingsMatrix, cfg: &PipelineConfig) -> Result<PredictionResult> {
    let cfg = PipelineConfig {
        variant: Variant::Refined,
        ..cfg.clone()
    };
    run_variant(train, &cfg)
}
