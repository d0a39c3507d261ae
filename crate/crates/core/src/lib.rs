//! Collaborative filtering by truncated SVD over a refined initial fill.
//!
//! Missing ratings are first estimated by blending two predictors: corrected
//! averages (shrunken item means plus shrunken user offsets) and a
//! distance-weighted average over the user's K-means cluster, with K-means
//! seeded by principal components. The blended matrix is then projected onto
//! its best rank-C approximation.
//!
//! ```no_run
//! use cfrefine::{load_ratings, rmse, run_refined, split, Format, PipelineConfig};
//!
//! let ratings = load_ratings("ratings.csv", Format::CsvTriples)?;
//! let pair = split(&ratings, 0.8, 42)?;
//! let result = run_refined(&pair.train, &PipelineConfig::default())?;
//! println!("test RMSE {:.5}", rmse(&result.predictions, &pair.test)?);
//! # Ok::<(), cfrefine::Error>(())
//! ```

pub mod baseline;
pub mod clustering;
pub mod dense;
pub mod error;
pub mod linalg;
pub mod pipeline;
pub mod ratings;
pub mod synth;

pub use baseline::{
    fill_corrected, fit_corrected_averages, predict_corrected, CorrectedAveragesModel,
};
pub use clustering::{
    kmeans, predict_centroid, predict_weighted, weights_for, ClusterModel, NeighborWeights,
};
pub use dense::{DenseMatrix, KnownMask};
pub use error::{Error, Result};
pub use linalg::{
    compute_stats, denormalize, mean_fill, normalize, principal_components, reconstruct,
    truncated_svd, NormalizationStats, TruncatedSvd,
};
pub use pipeline::{
    blend, finish, run_refined, run_variant, Components, Factored, PipelineConfig,
    PredictionResult, StageTiming, Variant,
};
pub use ratings::{
    load_ratings, rating_histograms, rmse, save_ratings, split, DatasetSummary, Format, Histogram,
    IdMap, Rating, RatingsLoader, RatingsMatrix, SplitPair,
};
pub use synth::{generate, SyntheticConfig, SyntheticData};
