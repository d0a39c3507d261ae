use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::RatingsMatrix;
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};

pub const DEFAULT_BINS: usize = 50;

/// A train/test partition of one ratings matrix.
#[derive(Debug, Clone)]
pub struct SplitPair {
    pub train: RatingsMatrix,
    pub test: RatingsMatrix,
    pub seed: u64,
    pub train_fraction: f64,
}

/// Uniformly random partition of the known entries.
///
/// The train half receives `round(train_fraction * |S|)` entries, kept within
/// `1..|S|` so neither half is empty. Both halves keep the source dimensions.
pub fn split(src: &RatingsMatrix, train_fraction: f64, seed: u64) -> Result<SplitPair> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train fraction {train_fraction} not in (0, 1)"
        )));
    }
    let total = src.len();
    if total < 2 {
        return Err(Error::Config(format!(
            "need at least 2 ratings to split, found {total}"
        )));
    }
    let n_train = ((train_fraction * total as f64).round() as usize).clamp(1, total - 1);

    let mut shuffled = src.entries().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shuffled.shuffle(&mut rng);
    let test = shuffled.split_off(n_train);

    Ok(SplitPair {
        train: src.with_entries(shuffled),
        test: src.with_entries(test),
        seed,
        train_fraction,
    })
}

/// Root mean squared error of `predictions` over the entries of `truth`.
pub fn rmse(predictions: &DenseMatrix, truth: &RatingsMatrix) -> Result<f64> {
    if truth.is_empty() {
        return Err(Error::UndefinedMetric("RMSE over an empty truth set"));
    }
    if predictions.rows() < truth.num_users() || predictions.cols() < truth.num_items() {
        return Err(Error::Shape(format!(
            "{}x{} predictions do not cover a {}x{} truth matrix",
            predictions.rows(),
            predictions.cols(),
            truth.num_users(),
            truth.num_items()
        )));
    }
    let sse: f64 = truth
        .entries()
        .iter()
        .map(|e| {
            let d = predictions.get(e.user, e.item) - f64::from(e.rating);
            d * d
        })
        .sum();
    Ok((sse / truth.len() as f64).sqrt())
}

/// Equal-width histogram over `[min, max]` of the observed values; the last
/// bin is closed on the right. A degenerate range `min == max` is widened to
/// `[min - 0.5, max + 0.5]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn from_values(values: &[usize], bins: usize) -> Histogram {
        assert!(bins >= 1, "at least one bin");
        let mut counts = vec![0usize; bins];
        let (lo, hi) = match (values.iter().min(), values.iter().max()) {
            (Some(&a), Some(&b)) if a < b => (a as f64, b as f64),
            (Some(&a), _) => (a as f64 - 0.5, a as f64 + 0.5),
            _ => (0.0, 1.0),
        };
        let width = (hi - lo) / bins as f64;
        for &v in values {
            let k = (((v as f64 - lo) / width) as usize).min(bins - 1);
            counts[k] += 1;
        }
        Histogram { lo, hi, counts }
    }

    /// `(bin_lo, bin_hi, count)` for each bin.
    pub fn bins(&self) -> impl Iterator<Item = (f64, f64, usize)> + '_ {
        let n = self.counts.len();
        let width = (self.hi - self.lo) / n as f64;
        self.counts.iter().enumerate().map(move |(k, &c)| {
            let lo = self.lo + width * k as f64;
            let hi = if k + 1 == n {
                self.hi
            } else {
                self.lo + width * (k + 1) as f64
            };
            (lo, hi, c)
        })
    }

    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "bin_lo,bin_hi,count")?;
        for (lo, hi, c) in self.bins() {
            writeln!(out, "{lo},{hi},{c}")?;
        }
        Ok(())
    }
}

/// Histograms of ratings received per item and ratings given per user.
pub fn rating_histograms(src: &RatingsMatrix, bins: usize) -> Result<(Histogram, Histogram)> {
    if bins == 0 {
        return Err(Error::Config("bins must be at least 1".into()));
    }
    Ok((
        Histogram::from_values(&src.item_counts(), bins),
        Histogram::from_values(&src.user_counts(), bins),
    ))
}
