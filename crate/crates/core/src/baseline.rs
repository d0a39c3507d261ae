//! Corrected averages: item means and user offsets shrunk toward their
//! global counterparts by pseudo-counts `k1` and `k2`.
//!
//! ```text
//! item_mean[i]   = (k1 * r̄  + Σ_{u rated i} r[u,i])                  / (k1 + |raters of i|)
//! offset         = (1/|S|) Σ_{(u,i) known} (r[u,i] - item_mean[i])
//! user_offset[u] = (k2 * offset + Σ_{i rated by u} (r[u,i] - item_mean[i])) / (k2 + |items of u|)
//! prediction     = item_mean[i] + user_offset[u]
//! ```
//!
//! An item or user without ratings falls back to `r̄` or `offset` exactly.

use std::io::Write;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::ratings::RatingsMatrix;

pub const DEFAULT_K1: f64 = 25.0;
pub const DEFAULT_K2: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectedAveragesModel {
    pub global_mean: f64,
    pub item_mean: Vec<f64>,
    pub global_offset: f64,
    pub user_offset: Vec<f64>,
    pub k1: f64,
    pub k2: f64,
}

impl CorrectedAveragesModel {
    pub fn fit(train: &RatingsMatrix, k1: f64, k2: f64) -> Result<Self> {
        if !(k1 >= 0.0 && k1.is_finite() && k2 >= 0.0 && k2.is_finite()) {
            return Err(Error::Config(format!(
                "shrinkage constants must be finite and non-negative (k1={k1}, k2={k2})"
            )));
        }
        let global_mean = train.global_mean().ok_or(Error::Empty)?;

        let mut item_sum = vec![0.0; train.num_items()];
        let mut item_n = vec![0usize; train.num_items()];
        for e in train.entries() {
            item_sum[e.item] += f64::from(e.rating);
            item_n[e.item] += 1;
        }
        let item_mean: Vec<f64> = item_sum
            .iter()
            .zip(&item_n)
            .map(|(&s, &n)| {
                if n == 0 {
                    global_mean
                } else {
                    (k1 * global_mean + s) / (k1 + n as f64)
                }
            })
            .collect();

        let residual = |u_item: usize, r: u8| f64::from(r) - item_mean[u_item];
        let global_offset = train
            .entries()
            .iter()
            .map(|e| residual(e.item, e.rating))
            .sum::<f64>()
            / train.len() as f64;

        let user_offset = (0..train.num_users())
            .map(|u| {
                let row = train.user_entries(u);
                if row.is_empty() {
                    global_offset
                } else {
                    let s: f64 = row.iter().map(|e| residual(e.item, e.rating)).sum();
                    (k2 * global_offset + s) / (k2 + row.len() as f64)
                }
            })
            .collect();

        Ok(CorrectedAveragesModel {
            global_mean,
            item_mean,
            global_offset,
            user_offset,
            k1,
            k2,
        })
    }

    /// Unclamped prediction for `(u, i)`.
    #[inline]
    pub fn predict(&self, u: usize, i: usize) -> f64 {
        self.item_mean[i] + self.user_offset[u]
    }

    /// Known entries keep their rating; every other cell gets [`Self::predict`].
    pub fn fill(&self, train: &RatingsMatrix) -> DenseMatrix {
        let mut m = DenseMatrix::from_fn(train.num_users(), train.num_items(), |u, i| {
            self.predict(u, i)
        });
        for e in train.entries() {
            m.set(e.user, e.item, f64::from(e.rating));
        }
        m
    }

    /// Section-tagged CSV dump for inspection.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "section,index,value")?;
        writeln!(out, "global,global_mean,{}", self.global_mean)?;
        writeln!(out, "global,global_offset,{}", self.global_offset)?;
        writeln!(out, "global,k1,{}", self.k1)?;
        writeln!(out, "global,k2,{}", self.k2)?;
        for (i, v) in self.item_mean.iter().enumerate() {
            writeln!(out, "item,{i},{v}")?;
        }
        for (u, v) in self.user_offset.iter().enumerate() {
            writeln!(out, "user,{u},{v}")?;
        }
        Ok(())
    }
}

pub fn fit_corrected_averages(
    train: &RatingsMatrix,
    k1: f64,
    k2: f64,
) -> Result<CorrectedAveragesModel> {
    CorrectedAveragesModel::fit(train, k1, k2)
}

pub fn predict_corrected(model: &CorrectedAveragesModel, u: usize, i: usize) -> f64 {
    model.predict(u, i)
}

pub fn fill_corrected(train: &RatingsMatrix, model: &CorrectedAveragesModel) -> DenseMatrix {
    model.fill(train)
}
