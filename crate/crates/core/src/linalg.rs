//! Dense kernels: item normalization, truncated SVD, principal components.

use nalgebra::SVD;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::ratings::RatingsMatrix;

/// Standard deviations below this are replaced by 1.
pub const SIGMA_FLOOR: f64 = 1e-12;

const SVD_MAX_ITERS: usize = 10_000;

/// Per-item column mean and (population) standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationStats {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
}

/// Known ratings kept; a missing cell gets its item's observed mean, or the
/// global mean for an item nobody rated.
pub fn mean_fill(train: &RatingsMatrix) -> Result<DenseMatrix> {
    let global = train.global_mean().ok_or(Error::Empty)?;
    let mut sum = vec![0.0; train.num_items()];
    let mut n = vec![0usize; train.num_items()];
    for e in train.entries() {
        sum[e.item] += f64::from(e.rating);
        n[e.item] += 1;
    }
    let placeholder: Vec<f64> = sum
        .iter()
        .zip(&n)
        .map(|(&s, &c)| if c == 0 { global } else { s / c as f64 })
        .collect();
    let mut m = DenseMatrix::from_fn(train.num_users(), train.num_items(), |_, i| placeholder[i]);
    for e in train.entries() {
        m.set(e.user, e.item, f64::from(e.rating));
    }
    Ok(m)
}

/// Column means and population standard deviations (divide by the row
/// count); a standard deviation below [`SIGMA_FLOOR`] becomes 1.
pub fn compute_stats(filled: &DenseMatrix) -> NormalizationStats {
    let rows = filled.rows() as f64;
    let mut mu = vec![0.0; filled.cols()];
    for row in filled.row_iter() {
        for (m, &x) in mu.iter_mut().zip(row) {
            *m += x;
        }
    }
    for m in &mut mu {
        *m /= rows;
    }
    let mut var = vec![0.0; filled.cols()];
    for row in filled.row_iter() {
        for ((v, &x), &m) in var.iter_mut().zip(row).zip(&mu) {
            *v += (x - m) * (x - m);
        }
    }
    let sigma = var
        .into_iter()
        .map(|v| {
            let s = (v / rows).sqrt();
            if s < SIGMA_FLOOR {
                1.0
            } else {
                s
            }
        })
        .collect();
    NormalizationStats { mu, sigma }
}

impl NormalizationStats {
    fn check(&self, m: &DenseMatrix) -> Result<()> {
        if m.cols() != self.mu.len() {
            return Err(Error::Shape(format!(
                "matrix has {} columns, stats cover {}",
                m.cols(),
                self.mu.len()
            )));
        }
        Ok(())
    }

    /// `(x - mu) / sigma` per column.
    pub fn normalize(&self, m: &DenseMatrix) -> Result<DenseMatrix> {
        self.check(m)?;
        let mut out = m.clone();
        for r in 0..out.rows() {
            for ((x, &mu), &s) in out.row_mut(r).iter_mut().zip(&self.mu).zip(&self.sigma) {
                *x = (*x - mu) / s;
            }
        }
        Ok(out)
    }

    /// `x * sigma + mu` per column.
    pub fn denormalize(&self, m: &DenseMatrix) -> Result<DenseMatrix> {
        self.check(m)?;
        let mut out = m.clone();
        for r in 0..out.rows() {
            for ((x, &mu), &s) in out.row_mut(r).iter_mut().zip(&self.mu).zip(&self.sigma) {
                *x = *x * s + mu;
            }
        }
        Ok(out)
    }
}

pub fn normalize(m: &DenseMatrix, stats: &NormalizationStats) -> Result<DenseMatrix> {
    stats.normalize(m)
}

pub fn denormalize(m: &DenseMatrix, stats: &NormalizationStats) -> Result<DenseMatrix> {
    stats.denormalize(m)
}

/// Rank-`c` factorization `U · diag(D) · Vᵀ`.
///
/// Singular values are non-increasing. Each singular pair is sign-fixed so
/// that the largest-magnitude coordinate of its right vector is positive.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedSvd {
    /// `M × c`, orthonormal columns.
    pub u: DenseMatrix,
    pub singular_values: Vec<f64>,
    /// `N × c`, orthonormal columns.
    pub v: DenseMatrix,
}

impl TruncatedSvd {
    /// Thin decomposition with all `min(M, N)` components.
    pub fn full(m: &DenseMatrix) -> Result<Self> {
        let (rows, cols) = (m.rows(), m.cols());
        let rank = rows.min(cols);
        if rank == 0 {
            return Err(Error::Rank {
                requested: 0,
                max: 0,
            });
        }
        let svd = SVD::try_new(m.to_nalgebra(), true, true, f64::EPSILON, SVD_MAX_ITERS).ok_or(
            Error::Convergence {
                iterations: SVD_MAX_ITERS,
            },
        )?;
        let u = svd.u.expect("requested U");
        let v_t = svd.v_t.expect("requested Vᵀ");

        let mut u_out = DenseMatrix::zeros(rows, rank);
        let mut v_out = DenseMatrix::zeros(cols, rank);
        for k in 0..rank {
            let mut pivot = 0;
            for j in 1..cols {
                if v_t[(k, j)].abs() > v_t[(k, pivot)].abs() {
                    pivot = j;
                }
            }
            let sign = if v_t[(k, pivot)] < 0.0 { -1.0 } else { 1.0 };
            for j in 0..cols {
                v_out.set(j, k, sign * v_t[(k, j)]);
            }
            for r in 0..rows {
                u_out.set(r, k, sign * u[(r, k)]);
            }
        }
        Ok(TruncatedSvd {
            u: u_out,
            singular_values: svd.singular_values.iter().copied().collect(),
            v: v_out,
        })
    }

    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    /// Leading `c` components.
    pub fn truncate(&self, c: usize) -> Result<TruncatedSvd> {
        check_rank(c, self.rank())?;
        let keep = |m: &DenseMatrix| DenseMatrix::from_fn(m.rows(), c, |r, k| m.get(r, k));
        Ok(TruncatedSvd {
            u: keep(&self.u),
            singular_values: self.singular_values[..c].to_vec(),
            v: keep(&self.v),
        })
    }

    /// `U · diag(D) · Vᵀ`.
    pub fn reconstruct(&self) -> DenseMatrix {
        self.reconstruct_rank(self.rank())
    }

    /// Reconstruction from the leading `c` components (`c` is capped at the
    /// stored rank).
    pub fn reconstruct_rank(&self, c: usize) -> DenseMatrix {
        let c = c.min(self.rank());
        let (rows, cols) = (self.u.rows(), self.v.rows());
        // scaled Vᵀ, c × N
        let mut dv = vec![0.0; c * cols];
        for k in 0..c {
            for j in 0..cols {
                dv[k * cols + j] = self.singular_values[k] * self.v.get(j, k);
            }
        }
        let mut out = DenseMatrix::zeros(rows, cols);
        for r in 0..rows {
            let u_row = self.u.row(r);
            let out_row = out.row_mut(r);
            for k in 0..c {
                let a = u_row[k];
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(&dv[k * cols..(k + 1) * cols]) {
                    *o += a * b;
                }
            }
        }
        out
    }
}

fn check_rank(c: usize, max: usize) -> Result<()> {
    if c == 0 || c > max {
        return Err(Error::Rank { requested: c, max });
    }
    Ok(())
}

/// Best rank-`c` approximation factors of `m` in Frobenius norm.
pub fn truncated_svd(m: &DenseMatrix, c: usize) -> Result<TruncatedSvd> {
    check_rank(c, m.rows().min(m.cols()))?;
    TruncatedSvd::full(m)?.truncate(c)
}

pub fn reconstruct(svd: &TruncatedSvd) -> DenseMatrix {
    svd.reconstruct()
}

/// Top-`k` right singular vectors of `m` (rows are observations), unit norm,
/// ordered by singular value, largest-magnitude coordinate positive.
///
/// `m` is expected to be column-centred already.
pub fn principal_components(m: &DenseMatrix, k: usize) -> Result<Vec<Vec<f64>>> {
    check_rank(k, m.rows().min(m.cols()))?;
    let svd = TruncatedSvd::full(m)?;
    Ok((0..k).map(|c| svd.v.column(c)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ratings() -> RatingsMatrix {
        RatingsMatrix::from_triples(3, 3, &[(0, 0, 2), (1, 0, 4), (2, 1, 5)]).unwrap()
    }

    #[test]
    fn mean_fill_uses_item_mean_then_global_mean() {
        let m = mean_fill(&ratings()).unwrap();
        assert_eq!(m.get(2, 0), 3.0);
        assert_eq!(m.get(0, 1), 5.0);
        let global = 11.0 / 3.0;
        for u in 0..3 {
            assert_eq!(m.get(u, 2), global);
        }
        assert_eq!(m.get(0, 0), 2.0);
    }

    #[test]
    fn stats_two_point_column() {
        let m = DenseMatrix::from_rows(&[vec![1.0, 7.0], vec![5.0, 7.0]]);
        let s = compute_stats(&m);
        assert_eq!(s.mu, vec![3.0, 7.0]);
        assert_eq!(s.sigma, vec![2.0, 1.0]);
        let z = s.normalize(&m).unwrap();
        assert_eq!(z.column(0), vec![-1.0, 1.0]);
        assert_eq!(z.column(1), vec![0.0, 0.0]);
    }

    #[test]
    fn normalized_placeholders_are_zero() {
        let r = ratings();
        let filled = mean_fill(&r).unwrap();
        let s = compute_stats(&filled);
        let z = s.normalize(&filled).unwrap();
        for u in 0..3 {
            for i in 0..3 {
                if r.get(u, i).is_none() {
                    assert_eq!(z.get(u, i), 0.0, "({u},{i})");
                }
            }
        }
        for c in 0..3 {
            let mean: f64 = z.column(c).iter().sum::<f64>() / 3.0;
            assert!(mean.abs() < 1e-10);
        }
    }

    #[test]
    fn stats_shape_mismatch() {
        let s = compute_stats(&DenseMatrix::zeros(2, 3));
        assert!(matches!(
            s.normalize(&DenseMatrix::zeros(2, 2)),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn identity_and_rank_one_reconstruct_exactly() {
        let eye = DenseMatrix::from_fn(4, 4, |r, c| if r == c { 1.0 } else { 0.0 });
        let svd = truncated_svd(&eye, 4).unwrap();
        assert!(svd.reconstruct().max_abs_diff(&eye) < 1e-10);

        let a = [1.0, -2.0, 0.5];
        let b = [3.0, 1.0, 0.0, -1.0];
        let outer = DenseMatrix::from_fn(3, 4, |r, c| a[r] * b[c]);
        let svd = truncated_svd(&outer, 1).unwrap();
        assert!(svd.reconstruct().max_abs_diff(&outer) < 1e-10);
    }

    #[test]
    fn diagonal_singular_values() {
        let m = DenseMatrix::from_rows(&[vec![3.0, 0.0], vec![0.0, 1.0]]);
        let svd = truncated_svd(&m, 2).unwrap();
        assert!((svd.singular_values[0] - 3.0).abs() < 1e-12);
        assert!((svd.singular_values[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_matrix() {
        let z = DenseMatrix::zeros(3, 2);
        let svd = truncated_svd(&z, 2).unwrap();
        assert!(svd.singular_values.iter().all(|&s| s == 0.0));
        assert_eq!(svd.reconstruct().max_abs_diff(&z), 0.0);
    }

    #[test]
    fn rank_out_of_range() {
        let m = DenseMatrix::zeros(3, 2);
        assert!(matches!(
            truncated_svd(&m, 0),
            Err(Error::Rank {
                requested: 0,
                max: 2
            })
        ));
        assert!(matches!(truncated_svd(&m, 3), Err(Error::Rank { .. })));
        assert!(matches!(
            principal_components(&m, 3),
            Err(Error::Rank { .. })
        ));
    }

    #[test]
    fn principal_component_of_line() {
        let dir = [0.6, -0.8, 0.0];
        let t = [-2.0, -1.0, 0.5, 1.0, 1.5];
        let m = DenseMatrix::from_fn(5, 3, |r, c| t[r] * dir[c]);
        let pcs = principal_components(&m, 1).unwrap();
        let cos: f64 = pcs[0].iter().zip(&dir).map(|(a, b)| a * b).sum();
        assert!((cos.abs() - 1.0).abs() < 1e-8);
        // sign convention: largest |coordinate| positive
        assert!(pcs[0][1] > 0.0);
    }
}
