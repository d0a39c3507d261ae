#![allow(dead_code)]

use cfrefine::{DenseMatrix, RatingsMatrix};
use rand::Rng;

/// Random ratings on an `m × n` grid, each cell observed with probability
/// `density`; at least one cell is always observed.
pub fn random_triples<R: Rng>(
    rng: &mut R,
    m: usize,
    n: usize,
    density: f64,
) -> Vec<(usize, usize, u8)> {
    let mut out = Vec::new();
    for u in 0..m {
        for i in 0..n {
            if rng.random::<f64>() < density {
                out.push((u, i, rng.random_range(1..=5u8)));
            }
        }
    }
    if out.is_empty() {
        out.push((
            rng.random_range(0..m),
            rng.random_range(0..n),
            rng.random_range(1..=5u8),
        ));
    }
    out
}

pub fn random_ratings<R: Rng>(rng: &mut R, m: usize, n: usize, density: f64) -> RatingsMatrix {
    RatingsMatrix::from_triples(m, n, &random_triples(rng, m, n, density)).unwrap()
}

pub fn random_dense<R: Rng>(rng: &mut R, m: usize, n: usize) -> DenseMatrix {
    DenseMatrix::from_fn(m, n, |_, _| rng.random_range(-2.0..2.0))
}

pub fn to_grid(m: &DenseMatrix) -> Vec<Vec<f64>> {
    m.row_iter().map(<[f64]>::to_vec).collect()
}

pub fn triples(m: &RatingsMatrix) -> Vec<(usize, usize, u8)> {
    m.entries()
        .iter()
        .map(|e| (e.user, e.item, e.rating))
        .collect()
}

pub fn missing_grid(m: &RatingsMatrix) -> Vec<Vec<bool>> {
    (0..m.num_users())
        .map(|u| (0..m.num_items()).map(|i| m.get(u, i).is_none()).collect())
        .collect()
}

pub fn max_grid_diff(a: &DenseMatrix, b: &[Vec<f64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for (r, row) in b.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            worst = worst.max((a.get(r, c) - v).abs());
        }
    }
    worst
}
