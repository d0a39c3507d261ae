//! Shared fixtures for the criterion benchmarks.

use cfrefine::linalg::{compute_stats, mean_fill};
use cfrefine::{generate, DenseMatrix, RatingsMatrix, SyntheticConfig};

/// Seeded synthetic ratings of the given shape at density 0.15.
pub fn ratings(users: usize, items: usize) -> RatingsMatrix {
    generate(&SyntheticConfig {
        users,
        items,
        ..SyntheticConfig::default()
    })
    .expect("valid synthetic config")
    .ratings
}

/// Normalized item-mean fill, the matrix K-means and the SVD operate on.
pub fn normalized(r: &RatingsMatrix) -> DenseMatrix {
    let filled = mean_fill(r).expect("nonempty ratings");
    compute_stats(&filled)
        .normalize(&filled)
        .expect("matching shapes")
}
