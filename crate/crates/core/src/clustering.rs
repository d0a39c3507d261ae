//! User-based K-means (Lloyd iteration) and the two cluster predictors:
//! distance-weighted neighbour averages and closest-centroid values.

use std::io::Write;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dense::{DenseMatrix, KnownMask};
use crate::error::{Error, Result};

pub const DEFAULT_MAX_ITERS: usize = 100;
/// Relative objective improvement below which Lloyd iteration stops.
pub const DEFAULT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub k: usize,
    /// `k × N`
    pub centroids: DenseMatrix,
    pub assignment: Vec<usize>,
    /// Sum of squared distances from each user to its assigned centroid.
    pub objective: f64,
    pub iterations: usize,
    /// Objective after each iteration.
    pub history: Vec<f64>,
}

impl ClusterModel {
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (u, &c) in self.assignment.iter().enumerate() {
            out[c].push(u);
        }
        out
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &c in &self.assignment {
            sizes[c] += 1;
        }
        sizes
    }

    /// CSV `user_id,cluster_id`.
    pub fn write_csv<W: Write>(
        &self,
        mut out: W,
        user_label: impl Fn(usize) -> String,
    ) -> std::io::Result<()> {
        writeln!(out, "user_id,cluster_id")?;
        for (u, c) in self.assignment.iter().enumerate() {
            writeln!(out, "{},{c}", user_label(u))?;
        }
        Ok(())
    }
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(points: &DenseMatrix, centroids: &DenseMatrix) -> Vec<usize> {
    points
        .row_iter()
        .map(|p| {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, centroid) in centroids.row_iter().enumerate() {
                let d = sq_dist(p, centroid);
                // strict: ties go to the lowest index
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            best
        })
        .collect()
}

/// Moves, for each empty cluster, the point farthest from its current
/// centroid into it. Only clusters with at least two members donate.
fn fill_empty(points: &DenseMatrix, centroids: &DenseMatrix, assignment: &mut [usize]) {
    let k = centroids.rows();
    let mut sizes = vec![0usize; k];
    for &c in assignment.iter() {
        sizes[c] += 1;
    }
    for empty in 0..k {
        if sizes[empty] > 0 {
            continue;
        }
        let mut pick = None;
        let mut pick_d = f64::NEG_INFINITY;
        for (u, &c) in assignment.iter().enumerate() {
            if sizes[c] < 2 {
                continue;
            }
            let d = sq_dist(points.row(u), centroids.row(c));
            if d > pick_d {
                pick_d = d;
                pick = Some(u);
            }
        }
        // k <= M guarantees a donor exists while any cluster is empty
        let u = pick.expect("a cluster with two or more members");
        sizes[assignment[u]] -= 1;
        assignment[u] = empty;
        sizes[empty] = 1;
    }
}

fn means(points: &DenseMatrix, assignment: &[usize], k: usize) -> DenseMatrix {
    let mut sums = DenseMatrix::zeros(k, points.cols());
    let mut counts = vec![0usize; k];
    for (p, &c) in points.row_iter().zip(assignment) {
        counts[c] += 1;
        for (s, &x) in sums.row_mut(c).iter_mut().zip(p) {
            *s += x;
        }
    }
    for (c, &n) in counts.iter().enumerate() {
        let n = n as f64;
        for s in sums.row_mut(c) {
            *s /= n;
        }
    }
    sums
}

pub fn objective(points: &DenseMatrix, centroids: &DenseMatrix, assignment: &[usize]) -> f64 {
    points
        .row_iter()
        .zip(assignment)
        .map(|(p, &c)| sq_dist(p, centroids.row(c)))
        .sum()
}

/// Lloyd iteration over the rows of `points`, starting from `initial`.
///
/// Stops when the assignment no longer changes, the relative objective
/// improvement falls to `tol` or below, or after `max_iters` iterations.
/// Clusters never end up empty.
pub fn kmeans(
    points: &DenseMatrix,
    initial: &[Vec<f64>],
    max_iters: usize,
    tol: f64,
) -> Result<ClusterModel> {
    let k = initial.len();
    if k == 0 {
        return Err(Error::Config("K-means needs at least one centroid".into()));
    }
    if k > points.rows() {
        return Err(Error::Config(format!(
            "{k} clusters requested for {} users",
            points.rows()
        )));
    }
    if max_iters == 0 {
        return Err(Error::Config("max_iters must be at least 1".into()));
    }
    if tol.is_nan() || tol < 0.0 {
        return Err(Error::Config(format!(
            "tolerance {tol} must be non-negative"
        )));
    }
    if let Some(bad) = initial.iter().find(|c| c.len() != points.cols()) {
        return Err(Error::Shape(format!(
            "centroid of length {} for {}-dimensional points",
            bad.len(),
            points.cols()
        )));
    }

    let mut centroids = DenseMatrix::from_rows(initial);
    let mut assignment: Vec<usize> = Vec::new();
    let mut history = Vec::new();

    for _ in 0..max_iters {
        let mut next = nearest(points, &centroids);
        fill_empty(points, &centroids, &mut next);
        let changed = next != assignment;
        centroids = means(points, &next, k);
        assignment = next;
        let obj = objective(points, &centroids, &assignment);
        let stalled = history
            .last()
            .is_some_and(|&prev: &f64| prev - obj <= tol * prev);
        history.push(obj);
        if !changed || obj <= 0.0 || stalled {
            break;
        }
    }

    Ok(ClusterModel {
        k,
        objective: *history.last().expect("at least one iteration"),
        iterations: history.len(),
        centroids,
        assignment,
        history,
    })
}

/// `k` distinct user rows chosen at random. Only meant as a control against
/// principal-component seeding.
pub fn random_seeds(points: &DenseMatrix, k: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if k == 0 || k > points.rows() {
        return Err(Error::Config(format!(
            "{k} seeds requested from {} users",
            points.rows()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(sample(&mut rng, points.rows(), k)
        .into_iter()
        .map(|u| points.row(u).to_vec())
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub user: usize,
    pub distance: f64,
    /// `1 / (1 + distance²)`
    pub weight: f64,
}

/// The other members of a user's cluster with their distances and weights.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborWeights {
    pub user: usize,
    pub neighbors: Vec<Neighbor>,
}

fn neighbors_of(points: &DenseMatrix, members: &[usize], u: usize) -> Vec<Neighbor> {
    let row = points.row(u);
    members
        .iter()
        .filter(|&&v| v != u)
        .map(|&v| {
            let d2 = sq_dist(row, points.row(v));
            Neighbor {
                user: v,
                distance: d2.sqrt(),
                weight: 1.0 / (1.0 + d2),
            }
        })
        .collect()
}

pub fn weights_for(points: &DenseMatrix, model: &ClusterModel, u: usize) -> NeighborWeights {
    let c = model.assignment[u];
    let members: Vec<usize> = (0..model.assignment.len())
        .filter(|&v| model.assignment[v] == c)
        .collect();
    NeighborWeights {
        user: u,
        neighbors: neighbors_of(points, &members, u),
    }
}

fn check_shapes(points: &DenseMatrix, model: &ClusterModel, mask: &KnownMask) -> Result<()> {
    if model.assignment.len() != points.rows()
        || mask.rows() != points.rows()
        || mask.cols() != points.cols()
    {
        return Err(Error::Shape(format!(
            "points {}x{}, mask {}x{}, {} assignments",
            points.rows(),
            points.cols(),
            mask.rows(),
            mask.cols(),
            model.assignment.len()
        )));
    }
    Ok(())
}

/// Missing cells become the distance-weighted mean of the same column over
/// the other members of the user's cluster; known cells are copied. A user
/// alone in its cluster keeps its own row.
pub fn predict_weighted(
    points: &DenseMatrix,
    model: &ClusterModel,
    mask: &KnownMask,
) -> Result<DenseMatrix> {
    check_shapes(points, model, mask)?;
    let members = model.members();
    let cols = points.cols();
    let mut out = points.clone();
    out.as_mut_slice()
        .par_chunks_mut(cols.max(1))
        .enumerate()
        .for_each(|(u, out_row)| {
            if cols == 0 || mask.row(u).iter().all(|&k| k) {
                return;
            }
            let neighbors = neighbors_of(points, &members[model.assignment[u]], u);
            if neighbors.is_empty() {
                return;
            }
            let total: f64 = neighbors.iter().map(|n| n.weight).sum();
            let mut acc = vec![0.0; cols];
            for n in &neighbors {
                for (a, &x) in acc.iter_mut().zip(points.row(n.user)) {
                    *a += n.weight * x;
                }
            }
            for (i, (o, a)) in out_row.iter_mut().zip(acc).enumerate() {
                if mask.is_missing(u, i) {
                    *o = a / total;
                }
            }
        });
    Ok(out)
}

/// Missing cells take the coordinate of the user's assigned centroid.
pub fn predict_centroid(
    points: &DenseMatrix,
    model: &ClusterModel,
    mask: &KnownMask,
) -> Result<DenseMatrix> {
    check_shapes(points, model, mask)?;
    let mut out = points.clone();
    for (u, &c) in model.assignment.iter().enumerate() {
        for i in 0..points.cols() {
            if mask.is_missing(u, i) {
                out.set(u, i, model.centroids.get(c, i));
            }
        }
    }
    Ok(out)
}
