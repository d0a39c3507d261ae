//! Straight-line reference computations for tests.
//!
//! Everything here works on plain `Vec`s with explicit loops and shares no
//! code with the library it checks.

// explicit index loops are the point of this crate
#![allow(clippy::needless_range_loop)]

pub type Grid = Vec<Vec<f64>>;

/// `(user, item, rating)` triples on an `m × n` grid, `None` for unknown.
pub fn to_grid(m: usize, n: usize, triples: &[(usize, usize, u8)]) -> Vec<Vec<Option<f64>>> {
    let mut g = vec![vec![None; n]; m];
    for &(u, i, r) in triples {
        g[u][i] = Some(r as f64);
    }
    g
}

#[derive(Debug, Clone)]
pub struct CorrectedAverages {
    pub global_mean: f64,
    pub item_mean: Vec<f64>,
    pub global_offset: f64,
    pub user_offset: Vec<f64>,
}

pub fn corrected_averages(
    m: usize,
    n: usize,
    triples: &[(usize, usize, u8)],
    k1: f64,
    k2: f64,
) -> CorrectedAverages {
    let g = to_grid(m, n, triples);

    let mut total = 0.0;
    let mut count = 0.0;
    for u in 0..m {
        for i in 0..n {
            if let Some(r) = g[u][i] {
                total += r;
                count += 1.0;
            }
        }
    }
    let global_mean = total / count;

    let mut item_mean = vec![0.0; n];
    for i in 0..n {
        let mut s = 0.0;
        let mut c = 0.0;
        for u in 0..m {
            if let Some(r) = g[u][i] {
                s += r;
                c += 1.0;
            }
        }
        item_mean[i] = if c == 0.0 {
            global_mean
        } else {
            (k1 * global_mean + s) / (k1 + c)
        };
    }

    let mut off = 0.0;
    for u in 0..m {
        for i in 0..n {
            if let Some(r) = g[u][i] {
                off += r - item_mean[i];
            }
        }
    }
    let global_offset = off / count;

    let mut user_offset = vec![0.0; m];
    for u in 0..m {
        let mut s = 0.0;
        let mut c = 0.0;
        for i in 0..n {
            if let Some(r) = g[u][i] {
                s += r - item_mean[i];
                c += 1.0;
            }
        }
        user_offset[u] = if c == 0.0 {
            global_offset
        } else {
            (k2 * global_offset + s) / (k2 + c)
        };
    }

    CorrectedAverages {
        global_mean,
        item_mean,
        global_offset,
        user_offset,
    }
}

pub fn corrected_fill(
    m: usize,
    n: usize,
    triples: &[(usize, usize, u8)],
    k1: f64,
    k2: f64,
) -> Grid {
    let ca = corrected_averages(m, n, triples, k1, k2);
    let g = to_grid(m, n, triples);
    let mut out = vec![vec![0.0; n]; m];
    for u in 0..m {
        for i in 0..n {
            out[u][i] = match g[u][i] {
                Some(r) => r,
                None => ca.item_mean[i] + ca.user_offset[u],
            };
        }
    }
    out
}

/// Item-mean fill; never-rated items get the global mean.
pub fn mean_fill(m: usize, n: usize, triples: &[(usize, usize, u8)]) -> Grid {
    let g = to_grid(m, n, triples);
    let mut total = 0.0;
    let mut count = 0.0;
    for &(_, _, r) in triples {
        total += r as f64;
        count += 1.0;
    }
    let global = total / count;
    let mut out = vec![vec![0.0; n]; m];
    for i in 0..n {
        let mut s = 0.0;
        let mut c = 0.0;
        for u in 0..m {
            if let Some(r) = g[u][i] {
                s += r;
                c += 1.0;
            }
        }
        let fill = if c == 0.0 { global } else { s / c };
        for u in 0..m {
            out[u][i] = g[u][i].unwrap_or(fill);
        }
    }
    out
}

/// Column means and population standard deviations (std < 1e-12 → 1).
pub fn column_stats(a: &Grid) -> (Vec<f64>, Vec<f64>) {
    let m = a.len();
    let n = a[0].len();
    let mut mu = vec![0.0; n];
    let mut sigma = vec![0.0; n];
    for j in 0..n {
        let mut s = 0.0;
        for i in 0..m {
            s += a[i][j];
        }
        mu[j] = s / m as f64;
        let mut v = 0.0;
        for i in 0..m {
            v += (a[i][j] - mu[j]).powi(2);
        }
        let sd = (v / m as f64).sqrt();
        sigma[j] = if sd < 1e-12 { 1.0 } else { sd };
    }
    (mu, sigma)
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 0..a.len() {
        s += (a[k] - b[k]).powi(2);
    }
    s.sqrt()
}

/// `(neighbour, distance, weight)` over the other members of `u`'s cluster,
/// in ascending user order.
pub fn neighbor_weights(points: &Grid, assignment: &[usize], u: usize) -> Vec<(usize, f64, f64)> {
    let mut out = Vec::new();
    for v in 0..points.len() {
        if v != u && assignment[v] == assignment[u] {
            let d = euclidean(&points[u], &points[v]);
            out.push((v, d, 1.0 / (1.0 + d * d)));
        }
    }
    out
}

/// Weighted neighbour average at every cell flagged missing.
pub fn weighted_fill(points: &Grid, assignment: &[usize], missing: &[Vec<bool>]) -> Grid {
    let mut out = points.clone();
    for u in 0..points.len() {
        let nb = neighbor_weights(points, assignment, u);
        if nb.is_empty() {
            continue;
        }
        for i in 0..points[u].len() {
            if !missing[u][i] {
                continue;
            }
            let mut num = 0.0;
            let mut den = 0.0;
            for &(v, _, w) in &nb {
                num += w * points[v][i];
                den += w;
            }
            out[u][i] = num / den;
        }
    }
    out
}

pub fn centroid_fill(
    points: &Grid,
    assignment: &[usize],
    centroids: &Grid,
    missing: &[Vec<bool>],
) -> Grid {
    let mut out = points.clone();
    for u in 0..points.len() {
        for i in 0..points[u].len() {
            if missing[u][i] {
                out[u][i] = centroids[assignment[u]][i];
            }
        }
    }
    out
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, sorted
/// descending.
pub fn jacobi_eigenvalues(mut a: Grid) -> Vec<f64> {
    let n = a.len();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in 0..n {
                if p != q {
                    off += a[p][q] * a[p][q];
                }
            }
        }
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(|x, y| y.partial_cmp(x).unwrap());
    ev
}

/// `aᵀa`
pub fn gram(a: &Grid) -> Grid {
    let n = a[0].len();
    let mut g = vec![vec![0.0; n]; n];
    for p in 0..n {
        for q in 0..n {
            let mut s = 0.0;
            for row in a {
                s += row[p] * row[q];
            }
            g[p][q] = s;
        }
    }
    g
}

/// `a aᵀ`
pub fn row_gram(a: &Grid) -> Grid {
    let m = a.len();
    let mut g = vec![vec![0.0; m]; m];
    for p in 0..m {
        for q in 0..m {
            let mut s = 0.0;
            for k in 0..a[p].len() {
                s += a[p][k] * a[q][k];
            }
            g[p][q] = s;
        }
    }
    g
}

/// Smallest Frobenius error of any rank-`c` approximation of `a`: square
/// root of the sum of the discarded Gram eigenvalues. The smaller of the two
/// Gram matrices is used so that no structurally zero eigenvalue enters the
/// sum as rounding noise.
pub fn optimal_rank_error(a: &Grid, c: usize) -> f64 {
    let g = if a.len() < a[0].len() {
        row_gram(a)
    } else {
        gram(a)
    };
    let ev = jacobi_eigenvalues(g);
    let keep = c.min(ev.len());
    let tail: f64 = ev[keep..].iter().map(|&x| x.max(0.0)).sum();
    tail.sqrt()
}

/// Within-cluster sum of squares of a labelling, each cluster around its mean.
pub fn partition_cost(points: &Grid, labels: &[usize], k: usize) -> f64 {
    let d = points[0].len();
    let mut cost = 0.0;
    for c in 0..k {
        let members: Vec<&Vec<f64>> = points
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l == c)
            .map(|(p, _)| p)
            .collect();
        if members.is_empty() {
            continue;
        }
        let mut mean = vec![0.0; d];
        for p in &members {
            for j in 0..d {
                mean[j] += p[j];
            }
        }
        for j in 0..d {
            mean[j] /= members.len() as f64;
        }
        for p in &members {
            for j in 0..d {
                cost += (p[j] - mean[j]).powi(2);
            }
        }
    }
    cost
}

/// Minimum two-cluster objective by enumerating every labelling.
pub fn best_two_partition(points: &Grid) -> (f64, Vec<usize>) {
    let n = points.len();
    assert!(n <= 20, "exhaustive search is exponential");
    let mut best = (f64::INFINITY, vec![0; n]);
    // fix point 0 in cluster 0 to skip mirrored labellings
    for mask in 0u32..(1 << (n - 1)) {
        let mut labels = vec![0usize; n];
        for p in 1..n {
            labels[p] = ((mask >> (p - 1)) & 1) as usize;
        }
        if labels.iter().all(|&l| l == 0) {
            continue;
        }
        let cost = partition_cost(points, &labels, 2);
        if cost < best.0 {
            best = (cost, labels);
        }
    }
    best
}
