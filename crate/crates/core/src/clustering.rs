//! From coefficients to clusters: affinity graph, eigengap cluster-count
//! estimate, spectral clustering, and the matched clustering error.
//!
//! The affinity of a coefficient matrix C is W = |C| + |C^T|. Its symmetric
//! normalized Laplacian I - D^{-1/2} W D^{-1/2} has eigenvalues in [0, 2];
//! with eigenvalues sorted descending sigma_1 >= ... >= sigma_N, the cluster
//! count is estimated as
//!
//! ```text
//!     L_hat = N - argmax_{i = 1..N-1} (sigma_i - sigma_{i+1})
//! ```
//!
//! (ties take the smallest i, i.e. the largest L_hat). Spectral clustering
//! runs seeded k-means on the row-normalized embedding spanned by the L_hat
//! smallest-eigenvalue eigenvectors. `clustering_error` matches predicted to
//! true labels with an exact assignment solve, so the reported fraction is
//! the true minimum over label renamings.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::{real, tol, Col, Mat, Real};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AffinityGraph<T: Real> {
    /// W = |C| + |C^T|: symmetric, nonnegative, zero diagonal.
    pub weights: Mat<T>,
    pub degrees: Col<T>,
    /// Eigenvalues of the normalized Laplacian, sorted nonincreasing.
    pub eigenvalues: Col<T>,
    /// Columns are eigenvectors, aligned with `eigenvalues`.
    pub eigenvectors: Mat<T>,
    /// Vertices with zero degree (given a tiny substitute degree for the
    /// normalization and excluded from meaningful clustering).
    pub isolated: Vec<usize>,
    /// Every weight is zero.
    pub trivial: bool,
}

/// Builds the affinity graph of a zero-diagonal coefficient matrix and
/// eigendecomposes its normalized Laplacian.
pub fn build_affinity<T: Real>(coefficients: &Mat<T>) -> Result<AffinityGraph<T>> {
    let n = coefficients.ncols();
    if coefficients.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "coefficient matrix is {}x{}",
            coefficients.nrows(),
            n
        )));
    }
    if coefficients.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("coefficient matrix".into()));
    }
    for i in 0..n {
        if coefficients[(i, i)] != T::zero() {
            return Err(Error::InvalidParameter(format!(
                "diagonal entry {i} is nonzero; self-representation must exclude the point itself"
            )));
        }
    }

    let mut weights = Mat::<T>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            weights[(i, j)] = coefficients[(i, j)].abs() + coefficients[(j, i)].abs();
        }
    }
    let degrees = Col::<T>::from_fn(n, |i, _| {
        weights.row(i).iter().fold(T::zero(), |s, &v| s + v)
    });
    let isolated: Vec<usize> = (0..n).filter(|&i| degrees[i] == T::zero()).collect();
    let trivial = isolated.len() == n;

    // Symmetric normalized Laplacian with substitute degrees at isolated
    // vertices (their rows of W are zero, so those rows reduce to identity).
    let scale = Col::<T>::from_fn(n, |i, _| {
        let d = if degrees[i] > T::zero() {
            degrees[i]
        } else {
            real(tol::ISOLATED_DEGREE)
        };
        T::one() / d.sqrt()
    });
    let mut laplacian = Mat::<T>::zeros(n, n);
    for i in 0..n {
        laplacian[(i, i)] = T::one();
        for j in 0..n {
            laplacian[(i, j)] -= scale[i] * scale[j] * weights[(i, j)];
        }
    }
    let eigen = nalgebra::SymmetricEigen::new(laplacian);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eigen.eigenvalues[b]
            .partial_cmp(&eigen.eigenvalues[a])
            .expect("finite eigenvalues")
    });
    let eigenvalues = Col::<T>::from_fn(n, |i, _| eigen.eigenvalues[order[i]]);
    let mut eigenvectors = Mat::<T>::zeros(n, n);
    for (at, &src) in order.iter().enumerate() {
        eigenvectors.set_column(at, &eigen.eigenvectors.column(src));
    }

    let slack = real::<T>(tol::EIG_RANGE_TOL);
    if eigenvalues
        .iter()
        .any(|&s| s < -slack || s > real::<T>(2.0) + slack)
    {
        return Err(Error::Geometry(format!(
            "normalized Laplacian spectrum escaped [0, 2]: extremes ({:?}, {:?})",
            eigenvalues[n - 1],
            eigenvalues[0]
        )));
    }

    Ok(AffinityGraph {
        weights,
        degrees,
        eigenvalues,
        eigenvectors,
        isolated,
        trivial,
    })
}

/// Largest-eigengap estimate of the number of clusters; ties pick the
/// smallest gap index (the largest estimate).
pub fn estimate_num_clusters<T: Real>(graph: &AffinityGraph<T>) -> Result<usize> {
    let n = graph.eigenvalues.len();
    if n < 2 {
        return Err(Error::InvalidParameter(
            "cluster-count estimation needs at least two vertices".into(),
        ));
    }
    if graph.trivial {
        return Err(Error::DegenerateGraph);
    }
    // Ties (up to eigensolver noise) resolve toward the earlier gap, i.e. the
    // larger cluster count.
    let tie = real::<T>(tol::EIGENGAP_TIE_TOL);
    let mut best_i = 1;
    let mut best_gap = graph.eigenvalues[0] - graph.eigenvalues[1];
    for i in 2..n {
        let gap = graph.eigenvalues[i - 1] - graph.eigenvalues[i];
        if gap > best_gap + tie {
            best_gap = gap;
            best_i = i;
        }
    }
    Ok(n - best_i)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectralClustering {
    /// Cluster index per vertex, in 0..num_clusters.
    pub labels: Vec<usize>,
    /// Fewer distinct clusters than requested came back (coincident
    /// embedding rows force merges).
    pub merged: bool,
}

/// Seeded spectral clustering: k-means on the row-normalized embedding of
/// the `num_clusters` smallest-eigenvalue eigenvectors.
pub fn spectral_cluster<T: Real>(
    graph: &AffinityGraph<T>,
    num_clusters: usize,
    seed: u64,
) -> Result<SpectralClustering> {
    let n = graph.eigenvalues.len();
    if num_clusters < 1 || num_clusters > n {
        return Err(Error::InvalidParameter(format!(
            "cannot split {n} vertices into {num_clusters} clusters"
        )));
    }
    if num_clusters == 1 {
        return Ok(SpectralClustering {
            labels: vec![0; n],
            merged: false,
        });
    }

    // The smallest eigenvalues sit at the tail of the descending order.
    let mut rows: Vec<Col<T>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = Col::<T>::from_fn(num_clusters, |j, _| {
            graph.eigenvectors[(i, n - num_clusters + j)]
        });
        let norm = row.norm();
        if norm > real(tol::EMBEDDING_ZERO_TOL) {
            row /= norm;
        }
        rows.push(row);
    }

    let (labels, _) = kmeans(&rows, num_clusters, seed);
    let mut seen = vec![false; num_clusters];
    for &l in &labels {
        seen[l] = true;
    }
    let merged = seen.iter().any(|&s| !s);
    Ok(SpectralClustering { labels, merged })
}

/// Seeded k-means with k-means++ starts; restarts run in parallel and the
/// winner is the lowest objective, ties broken by restart index.
fn kmeans<T: Real>(points: &[Col<T>], k: usize, seed: u64) -> (Vec<usize>, T) {
    let runs: Vec<(Vec<usize>, T)> = (0..tol::KMEANS_RESTARTS as u64)
        .into_par_iter()
        .map(|restart| {
            let mut rng = ChaCha8Rng::seed_from_u64(
                seed.wrapping_add(restart.wrapping_mul(0x9E37_79B9_7F4A_7C15)),
            );
            kmeans_once(points, k, &mut rng)
        })
        .collect();
    let mut best = 0;
    for i in 1..runs.len() {
        if runs[i].1 < runs[best].1 {
            best = i;
        }
    }
    runs[best].clone()
}

fn kmeans_once<T: Real>(points: &[Col<T>], k: usize, rng: &mut ChaCha8Rng) -> (Vec<usize>, T) {
    let n = points.len();
    let dim = points[0].len();

    // k-means++ seeding.
    let mut centers: Vec<Col<T>> = Vec::with_capacity(k);
    centers.push(points[rng.random_range(0..n)].clone());
    let mut dist_sq: Vec<T> = points
        .iter()
        .map(|p| (p - &centers[0]).norm_squared())
        .collect();
    while centers.len() < k {
        let total = dist_sq.iter().fold(T::zero(), |s, &v| s + v);
        let next = if total > T::zero() {
            let target = real::<T>(rng.random::<f64>()) * total;
            let mut acc = T::zero();
            let mut chosen = n - 1;
            for (i, &d) in dist_sq.iter().enumerate() {
                acc += d;
                if acc >= target {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.push(points[next].clone());
        for (i, p) in points.iter().enumerate() {
            let d = (p - centers.last().unwrap()).norm_squared();
            if d < dist_sq[i] {
                dist_sq[i] = d;
            }
        }
    }

    let mut labels = vec![0usize; n];
    for _ in 0..tol::KMEANS_MAX_ITERATIONS {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let mut best = 0;
            let mut best_d = (p - &centers[0]).norm_squared();
            for (c, center) in centers.iter().enumerate().skip(1) {
                let d = (p - center).norm_squared();
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }

        let mut sums = vec![Col::<T>::zeros(dim); k];
        let mut counts = vec![0usize; k];
        for (i, p) in points.iter().enumerate() {
            sums[labels[i]] += p;
            counts[labels[i]] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = &sums[c] / real::<T>(counts[c] as f64);
            } else {
                // Respawn an empty cluster at the point farthest from its
                // current center.
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let da = (&points[a] - &centers[labels[a]]).norm_squared();
                        let db = (&points[b] - &centers[labels[b]]).norm_squared();
                        da.partial_cmp(&db).expect("finite distances")
                    })
                    .expect("nonempty point set");
                centers[c] = points[far].clone();
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let objective = points
        .iter()
        .zip(&labels)
        .map(|(p, &l)| (p - &centers[l]).norm_squared())
        .fold(T::zero(), |s, v| s + v);
    (labels, objective)
}

/// Fraction of points misclustered under the best matching of predicted to
/// true labels (exact assignment, not a greedy heuristic).
pub fn clustering_error(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::LabelMismatch(format!(
            "{} predicted labels vs {} true labels",
            predicted.len(),
            truth.len()
        )));
    }
    let n = predicted.len();
    if n == 0 {
        return Err(Error::InvalidParameter("empty labelings".into()));
    }

    let compact = |labels: &[usize]| -> (Vec<usize>, usize) {
        let mut map = std::collections::BTreeMap::new();
        let ids = labels
            .iter()
            .map(|&l| {
                let next = map.len();
                *map.entry(l).or_insert(next)
            })
            .collect();
        (ids, map.len())
    };
    let (pred, kp) = compact(predicted);
    let (tru, kt) = compact(truth);

    let size = kp.max(kt);
    let mut agreement = vec![vec![0i64; size]; size];
    for i in 0..n {
        agreement[pred[i]][tru[i]] += 1;
    }
    // Maximum-agreement matching = minimum-cost assignment on negated counts.
    let cost: Vec<Vec<i64>> = agreement
        .iter()
        .map(|row| row.iter().map(|&c| -c).collect())
        .collect();
    let matched = -hungarian_min(&cost);
    Ok(1.0 - matched as f64 / n as f64)
}

/// Minimum-cost perfect assignment on a square i64 matrix (potentials
/// method, O(size^3)). Returns the optimal total cost.
fn hungarian_min(cost: &[Vec<i64>]) -> i64 {
    let size = cost.len();
    const INF: i64 = i64::MAX / 4;
    // 1-based arrays; p[j] is the row matched to column j, p[0] the row
    // currently being inserted.
    let mut u = vec![0i64; size + 1];
    let mut v = vec![0i64; size + 1];
    let mut p = vec![0usize; size + 1];
    let mut way = vec![0usize; size + 1];

    for i in 1..=size {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![INF; size + 1];
        let mut used = vec![false; size + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = INF;
            let mut j1 = 0usize;
            for j in 1..=size {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=size {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        // Augment along the found path.
        while j0 != 0 {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        }
    }

    let mut total = 0;
    for j in 1..=size {
        if p[j] > 0 {
            total += cost[p[j] - 1][j - 1];
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph_from_weights(w: Mat<f64>) -> AffinityGraph<f64> {
        // Route through build_affinity via a coefficient matrix whose
        // |C| + |C^T| reproduces w: take C = w/2.
        build_affinity(&(w * 0.5)).unwrap()
    }

    fn block_diagonal(blocks: &[usize]) -> Mat<f64> {
        let n: usize = blocks.iter().sum();
        let mut w = Mat::<f64>::zeros(n, n);
        let mut at = 0;
        for &b in blocks {
            for i in at..at + b {
                for j in at..at + b {
                    if i != j {
                        w[(i, j)] = 1.0;
                    }
                }
            }
            at += b;
        }
        w
    }

    #[test]
    fn affinity_is_the_symmetrized_absolute_sum() {
        let c = Mat::from_column_slice(2, 2, &[0.0, 0.75, 0.75, 0.0]);
        let g = build_affinity(&c).unwrap();
        assert_eq!(g.weights[(0, 1)], 1.5);
        assert_eq!(g.weights[(1, 0)], 1.5);
        assert_eq!(g.weights[(0, 0)], 0.0);

        let mut upper = Mat::<f64>::zeros(3, 3);
        upper[(0, 1)] = -0.4;
        let g = build_affinity(&upper).unwrap();
        assert_eq!(g.weights[(0, 1)], 0.4);
        assert_eq!(g.weights[(1, 0)], 0.4);
    }

    #[test]
    fn zero_coefficients_build_a_trivial_graph() {
        let g = build_affinity(&Mat::<f64>::zeros(3, 3)).unwrap();
        assert!(g.trivial);
        assert_eq!(g.isolated, vec![0, 1, 2]);
        assert!(matches!(
            estimate_num_clusters(&g),
            Err(Error::DegenerateGraph)
        ));
    }

    #[test]
    fn nonzero_diagonal_is_rejected() {
        let mut c = Mat::<f64>::zeros(2, 2);
        c[(0, 0)] = 0.1;
        assert!(build_affinity(&c).is_err());
    }

    #[test]
    fn complete_graph_estimates_one_cluster() {
        let g = graph_from_weights(block_diagonal(&[6]));
        assert_eq!(estimate_num_clusters(&g).unwrap(), 1);
        // Spectrum: one zero, the rest N/(N-1).
        assert!(g.eigenvalues[5].abs() < 1e-10);
        assert!((g.eigenvalues[0] - 6.0 / 5.0).abs() < 1e-10);
    }

    #[test]
    fn two_disjoint_edges_estimate_two_clusters() {
        let g = graph_from_weights(block_diagonal(&[2, 2]));
        assert_eq!(estimate_num_clusters(&g).unwrap(), 2);
    }

    #[test]
    fn block_diagonal_spectrum_has_one_zero_per_component() {
        let g = graph_from_weights(block_diagonal(&[3, 4, 2]));
        let zeros = g.eigenvalues.iter().filter(|&&s| s.abs() <= 1e-8).count();
        assert_eq!(zeros, 3);
        assert_eq!(estimate_num_clusters(&g).unwrap(), 3);
        for &s in g.eigenvalues.iter() {
            assert!(s >= -1e-8 && s <= 2.0 + 1e-8);
        }
    }

    #[test]
    fn eigengap_ties_pick_the_larger_estimate() {
        // Path on 3 vertices: spectrum {0, 1, 2}, two equal gaps; the
        // smaller argmax index wins, so L_hat = 2, not 1.
        let mut w = Mat::<f64>::zeros(3, 3);
        w[(0, 1)] = 1.0;
        w[(1, 0)] = 1.0;
        w[(1, 2)] = 1.0;
        w[(2, 1)] = 1.0;
        let g = graph_from_weights(w);
        assert_eq!(estimate_num_clusters(&g).unwrap(), 2);
    }

    #[test]
    fn isolated_vertices_are_flagged() {
        let mut w = Mat::<f64>::zeros(3, 3);
        w[(0, 1)] = 1.0;
        w[(1, 0)] = 1.0;
        let g = graph_from_weights(w);
        assert_eq!(g.isolated, vec![2]);
        assert!(!g.trivial);
    }

    #[test]
    fn scaling_weights_changes_nothing() {
        let w = block_diagonal(&[3, 3]);
        let g1 = graph_from_weights(w.clone());
        let g5 = graph_from_weights(w * 5.0);
        assert!((&g1.eigenvalues - &g5.eigenvalues).amax() < 1e-10);
        assert_eq!(
            estimate_num_clusters(&g1).unwrap(),
            estimate_num_clusters(&g5).unwrap()
        );
        let c1 = spectral_cluster(&g1, 2, 11).unwrap();
        let c5 = spectral_cluster(&g5, 2, 11).unwrap();
        assert_eq!(clustering_error(&c1.labels, &c5.labels).unwrap(), 0.0);
    }

    #[test]
    fn disconnected_blocks_are_recovered_exactly() {
        let g = graph_from_weights(block_diagonal(&[4, 3, 5]));
        let k = estimate_num_clusters(&g).unwrap();
        assert_eq!(k, 3);
        let clusters = spectral_cluster(&g, k, 7).unwrap();
        assert!(!clusters.merged);
        let truth: Vec<usize> = std::iter::repeat(0)
            .take(4)
            .chain(std::iter::repeat(1).take(3))
            .chain(std::iter::repeat(2).take(5))
            .collect();
        assert_eq!(clustering_error(&clusters.labels, &truth).unwrap(), 0.0);
    }

    #[test]
    fn single_cluster_and_all_singletons() {
        let g = graph_from_weights(block_diagonal(&[4]));
        let one = spectral_cluster(&g, 1, 3).unwrap();
        assert_eq!(one.labels, vec![0, 0, 0, 0]);

        let all = spectral_cluster(&g, 4, 3).unwrap();
        assert_eq!(all.labels.len(), 4);
        assert!(spectral_cluster(&g, 5, 3).is_err());
        assert!(spectral_cluster(&g, 0, 3).is_err());
    }

    #[test]
    fn clustering_is_deterministic_given_the_seed() {
        let g = graph_from_weights(block_diagonal(&[3, 3, 2]));
        let a = spectral_cluster(&g, 3, 42).unwrap();
        let b = spectral_cluster(&g, 3, 42).unwrap();
        assert_eq!(a.labels, b.labels);
    }

    #[test]
    fn permuting_vertices_permutes_the_clustering() {
        let w = block_diagonal(&[3, 3]);
        let truth = vec![0, 0, 0, 1, 1, 1];
        let perm = [4, 2, 0, 5, 1, 3];
        let mut wp = Mat::<f64>::zeros(6, 6);
        for i in 0..6 {
            for j in 0..6 {
                wp[(perm[i], perm[j])] = w[(i, j)];
            }
        }
        let truth_p: Vec<usize> = {
            let mut t = vec![0; 6];
            for i in 0..6 {
                t[perm[i]] = truth[i];
            }
            t
        };
        let g = graph_from_weights(wp);
        let clusters = spectral_cluster(&g, 2, 5).unwrap();
        assert_eq!(clustering_error(&clusters.labels, &truth_p).unwrap(), 0.0);
    }

    #[test]
    fn clustering_error_frozen_cases() {
        let truth = vec![0, 0, 0, 1, 1, 1, 2, 2, 2, 2];
        assert_eq!(clustering_error(&truth, &truth).unwrap(), 0.0);

        // Renaming labels costs nothing.
        let renamed: Vec<usize> = truth.iter().map(|&l| (l + 1) % 3).collect();
        assert_eq!(clustering_error(&renamed, &truth).unwrap(), 0.0);

        // One flipped point in ten.
        let mut flipped = truth.clone();
        flipped[0] = 1;
        assert!((clustering_error(&flipped, &truth).unwrap() - 0.1).abs() < 1e-12);

        assert!(clustering_error(&truth[..5], &truth).is_err());
    }

    #[test]
    fn splitting_one_cluster_in_half_costs_half_of_it() {
        let truth = vec![0, 0, 0, 0, 1, 1, 1, 1];
        let pred = vec![0, 0, 2, 2, 1, 1, 1, 1];
        // Best matching keeps clusters 0 and 1; the two points labeled 2
        // cannot match anything.
        assert!((clustering_error(&pred, &truth).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn assignment_matches_brute_force_on_small_cases() {
        fn permutations(k: usize) -> Vec<Vec<usize>> {
            if k == 1 {
                return vec![vec![0]];
            }
            let mut out = Vec::new();
            for p in permutations(k - 1) {
                for slot in 0..k {
                    let mut q = p.clone();
                    q.insert(slot, k - 1);
                    out.push(q);
                }
            }
            out
        }

        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let n = rng.random_range(2..9);
            let k = rng.random_range(1..4usize);
            let pred: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
            let truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
            let fast = clustering_error(&pred, &truth).unwrap();

            // Brute force over all renamings of the predicted labels.
            let mut best = usize::MAX;
            for p in permutations(k) {
                let mismatches = pred
                    .iter()
                    .zip(&truth)
                    .filter(|&(&a, &b)| p[a] != b)
                    .count();
                best = best.min(mismatches);
            }
            let slow = best as f64 / n as f64;
            assert!(
                (fast - slow).abs() < 1e-12,
                "pred {pred:?} truth {truth:?}: {fast} vs {slow}"
            );
        }
    }
}
