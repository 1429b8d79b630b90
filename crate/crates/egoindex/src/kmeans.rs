//! Internal k-means routine shared by the vocabulary tree and the GMM
//! initializer: k-means++ seeding, Lloyd iterations, deterministic under a
//! caller-supplied generator.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub(crate) const MAX_ITERS: usize = 25;
pub(crate) const REL_TOL: f64 = 1e-6;

/// Squared Euclidean distance.
pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[derive(Debug, Clone)]
pub(crate) struct KMeansFit {
    pub centroids: Vec<Vec<f64>>,
    /// Cluster index per subset entry, parallel to the `subset` argument.
    pub assignments: Vec<usize>,
}

/// Index of the nearest centroid; ties go to the lowest index.
pub(crate) fn nearest(centroids: &[Vec<f64>], point: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in centroids.iter().enumerate() {
        let d = dist2(c, point);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

/// k-means++ seeding over `subset`, a list of row indices into `data`.
fn seed_centroids(
    data: &[Vec<f64>],
    subset: &[usize],
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<f64>> {
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    let first = subset[rng.gen_range(0..subset.len())];
    centroids.push(data[first].clone());
    let mut d2: Vec<f64> = subset.iter().map(|&i| dist2(&data[i], &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let chosen = if total > 0.0 {
            let mut r = rng.gen::<f64>() * total;
            let mut idx = subset.len() - 1;
            for (j, &w) in d2.iter().enumerate() {
                if r < w {
                    idx = j;
                    break;
                }
                r -= w;
            }
            idx
        } else {
            // All remaining points coincide with a centroid; duplicate one.
            rng.gen_range(0..subset.len())
        };
        centroids.push(data[subset[chosen]].clone());
        for (j, &i) in subset.iter().enumerate() {
            d2[j] = d2[j].min(dist2(&data[i], centroids.last().unwrap()));
        }
    }
    centroids
}

/// Lloyd k-means over a subset of rows. Empty clusters keep their previous
/// centroid so the result always has exactly `k` centroids.
pub(crate) fn fit(
    data: &[Vec<f64>],
    subset: &[usize],
    k: usize,
    rng: &mut ChaCha8Rng,
) -> KMeansFit {
    assert!(!subset.is_empty(), "k-means needs at least one point");
    assert!(k >= 1);
    let dim = data[subset[0]].len();
    let mut centroids = seed_centroids(data, subset, k, rng);
    let mut assignments = vec![0usize; subset.len()];
    let mut counts = vec![0usize; k];
    let mut prev_inertia = f64::INFINITY;
    for _ in 0..MAX_ITERS {
        let mut inertia = 0.0;
        for (j, &i) in subset.iter().enumerate() {
            let c = nearest(&centroids, &data[i]);
            assignments[j] = c;
            inertia += dist2(&centroids[c], &data[i]);
        }
        let mut sums = vec![vec![0.0; dim]; k];
        counts = vec![0usize; k];
        for (j, &i) in subset.iter().enumerate() {
            counts[assignments[j]] += 1;
            for (s, v) in sums[assignments[j]].iter_mut().zip(&data[i]) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for (dst, s) in centroids[c].iter_mut().zip(&sums[c]) {
                    *dst = s / counts[c] as f64;
                }
            }
        }
        if prev_inertia.is_finite()
            && (prev_inertia - inertia).abs() <= REL_TOL * prev_inertia.max(1e-12)
        {
            break;
        }
        prev_inertia = inertia;
    }
    // Final assignment against the converged centroids.
    for (j, &i) in subset.iter().enumerate() {
        assignments[j] = nearest(&centroids, &data[i]);
    }
    KMeansFit { centroids, assignments }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn two_clouds() -> Vec<Vec<f64>> {
        let mut data = Vec::new();
        for i in 0..20 {
            let jitter = (i % 5) as f64 * 0.01;
            data.push(vec![0.0 + jitter, 0.0]);
            data.push(vec![10.0 + jitter, 10.0]);
        }
        data
    }

    #[test]
    fn separated_clouds_recover_their_means() {
        let data = two_clouds();
        let subset: Vec<usize> = (0..data.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let fit = fit(&data, &subset, 2, &mut rng);
        let mut centroids = fit.centroids.clone();
        centroids.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap());
        assert!((centroids[0][0] - 0.02).abs() < 1e-9);
        assert!((centroids[0][1] - 0.0).abs() < 1e-9);
        assert!((centroids[1][0] - 10.02).abs() < 1e-9);
        assert!((centroids[1][1] - 10.0).abs() < 1e-9);
        assert_eq!(fit.assignments.len(), data.len());
    }

    #[test]
    fn duplicate_points_still_yield_k_centroids() {
        let data = vec![vec![1.0, 1.0]; 6];
        let subset: Vec<usize> = (0..6).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let fit = fit(&data, &subset, 3, &mut rng);
        assert_eq!(fit.centroids.len(), 3);
        // Every point lands in cluster 0 under the lowest-index tie-break.
        assert!(fit.assignments.iter().all(|&a| a == 0));
    }

    #[test]
    fn same_seed_gives_identical_fit() {
        let data = two_clouds();
        let subset: Vec<usize> = (0..data.len()).collect();
        let a = fit(&data, &subset, 4, &mut ChaCha8Rng::seed_from_u64(3));
        let b = fit(&data, &subset, 4, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a.centroids, b.centroids);
        assert_eq!(a.assignments, b.assignments);
    }
}
