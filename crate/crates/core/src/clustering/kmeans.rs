//! k-means with k-means++ seeding and Lloyd iterations.

use rand::Rng;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    centers
        .iter()
        .enumerate()
        .map(|(i, c)| (i, sq_dist(point, c)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("at least one center")
}

fn seed_plus_plus<R: Rng + ?Sized>(points: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    let mut centers = vec![points[first].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        } else {
            // All remaining points coincide with a center.
            let free: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen[idx] = true;
        centers.push(points[idx].clone());
        let c = centers.last().unwrap();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, c));
        }
    }
    centers
}

/// Clusters `points` into exactly `k` nonempty groups (requires `k <= points.len()`).
pub fn kmeans<R: Rng + ?Sized>(
    points: &[Vec<f64>],
    k: usize,
    max_iter: usize,
    rng: &mut R,
) -> Vec<usize> {
    let n = points.len();
    assert!(k >= 1 && k <= n, "need 1 <= k <= n");
    let dim = points[0].len();
    let mut centers = seed_plus_plus(points, k, rng);
    let mut labels: Vec<usize> = points.iter().map(|p| nearest(p, &centers).0).collect();

    for _ in 0..max_iter {
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, x) in sums[l].iter_mut().zip(p) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        let next: Vec<usize> = points.iter().map(|p| nearest(p, &centers).0).collect();
        if next == labels {
            break;
        }
        labels = next;
    }

    fill_empty_clusters(points, &centers, &mut labels, k);
    labels
}

/// Moves the point farthest from its center (taken from a cluster with at least
/// two members) into each empty cluster.
fn fill_empty_clusters(points: &[Vec<f64>], centers: &[Vec<f64>], labels: &mut [usize], k: usize) {
    loop {
        let mut counts = vec![0usize; k];
        for &l in labels.iter() {
            counts[l] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return;
        };
        let donor = (0..points.len())
            .filter(|&i| counts[labels[i]] > 1)
            .max_by(|&i, &j| {
                sq_dist(&points[i], &centers[labels[i]])
                    .total_cmp(&sq_dist(&points[j], &centers[labels[j]]))
            })
            .expect("k <= n guarantees a donor");
        labels[donor] = empty;
    }
}
