//! Proximity grouping of vehicle pairs and orthogonal RB assignment.
//!
//! Pairs are grouped by spectral clustering of a Gaussian similarity matrix over
//! pair midpoints: the `g` lowest eigenvectors of the symmetric normalized
//! Laplacian form a `K x g` embedding whose unit-normalized rows are clustered by
//! k-means. Within each group every RB is held by at most one pair.

mod jacobi;
mod kmeans;

pub use jacobi::{jacobi_eigen, SymmetricEigen};
pub use kmeans::kmeans;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mobility::{pair_midpoint, Point, VehiclePair};

const EIGEN_TOL: f64 = 1e-10;
const KMEANS_MAX_ITER: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusteringConfig {
    pub zeta_m: f64,
    pub phi_m: f64,
    pub g: usize,
    /// Re-clustering period in slots.
    pub t0: usize,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        Self {
            zeta_m: 30.0,
            phi_m: 150.0,
            g: 10,
            t0: 100,
        }
    }
}

impl ClusteringConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.zeta_m > 0.0) {
            return Err(Error::config("clustering.zeta_m", "must be positive"));
        }
        if !(self.phi_m > 0.0) {
            return Err(Error::config("clustering.phi_m", "must be positive"));
        }
        if self.g < 2 {
            return Err(Error::config("clustering.g", "need at least two groups"));
        }
        if self.t0 < 2 {
            return Err(Error::config(
                "clustering.t0",
                "re-clustering period must exceed one slot",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub n: usize,
    /// Row-major `n x n`.
    pub entries: Vec<f64>,
    pub zeta: f64,
    pub phi: f64,
}

impl SimilarityMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }
}

/// `s = exp(-d^2 / zeta^2)` for midpoint distance `d <= phi`, else 0.
pub fn similarity_matrix(midpoints: &[Point], zeta: f64, phi: f64) -> SimilarityMatrix {
    let n = midpoints.len();
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        entries[i * n + i] = 1.0;
        for j in (i + 1)..n {
            let d = midpoints[i].distance(&midpoints[j]);
            let s = if d <= phi {
                (-(d * d) / (zeta * zeta)).exp()
            } else {
                0.0
            };
            entries[i * n + j] = s;
            entries[j * n + i] = s;
        }
    }
    SimilarityMatrix {
        n,
        entries,
        zeta,
        phi,
    }
}

/// `I - D^-1/2 S D^-1/2`, row-major. A zero-degree row takes `d_ii = 1`.
pub fn normalized_laplacian(s: &SimilarityMatrix) -> Vec<f64> {
    let n = s.n;
    let inv_sqrt_deg: Vec<f64> = (0..n)
        .map(|i| {
            let d: f64 = s.entries[i * n..(i + 1) * n].iter().sum();
            let d = if d > 0.0 { d } else { 1.0 };
            1.0 / d.sqrt()
        })
        .collect();
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let norm = inv_sqrt_deg[i] * s.entries[i * n + j] * inv_sqrt_deg[j];
            l[i * n + j] = if i == j { 1.0 - norm } else { -norm };
        }
    }
    l
}

/// Spectral clustering of `s` into `g` groups; labels in `0..g`.
pub fn spectral_cluster<R: Rng + ?Sized>(
    s: &SimilarityMatrix,
    g: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if g < 2 || g > s.n {
        return Err(Error::config(
            "clustering.g",
            format!("need 1 < g <= K, got g = {g}, K = {}", s.n),
        ));
    }
    let lap = normalized_laplacian(s);
    let eig = jacobi_eigen(&lap, s.n, EIGEN_TOL);
    let rows: Vec<Vec<f64>> = (0..s.n)
        .map(|i| {
            let row: Vec<f64> = eig.vectors[..g].iter().map(|v| v[i]).collect();
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.into_iter().map(|x| x / norm).collect()
            } else {
                row
            }
        })
        .collect();
    Ok(kmeans(&rows, g, KMEANS_MAX_ITER, rng))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupAssignment {
    pub group_of: Vec<usize>,
    pub groups: usize,
    /// RB index set per pair.
    pub rb_sets: Vec<Vec<usize>>,
    /// Pairs left without any RB because their group outnumbers the RBs.
    pub starved: Vec<usize>,
}

/// Splits RBs `0..n_rb` contiguously within each group, in ascending pair id,
/// with sizes differing by at most one.
pub fn allocate_rbs(group_of: &[usize], n_rb: usize) -> GroupAssignment {
    let groups = group_of.iter().copied().max().map_or(0, |m| m + 1);
    let mut rb_sets = vec![Vec::new(); group_of.len()];
    let mut starved = Vec::new();
    for grp in 0..groups {
        let members: Vec<usize> = (0..group_of.len())
            .filter(|&k| group_of[k] == grp)
            .collect();
        let m = members.len();
        if m == 0 {
            continue;
        }
        let base = n_rb / m;
        let extra = n_rb % m;
        let mut next = 0;
        for (i, &k) in members.iter().enumerate() {
            let size = base + usize::from(i < extra);
            if size == 0 {
                starved.push(k);
            }
            rb_sets[k] = (next..next + size).collect();
            next += size;
        }
    }
    starved.sort_unstable();
    GroupAssignment {
        group_of: group_of.to_vec(),
        groups,
        rb_sets,
        starved,
    }
}

/// Groups the current pairs and assigns RBs. With fewer pairs than groups the
/// group count shrinks to `K`; a single pair takes every RB.
pub fn cluster_pairs<R: Rng + ?Sized>(
    pairs: &[VehiclePair],
    config: &ClusteringConfig,
    n_rb: usize,
    rng: &mut R,
) -> Result<GroupAssignment> {
    let k = pairs.len();
    if k == 0 {
        return Err(Error::Empty("cluster_pairs"));
    }
    let group_of = if k == 1 {
        vec![0]
    } else {
        let mids: Vec<Point> = pairs.iter().map(pair_midpoint).collect();
        let s = similarity_matrix(&mids, config.zeta_m, config.phi_m);
        spectral_cluster(&s, config.g.min(k), rng)?
    };
    Ok(allocate_rbs(&group_of, n_rb))
}
