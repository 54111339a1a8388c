//! Seeded k-means (Lloyd iterations after k-means++ seeding) and the
//! density rule that picks how many clusters a class gets.
//!
//! Randomness comes only from `ChaCha8Rng::seed_from_u64(config.seed)`, so a
//! partition is a pure function of the point order, `k` and the config on
//! every platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_DENSITY: f64 = 100.0;
pub const DEFAULT_CAP: usize = 10_000;
pub const DEFAULT_MAX_ITERATIONS: usize = 100;
pub const DEFAULT_SHIFT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterConfig {
    /// Targeted number of points per cluster.
    pub density: f64,
    /// Upper bound on clusters (boxes) per class.
    pub cap: usize,
    pub seed: u64,
    pub max_iterations: usize,
    pub shift_tolerance: f64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            density: DEFAULT_DENSITY,
            cap: DEFAULT_CAP,
            seed: 0,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            shift_tolerance: DEFAULT_SHIFT_TOLERANCE,
        }
    }
}

impl ClusterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.density > 0.0) || !self.density.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "density must be a positive finite number, got {}",
                self.density
            )));
        }
        if self.cap == 0 {
            return Err(Error::InvalidParameter("cap must be >= 1".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter(
                "max_iterations must be >= 1".into(),
            ));
        }
        if !(self.shift_tolerance >= 0.0) {
            return Err(Error::InvalidParameter(
                "shift_tolerance must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Result of [`kmeans`].
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub k: usize,
    /// Cluster index of every input point.
    pub assignments: Vec<usize>,
    /// Mean of the points assigned to each cluster.
    pub centroids: Vec<Vec<f64>>,
    pub iterations: usize,
    /// Within-cluster sum of squares after each centroid update.
    pub inertia_trace: Vec<f64>,
}

impl Partition {
    /// Point indices per cluster, ascending within each subset.
    pub fn subsets(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (i, &c) in self.assignments.iter().enumerate() {
            out[c].push(i);
        }
        out
    }

    pub fn inertia(&self) -> f64 {
        self.inertia_trace.last().copied().unwrap_or(0.0)
    }
}

/// `max(1, min(floor(m / density), cap, m))`.
pub fn select_k(m: usize, density: f64, cap: usize) -> usize {
    let by_density = (m as f64 / density).floor();
    // saturating float->int cast covers huge ratios
    let by_density = by_density as usize;
    by_density.min(cap).min(m).max(1)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(point, c);
        // strict: ties keep the lowest index
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn kmeans_pp<P: AsRef<[f64]>>(points: &[P], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let m = points.len();
    let mut centroids = Vec::with_capacity(k);
    let first = rng.random_range(0..m);
    centroids.push(points[first].as_ref().to_vec());
    let mut d2: Vec<f64> = points
        .iter()
        .map(|p| sq_dist(p.as_ref(), &centroids[0]))
        .collect();

    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 && total.is_finite() {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc > target {
                    chosen = Some(i);
                    break;
                }
            }
            // rounding can leave target above the final sum
            chosen.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).unwrap_or(m - 1))
        } else {
            rng.random_range(0..m)
        };
        let c = points[pick].as_ref().to_vec();
        for (w, p) in d2.iter_mut().zip(points) {
            let d = sq_dist(p.as_ref(), &c);
            if d < *w {
                *w = d;
            }
        }
        centroids.push(c);
    }
    centroids
}

fn assign<P: AsRef<[f64]>>(points: &[P], centroids: &[Vec<f64>], out: &mut [usize]) {
    for (slot, p) in out.iter_mut().zip(points) {
        *slot = nearest(p.as_ref(), centroids).0;
    }
}

/// Moves points into empty clusters. Each empty cluster takes the point
/// farthest from its current centroid among clusters that can spare one
/// (lowest point index on ties), and is re-centred on it.
fn repair_empty<P: AsRef<[f64]>>(
    points: &[P],
    centroids: &mut [Vec<f64>],
    assignments: &mut [usize],
) {
    let k = centroids.len();
    let mut sizes = vec![0usize; k];
    for &a in assignments.iter() {
        sizes[a] += 1;
    }
    for empty in 0..k {
        if sizes[empty] != 0 {
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for (i, p) in points.iter().enumerate() {
            let owner = assignments[i];
            if sizes[owner] < 2 {
                continue;
            }
            let d = sq_dist(p.as_ref(), &centroids[owner]);
            if best.is_none_or(|(_, bd)| d > bd) {
                best = Some((i, d));
            }
        }
        // k <= m guarantees a donor exists
        let (i, _) = best.expect("k-means repair without a donor cluster");
        sizes[assignments[i]] -= 1;
        assignments[i] = empty;
        sizes[empty] = 1;
        centroids[empty] = points[i].as_ref().to_vec();
    }
}

fn means<P: AsRef<[f64]>>(
    points: &[P],
    assignments: &[usize],
    k: usize,
    dim: usize,
) -> Vec<Vec<f64>> {
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    // fixed accumulation order: input order
    for (p, &a) in points.iter().zip(assignments) {
        counts[a] += 1;
        for (s, v) in sums[a].iter_mut().zip(p.as_ref()) {
            *s += v;
        }
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        let c = c as f64;
        for v in s.iter_mut() {
            *v /= c;
        }
    }
    sums
}

fn inertia<P: AsRef<[f64]>>(points: &[P], assignments: &[usize], centroids: &[Vec<f64>]) -> f64 {
    points
        .iter()
        .zip(assignments)
        .map(|(p, &a)| sq_dist(p.as_ref(), &centroids[a]))
        .sum()
}

/// Lloyd's algorithm with k-means++ seeding.
///
/// Stops when assignments stop changing, when the largest centroid move
/// (Euclidean) is at most `shift_tolerance`, or after `max_iterations`
/// centroid updates. No cluster is empty in the result and every centroid
/// is the mean of its members.
pub fn kmeans<P: AsRef<[f64]>>(
    points: &[P],
    k: usize,
    config: &ClusterConfig,
) -> Result<Partition> {
    config.validate()?;
    let m = points.len();
    if m == 0 {
        return Err(Error::EmptyInput("k-means over zero points".into()));
    }
    if k == 0 {
        return Err(Error::InvalidParameter("k must be >= 1".into()));
    }
    if k > m {
        return Err(Error::TooManyClusters { k, m });
    }
    let dim = points[0].as_ref().len();
    if let Some(bad) = points.iter().find(|p| p.as_ref().len() != dim) {
        return Err(Error::mismatch(dim, bad.as_ref().len()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut centroids = kmeans_pp(points, k, &mut rng);
    let mut assignments = vec![0; m];
    assign(points, &centroids, &mut assignments);
    repair_empty(points, &mut centroids, &mut assignments);

    let mut next = vec![0; m];
    let mut trace = Vec::new();
    let mut iterations = 0;
    while iterations < config.max_iterations {
        iterations += 1;
        let updated = means(points, &assignments, k, dim);
        let shift = centroids
            .iter()
            .zip(&updated)
            .map(|(a, b)| sq_dist(a, b))
            .fold(0.0, f64::max)
            .sqrt();
        centroids = updated;
        trace.push(inertia(points, &assignments, &centroids));
        if shift <= config.shift_tolerance {
            break;
        }
        assign(points, &centroids, &mut next);
        repair_empty(points, &mut centroids, &mut next);
        if next == assignments {
            break;
        }
        std::mem::swap(&mut assignments, &mut next);
    }

    let centroids = means(points, &assignments, k, dim);
    Ok(Partition {
        k,
        assignments,
        centroids,
        iterations,
        inertia_trace: trace,
    })
}

/// Splits one class's feature vectors into `select_k(m, density, cap)`
/// disjoint subsets covering every index.
pub fn partition_features<P: AsRef<[f64]>>(
    points: &[P],
    config: &ClusterConfig,
) -> Result<Vec<Vec<usize>>> {
    config.validate()?;
    if points.is_empty() {
        return Err(Error::EmptyInput(
            "partition of zero feature vectors".into(),
        ));
    }
    let k = select_k(points.len(), config.density, config.cap);
    Ok(kmeans(points, k, config)?.subsets())
}
