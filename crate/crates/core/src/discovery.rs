//! Grouping localized regions: K-means over region descriptors, with the
//! number of clusters chosen by the kneedle rule on the inertia curve.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Descriptor of one localized region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionFeature {
    pub image_id: String,
    pub pool_id: usize,
    pub vector: Vec<f64>,
}

impl AsRef<[f64]> for RegionFeature {
    fn as_ref(&self) -> &[f64] {
        &self.vector
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub k: usize,
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Sum of squared distances to the assigned centroid.
    pub inertia: f64,
    /// Inertia after each assignment step; nonincreasing.
    pub history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiscoveryError {
    #[error("k = {k} is outside 1..={n}")]
    BadK { k: usize, n: usize },
    #[error("descriptor {index} has dimension {found}, expected {expected}")]
    DimensionMismatch { index: usize, expected: usize, found: usize },
    #[error("descriptor {0} has a non-finite value")]
    NonFinite(usize),
    #[error("kneedle needs at least 3 points with strictly increasing k")]
    BadCurve,
}

pub const MAX_ITERATIONS: usize = 300;
pub const RELATIVE_TOLERANCE: f64 = 1e-6;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

// (centroid index, squared distance); ties to the lower index
fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(p, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn check_points<P: AsRef<[f64]>>(points: &[P]) -> Result<usize, DiscoveryError> {
    let dim = points.first().map_or(0, |p| p.as_ref().len());
    for (i, p) in points.iter().enumerate() {
        let v = p.as_ref();
        if v.len() != dim {
            return Err(DiscoveryError::DimensionMismatch { index: i, expected: dim, found: v.len() });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(DiscoveryError::NonFinite(i));
        }
    }
    Ok(dim)
}

/// Farthest-point seeding: a seeded uniform first pick, then repeatedly the
/// point farthest from every chosen centroid (ties to the lower index).
fn seed_centroids<P: AsRef<[f64]>>(points: &[P], k: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = rng.random_range(0..points.len());
    let mut centroids = vec![points[first].as_ref().to_vec()];
    let mut dist: Vec<f64> = points.iter().map(|p| sq_dist(p.as_ref(), &centroids[0])).collect();
    while centroids.len() < k {
        let mut far = 0;
        for (i, &d) in dist.iter().enumerate() {
            if d > dist[far] {
                far = i;
            }
        }
        let c = points[far].as_ref().to_vec();
        for (d, p) in dist.iter_mut().zip(points) {
            *d = d.min(sq_dist(p.as_ref(), &c));
        }
        centroids.push(c);
    }
    centroids
}

/// Lloyd's algorithm from farthest-point seeding. Stops when the relative
/// inertia improvement falls below [`RELATIVE_TOLERANCE`] or after
/// [`MAX_ITERATIONS`] updates. An empty cluster is reseeded at the point
/// farthest from its current centroid.
pub fn kmeans<P: AsRef<[f64]> + Sync>(
    points: &[P],
    k: usize,
    seed: u64,
) -> Result<ClusterAssignment, DiscoveryError> {
    if k < 1 || k > points.len() {
        return Err(DiscoveryError::BadK { k, n: points.len() });
    }
    let dim = check_points(points)?;

    let assign = |centroids: &[Vec<f64>]| -> (Vec<usize>, Vec<f64>) {
        points.par_iter().map(|p| nearest(p.as_ref(), centroids)).unzip()
    };

    let mut centroids = seed_centroids(points, k, seed);
    let (mut labels, mut dists) = assign(&centroids);
    let mut inertia: f64 = dists.iter().sum();
    let mut history = vec![inertia];

    for _ in 0..MAX_ITERATIONS {
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, x) in sums[l].iter_mut().zip(p.as_ref()) {
                *s += x;
            }
        }
        let mut next: Vec<Vec<f64>> = sums
            .into_iter()
            .zip(&counts)
            .zip(&centroids)
            .map(|((s, &n), old)| {
                if n == 0 {
                    old.clone()
                } else {
                    s.into_iter().map(|v| v / n as f64).collect()
                }
            })
            .collect();
        let mut taken = vec![false; points.len()];
        for j in (0..k).filter(|&j| counts[j] == 0) {
            let far = (0..points.len())
                .filter(|&i| !taken[i] && dists[i] > 0.0)
                .fold(None, |best: Option<usize>, i| match best {
                    Some(b) if dists[b] >= dists[i] => Some(b),
                    _ => Some(i),
                });
            if let Some(i) = far {
                taken[i] = true;
                next[j] = points[i].as_ref().to_vec();
            }
        }

        let (new_labels, new_dists) = assign(&next);
        let new_inertia: f64 = new_dists.iter().sum();
        if new_inertia > inertia {
            // rounding noise at convergence; keep the better state
            break;
        }
        let improvement = inertia - new_inertia;
        centroids = next;
        labels = new_labels;
        dists = new_dists;
        inertia = new_inertia;
        history.push(inertia);
        if inertia == 0.0 || improvement <= RELATIVE_TOLERANCE * history[history.len() - 2] {
            break;
        }
    }

    Ok(ClusterAssignment { k, labels, centroids, inertia, history })
}

/// Best of `restarts` runs with seeds `seed, seed + 1, ...`; ties keep the
/// earliest run.
pub fn kmeans_best_of<P: AsRef<[f64]> + Sync>(
    points: &[P],
    k: usize,
    seed: u64,
    restarts: usize,
) -> Result<ClusterAssignment, DiscoveryError> {
    let runs: Vec<ClusterAssignment> = (0..restarts.max(1) as u64)
        .into_par_iter()
        .map(|r| kmeans(points, k, seed.wrapping_add(r)))
        .collect::<Result<_, _>>()?;
    Ok(runs
        .into_iter()
        .reduce(|best, run| if run.inertia < best.inertia { run } else { best })
        .expect("at least one run"))
}

/// Inertia of the best-of-restarts clustering for every `k`.
pub fn inertia_curve<P: AsRef<[f64]> + Sync>(
    points: &[P],
    k_values: &[usize],
    seed: u64,
    restarts: usize,
) -> Result<Vec<f64>, DiscoveryError> {
    k_values.par_iter().map(|&k| kmeans_best_of(points, k, seed, restarts).map(|a| a.inertia)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Knee {
    pub k: usize,
    /// Largest normalized distance below the chord; 0 for a straight line.
    pub distance: f64,
    /// No point lies below the chord.
    pub flat: bool,
}

const FLAT_EPSILON: f64 = 1e-9;

/// Kneedle for a decreasing curve: normalize both axes to [0, 1] and pick
/// the point furthest below the chord from the first to the last point.
pub fn kneedle(k_values: &[usize], inertias: &[f64]) -> Result<Knee, DiscoveryError> {
    if k_values.len() < 3
        || k_values.len() != inertias.len()
        || k_values.windows(2).any(|w| w[0] >= w[1])
        || inertias.iter().any(|v| !v.is_finite())
    {
        return Err(DiscoveryError::BadCurve);
    }
    let (k0, k1) = (k_values[0] as f64, k_values[k_values.len() - 1] as f64);
    let (lo, hi) = inertias
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let mut best = Knee { k: k_values[0], distance: 0.0, flat: true };
    if hi > lo {
        for (&k, &y) in k_values.iter().zip(inertias) {
            let x = (k as f64 - k0) / (k1 - k0);
            let y = (y - lo) / (hi - lo);
            let d = (1.0 - x) - y;
            if d > best.distance {
                best = Knee { k, distance: d, flat: false };
            }
        }
    }
    if best.distance <= FLAT_EPSILON {
        log::warn!("inertia curve has no knee; using k = {}", k_values[0]);
        best = Knee { k: k_values[0], distance: best.distance.max(0.0), flat: true };
    }
    Ok(best)
}

/// Uniform sample of `min(m, n)` items without replacement, in original
/// order.
pub fn subsample<T: Clone>(items: &[T], m: usize, seed: u64) -> Vec<T> {
    if items.len() <= m {
        return items.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = sample(&mut rng, items.len(), m).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| items[i].clone()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryConfig {
    pub k_values: Vec<usize>,
    pub sample_size: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for DiscoveryConfig {
    fn default() -> Self {
        DiscoveryConfig { k_values: (2..=150).collect(), sample_size: 10_000, restarts: 4, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discovery {
    pub k: usize,
    pub k_values: Vec<usize>,
    pub inertias: Vec<f64>,
    pub flat_curve: bool,
    pub centroids: Vec<Vec<f64>>,
    /// Nearest centroid for every input region, in input order.
    pub labels: Vec<usize>,
}

/// Subsample, scan the inertia curve, pick K with kneedle, cluster the
/// sample, then label every region by its nearest centroid.
///
/// K values above the sample size are dropped from the scan.
pub fn discover<P: AsRef<[f64]> + Sync + Clone>(
    points: &[P],
    cfg: &DiscoveryConfig,
) -> Result<Discovery, DiscoveryError> {
    check_points(points)?;
    let sample = subsample(points, cfg.sample_size, cfg.seed);
    let k_values: Vec<usize> =
        cfg.k_values.iter().copied().filter(|&k| k >= 1 && k <= sample.len()).collect();
    let inertias = inertia_curve(&sample, &k_values, cfg.seed, cfg.restarts)?;
    let knee = kneedle(&k_values, &inertias)?;
    let fit = kmeans_best_of(&sample, knee.k, cfg.seed, cfg.restarts)?;
    let labels = points.par_iter().map(|p| nearest(p.as_ref(), &fit.centroids).0).collect();
    Ok(Discovery {
        k: knee.k,
        k_values,
        inertias,
        flat_curve: knee.flat,
        centroids: fit.centroids,
        labels,
    })
}
