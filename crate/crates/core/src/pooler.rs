//! Density-based grouping of foreground tokens into pools.
//!
//! Tokens are clustered by their integer grid coordinates with DBSCAN. With
//! the default `min_pts = 1` every token is a core point and the pools are
//! the connected components of the graph joining tokens within `epsilon`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eba::ForegroundSet;
use crate::error::ConfigError;

/// Distance used between token grid positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridMetric {
    #[default]
    Manhattan,
    /// Chessboard distance; `epsilon = 1` is the Moore neighborhood.
    Chebyshev,
}

impl GridMetric {
    pub fn distance(self, a: (usize, usize), b: (usize, usize)) -> usize {
        let dx = a.0.abs_diff(b.0);
        let dy = a.1.abs_diff(b.1);
        match self {
            GridMetric::Manhattan => dx + dy,
            GridMetric::Chebyshev => dx.max(dy),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterConfig {
    pub epsilon: usize,
    pub min_pts: usize,
    #[serde(default)]
    pub metric: GridMetric,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig { epsilon: 2, min_pts: 1, metric: GridMetric::Manhattan }
    }
}

impl ClusterConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.epsilon < 1 {
            return Err(ConfigError::new("epsilon", "must be ≥ 1"));
        }
        if self.min_pts < 1 {
            return Err(ConfigError::new("min_pts", "must be ≥ 1"));
        }
        Ok(())
    }
}

/// One cluster of foreground tokens. Members are ascending linear indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pool {
    pub id: usize,
    pub members: Vec<usize>,
}

impl Pool {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("token index {index} out of range for {n} tokens")]
pub struct IndexOutOfRange {
    pub index: usize,
    pub n: usize,
}

/// Linear token index to `(x, y) = (column, row)`.
pub fn index_to_coords(
    p: usize,
    grid_h: usize,
    grid_w: usize,
) -> Result<(usize, usize), IndexOutOfRange> {
    let n = grid_h * grid_w;
    if p >= n {
        return Err(IndexOutOfRange { index: p, n });
    }
    Ok((p % grid_w, p / grid_w))
}

pub fn coords_to_index(x: usize, y: usize, grid_w: usize) -> usize {
    y * grid_w + x
}

/// DBSCAN over the grid positions of `fg`.
///
/// Pools are numbered by their smallest member. Points that are not density
/// reachable from a core point (only possible with `min_pts > 1`) are left
/// out.
pub fn cluster(fg: &ForegroundSet, grid_h: usize, grid_w: usize, cfg: &ClusterConfig) -> Vec<Pool> {
    let points = &fg.indices;
    if points.is_empty() {
        return Vec::new();
    }
    let n_cells = grid_h * grid_w;
    // cell -> slot in `points`
    let mut slot = vec![usize::MAX; n_cells];
    for (s, &p) in points.iter().enumerate() {
        assert!(p < n_cells, "foreground index {p} outside {grid_h}×{grid_w} grid");
        slot[p] = s;
    }
    let coords: Vec<(usize, usize)> = points.iter().map(|&p| (p % grid_w, p / grid_w)).collect();

    let eps = cfg.epsilon;
    let side = eps.saturating_mul(2).saturating_add(1);
    let window = side.saturating_mul(side);
    let scan_window = window <= points.len();
    let neighbors = |s: usize| -> Vec<usize> {
        let (x, y) = coords[s];
        if scan_window {
            let mut out = Vec::new();
            for ny in y.saturating_sub(eps)..=y.saturating_add(eps).min(grid_h - 1) {
                for nx in x.saturating_sub(eps)..=x.saturating_add(eps).min(grid_w - 1) {
                    let t = slot[ny * grid_w + nx];
                    if t != usize::MAX && cfg.metric.distance((x, y), (nx, ny)) <= eps {
                        out.push(t);
                    }
                }
            }
            out
        } else {
            (0..points.len()).filter(|&t| cfg.metric.distance(coords[s], coords[t]) <= eps).collect()
        }
    };

    let is_core: Vec<bool> = (0..points.len()).map(|s| neighbors(s).len() >= cfg.min_pts).collect();
    let mut label = vec![usize::MAX; points.len()];
    let mut next = 0;
    let mut queue = VecDeque::new();
    for seed in 0..points.len() {
        if label[seed] != usize::MAX || !is_core[seed] {
            continue;
        }
        label[seed] = next;
        queue.push_back(seed);
        while let Some(s) = queue.pop_front() {
            for t in neighbors(s) {
                if label[t] == usize::MAX {
                    label[t] = next;
                    if is_core[t] {
                        queue.push_back(t);
                    }
                }
            }
        }
        next += 1;
    }

    let mut pools: Vec<Vec<usize>> = vec![Vec::new(); next];
    for (s, &l) in label.iter().enumerate() {
        if l != usize::MAX {
            pools[l].push(points[s]);
        }
    }
    // members are already ascending since `points` is sorted
    pools.sort_by_key(|m| m[0]);
    pools.into_iter().enumerate().map(|(id, members)| Pool { id, members }).collect()
}
