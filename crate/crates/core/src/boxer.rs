//! Pool to bounding box: core token, reduced pool, similarity mask, and the
//! island containing the core token.

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::feature_store::FeatureMap;
use crate::islands::{Connectivity, GridMask, Labels};
use crate::pooler::Pool;
use crate::similarity::{dot, DegreeVector, SimilarityMatrix};

/// Half-open pixel box `[x1, x2) × [y1, y2)` produced from one pool.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x1: u32,
    pub y1: u32,
    pub x2: u32,
    pub y2: u32,
    pub pool_id: usize,
    pub core_token: usize,
    pub pool_size: usize,
}

impl BoundingBox {
    pub fn area(&self) -> u64 {
        (self.x2 - self.x1) as u64 * (self.y2 - self.y1) as u64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxerConfig {
    /// Boxes with fewer pixels than this are dropped.
    pub min_area: u64,
    /// Boxes covering at least this fraction of the image are dropped.
    pub whole_image_fraction: f64,
    pub connectivity: Connectivity,
}

impl Default for BoxerConfig {
    fn default() -> Self {
        BoxerConfig { min_area: 256, whole_image_fraction: 0.95, connectivity: Connectivity::Four }
    }
}

impl BoxerConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.whole_image_fraction > 0.0 && self.whole_image_fraction <= 1.0) {
            return Err(ConfigError::new("whole_image_fraction", "must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Token grid and pixel geometry of one image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Geometry {
    pub grid_h: usize,
    pub grid_w: usize,
    pub patch: u32,
    pub img_h: u32,
    pub img_w: u32,
}

impl From<&FeatureMap> for Geometry {
    fn from(m: &FeatureMap) -> Self {
        Geometry {
            grid_h: m.grid_h as usize,
            grid_w: m.grid_w as usize,
            patch: m.patch,
            img_h: m.img_h,
            img_w: m.img_w,
        }
    }
}

/// Why a pool produced no box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Rejection {
    /// The core token's feature is the zero vector.
    DegenerateCore,
    /// The core token's cell is false in the mask.
    CoreNotInMask,
    /// The island lies entirely in the padding beyond the image.
    OutsideImage,
    TooSmall { area: u64 },
    CoversImage { area: u64 },
}

/// Pool member with the lowest degree; ties go to the lowest index.
pub fn core_token(pool: &Pool, deg: &DegreeVector) -> usize {
    *pool
        .members
        .iter()
        .min_by_key(|&&c| (deg.get(c), c))
        .expect("core_token on an empty pool")
}

/// Members whose features correlate strictly positively with the core token.
pub fn reduce_pool(pool: &Pool, cstar: usize, map: &FeatureMap) -> Result<Pool, Rejection> {
    let core = map.token(cstar);
    reduce_by(pool, cstar, |c| dot(map.token(c), core))
}

/// [`reduce_pool`] reading dot products from a precomputed similarity matrix.
pub fn reduce_pool_with(pool: &Pool, cstar: usize, a: &SimilarityMatrix) -> Result<Pool, Rejection> {
    reduce_by(pool, cstar, |c| a.get(c, cstar))
}

fn reduce_by(pool: &Pool, cstar: usize, sim: impl Fn(usize) -> f64) -> Result<Pool, Rejection> {
    debug_assert!(pool.members.contains(&cstar));
    let own = sim(cstar);
    if own.is_nan() || own <= 0.0 {
        return Err(Rejection::DegenerateCore);
    }
    Ok(Pool { id: pool.id, members: pool.members.iter().copied().filter(|&c| sim(c) > 0.0).collect() })
}

/// `m[k] = Σ_{c ∈ reduced} f_kᵀ f_c ≥ 0`, summed in member order.
pub fn build_mask(reduced: &Pool, map: &FeatureMap) -> GridMask {
    mask_by(reduced, map.grid_h as usize, map.grid_w as usize, |k, c| {
        dot(map.token(k), map.token(c))
    })
}

/// [`build_mask`] reading dot products from a precomputed similarity matrix.
pub fn build_mask_with(reduced: &Pool, a: &SimilarityMatrix, grid_h: usize, grid_w: usize) -> GridMask {
    mask_by(reduced, grid_h, grid_w, |k, c| a.get(k, c))
}

fn mask_by(reduced: &Pool, h: usize, w: usize, sim: impl Fn(usize, usize) -> f64) -> GridMask {
    let bits = (0..h * w)
        .map(|k| reduced.members.iter().map(|&c| sim(k, c)).sum::<f64>() >= 0.0)
        .collect();
    GridMask::new(h, w, bits)
}

/// Pixel box of the island containing `cstar`, clipped to the image, then
/// filtered for trivial size.
pub fn extract_box(
    labels: &Labels,
    cstar: usize,
    geom: &Geometry,
    cfg: &BoxerConfig,
) -> Result<(u32, u32, u32, u32), Rejection> {
    let label = labels.at(cstar);
    if label == 0 {
        return Err(Rejection::CoreNotInMask);
    }
    let (r0, r1, c0, c1) = labels.extent(label).expect("label present");
    let p = geom.patch as u64;
    let clip = |v: u64, hi: u32| v.min(hi as u64) as u32;
    let x1 = clip(c0 as u64 * p, geom.img_w);
    let x2 = clip((c1 as u64 + 1) * p, geom.img_w);
    let y1 = clip(r0 as u64 * p, geom.img_h);
    let y2 = clip((r1 as u64 + 1) * p, geom.img_h);
    if x1 >= x2 || y1 >= y2 {
        return Err(Rejection::OutsideImage);
    }
    let area = (x2 - x1) as u64 * (y2 - y1) as u64;
    if area < cfg.min_area {
        return Err(Rejection::TooSmall { area });
    }
    let image_area = geom.img_w as f64 * geom.img_h as f64;
    if area as f64 >= cfg.whole_image_fraction * image_area {
        return Err(Rejection::CoversImage { area });
    }
    Ok((x1, y1, x2, y2))
}
