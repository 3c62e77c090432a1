//! Synthetic feature maps with a known answer, for tests and benchmarks.
//!
//! Each blob is a rectangle of tokens sharing one unit direction `e_b`;
//! blob directions are mutually orthogonal. Background tokens carry uniform
//! noise in the remaining dimensions plus a small negative component
//! `-delta` along every blob direction, so that a blob's similarity mask
//! excludes the background.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::feature_store::FeatureMap;

const BACKGROUND_PULL: f32 = 0.1;

/// Token rectangle `[row, row + rows) × [col, col + cols)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Blob {
    pub row: usize,
    pub col: usize,
    pub rows: usize,
    pub cols: usize,
}

impl Blob {
    pub fn contains(&self, r: usize, c: usize) -> bool {
        (self.row..self.row + self.rows).contains(&r) && (self.col..self.col + self.cols).contains(&c)
    }

    // smallest Manhattan distance between any two cells of the blobs
    fn gap(&self, other: &Blob) -> usize {
        let axis = |a0: usize, alen: usize, b0: usize, blen: usize| {
            if a0 + alen <= b0 {
                b0 - (a0 + alen - 1)
            } else if b0 + blen <= a0 {
                a0 - (b0 + blen - 1)
            } else {
                0
            }
        };
        axis(self.row, self.rows, other.row, other.rows) + axis(self.col, self.cols, other.col, other.cols)
    }
}

#[derive(Debug, Clone)]
pub struct BlobFixture {
    pub map: FeatureMap,
    pub blobs: Vec<Blob>,
}

impl BlobFixture {
    /// Pixel boxes `(x1, y1, x2, y2)` of the blobs, clipped to the image and
    /// ordered like pools (by top-left token index).
    pub fn expected_boxes(&self) -> Vec<(u32, u32, u32, u32)> {
        let p = self.map.patch;
        let mut blobs = self.blobs.clone();
        blobs.sort_by_key(|b| (b.row, b.col));
        blobs
            .iter()
            .map(|b| {
                (
                    (b.col as u32 * p).min(self.map.img_w),
                    (b.row as u32 * p).min(self.map.img_h),
                    ((b.col + b.cols) as u32 * p).min(self.map.img_w),
                    ((b.row + b.rows) as u32 * p).min(self.map.img_h),
                )
            })
            .collect()
    }
}

/// Builds a fixture on a `grid_h × grid_w` grid. `img_h`/`img_w` default to
/// the exact grid span when `None`.
pub fn blob_fixture(
    grid_h: usize,
    grid_w: usize,
    patch: u32,
    img: Option<(u32, u32)>,
    blobs: &[Blob],
    noise_dim: usize,
    seed: u64,
) -> BlobFixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nb = blobs.len();
    let dim = nb + noise_dim;
    let mut data = vec![0.0f32; grid_h * grid_w * dim];
    for r in 0..grid_h {
        for c in 0..grid_w {
            let token = &mut data[(r * grid_w + c) * dim..(r * grid_w + c + 1) * dim];
            match blobs.iter().position(|b| b.contains(r, c)) {
                Some(b) => token[b] = 1.0,
                None => {
                    for v in &mut token[..nb] {
                        *v = -BACKGROUND_PULL;
                    }
                    for v in &mut token[nb..] {
                        *v = rng.random_range(-1.0f32..1.0);
                    }
                }
            }
        }
    }
    let (img_h, img_w) = img.unwrap_or((grid_h as u32 * patch, grid_w as u32 * patch));
    let map = FeatureMap::new(grid_h as u32, grid_w as u32, dim as u32, patch, img_h, img_w, data)
        .expect("fixture geometry is valid");
    BlobFixture { map, blobs: blobs.to_vec() }
}

/// 14×14 tokens at P = 16 (224×224 px) with a 4×4 and a 4×5 blob.
pub fn two_blobs() -> BlobFixture {
    blob_fixture(
        14,
        14,
        16,
        None,
        &[Blob { row: 2, col: 1, rows: 4, cols: 4 }, Blob { row: 8, col: 8, rows: 4, cols: 5 }],
        30,
        7,
    )
}

/// Random grid (10..=20 per side, P = 16, up to one patch of padding slack)
/// with 1 to 3 blobs at least Manhattan distance 3 apart.
pub fn random_blob_fixture(seed: u64) -> BlobFixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let grid_h = rng.random_range(10..=20);
    let grid_w = rng.random_range(10..=20);
    let patch = 16u32;
    let want = rng.random_range(1..=3);
    let mut blobs: Vec<Blob> = Vec::new();
    for _ in 0..200 {
        if blobs.len() == want {
            break;
        }
        let rows = rng.random_range(2..=5);
        let cols = rng.random_range(2..=5);
        let cand = Blob {
            row: rng.random_range(0..=grid_h - rows),
            col: rng.random_range(0..=grid_w - cols),
            rows,
            cols,
        };
        if blobs.iter().all(|b| b.gap(&cand) >= 3) {
            blobs.push(cand);
        }
    }
    let img_h = grid_h as u32 * patch - rng.random_range(0..patch);
    let img_w = grid_w as u32 * patch - rng.random_range(0..patch);
    blob_fixture(grid_h, grid_w, patch, Some((img_h, img_w)), &blobs, 30, seed)
}

/// i.i.d. uniform features with no structure.
pub fn noise_map(grid_h: usize, grid_w: usize, dim: usize, seed: u64) -> FeatureMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..grid_h * grid_w * dim).map(|_| rng.random_range(-1.0f32..1.0)).collect();
    FeatureMap::new(grid_h as u32, grid_w as u32, dim as u32, 16, grid_h as u32 * 16, grid_w as u32 * 16, data)
        .expect("noise geometry is valid")
}
