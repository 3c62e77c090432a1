//! Entropy-based box analysis.
//!
//! Each row of the similarity matrix is reshaped to the token grid and
//! average-pooled at several box sizes. Foreground similarity maps are
//! spatially structured, so their pooled maps have low entropy. A row is
//! foreground when a strict majority of box sizes give an entropy at or
//! below `tau = a + b * ln(h * w)`.
//!
//! The pmf is a `bins`-bin histogram of the min-max normalized map. Entropy
//! is measured in nats so that `ln(h * w)` is the maximum for a map of
//! `h * w` cells.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::similarity::SimilarityMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EbaConfig {
    /// Box sizes, strictly increasing.
    pub kernels: Vec<usize>,
    pub tau_a: f64,
    pub tau_b: f64,
    pub bins: usize,
}

impl Default for EbaConfig {
    fn default() -> Self {
        EbaConfig { kernels: vec![1, 2, 3, 4, 5], tau_a: 1.0, tau_b: 0.5, bins: 256 }
    }
}

impl EbaConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.kernels.is_empty() {
            return Err(ConfigError::new("kernels", "at least one kernel is required"));
        }
        if self.kernels[0] < 1 {
            return Err(ConfigError::new("kernels", "kernel sizes must be ≥ 1"));
        }
        if self.kernels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ConfigError::new("kernels", "kernel sizes must be strictly increasing"));
        }
        if !self.tau_a.is_finite() {
            return Err(ConfigError::new("tau_a", "must be finite"));
        }
        if !(0.0..=1.0).contains(&self.tau_b) {
            return Err(ConfigError::new("tau_b", "must lie in [0, 1]"));
        }
        if self.bins < 2 {
            return Err(ConfigError::new("bins", "must be ≥ 2"));
        }
        Ok(())
    }
}

/// Token indices classified as foreground, ascending.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForegroundSet {
    pub indices: Vec<usize>,
}

impl ForegroundSet {
    /// Sorts and dedups arbitrary indices.
    pub fn from_indices(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        ForegroundSet { indices }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, p: usize) -> bool {
        self.indices.binary_search(&p).is_ok()
    }
}

/// A row-major map of `h * w` values.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledMap {
    pub h: usize,
    pub w: usize,
    pub values: Vec<f64>,
}

/// Non-overlapping `k × k` average pooling with ceil-mode edges: partial
/// windows at the bottom and right are averaged over the cells they hold.
///
/// Returns `None` when the kernel does not fit the grid; callers drop the
/// kernel from the vote.
pub fn pool_map(map: &[f64], h: usize, w: usize, k: usize) -> Option<PooledMap> {
    assert_eq!(map.len(), h * w, "map size does not match grid");
    if k == 0 || k > h.min(w) {
        return None;
    }
    if k == 1 {
        return Some(PooledMap { h, w, values: map.to_vec() });
    }
    let (ph, pw) = (h.div_ceil(k), w.div_ceil(k));
    let mut values = Vec::with_capacity(ph * pw);
    for by in 0..ph {
        let rows = by * k..((by + 1) * k).min(h);
        for bx in 0..pw {
            let cols = bx * k..((bx + 1) * k).min(w);
            let mut sum = 0.0;
            for r in rows.clone() {
                sum += map[r * w + cols.start..r * w + cols.end].iter().sum::<f64>();
            }
            values.push(sum / (rows.len() * cols.len()) as f64);
        }
    }
    Some(PooledMap { h: ph, w: pw, values })
}

/// Bin index of every value after min-max normalization. A constant map
/// puts everything in bin 0; the maximum lands in the last bin.
pub fn bin_assignments(values: &[f64], bins: usize) -> Vec<usize> {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    if range.is_nan() || range <= 0.0 {
        return vec![0; values.len()];
    }
    let last = bins - 1;
    values
        .iter()
        .map(|&v| {
            let t = (v - lo) / range;
            ((t * bins as f64) as usize).min(last)
        })
        .collect()
}

/// Shannon entropy (nats) of the `bins`-bin histogram of `values`.
pub fn entropy(values: &[f64], bins: usize) -> f64 {
    assert!(!values.is_empty(), "entropy of an empty map");
    assert!(bins >= 1);
    let mut counts = vec![0usize; bins];
    for b in bin_assignments(values, bins) {
        counts[b] += 1;
    }
    let total = values.len();
    let occupied: Vec<usize> = counts.into_iter().filter(|&c| c > 0).collect();
    if occupied.len() == 1 {
        return 0.0;
    }
    // H = ln(n) - (1/n) Σ c ln c; exact at both extremes (single bin,
    // all-singleton bins).
    let n = total as f64;
    let weighted: f64 = occupied.iter().map(|&c| c as f64 * (c as f64).ln()).sum();
    (n.ln() - weighted / n).max(0.0)
}

/// Entropy threshold for an `h × w` pooled map.
pub fn tau(h: usize, w: usize, cfg: &EbaConfig) -> f64 {
    cfg.tau_a + cfg.tau_b * ((h * w) as f64).ln()
}

/// Per-kernel diagnostics for one similarity map.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelVote {
    pub kernel: usize,
    pub entropy: f64,
    pub tau: f64,
    pub pass: bool,
}

/// Entropy and vote for every kernel that fits the grid.
pub fn kernel_votes(row: &[f64], grid_h: usize, grid_w: usize, cfg: &EbaConfig) -> Vec<KernelVote> {
    cfg.kernels
        .iter()
        .filter_map(|&k| {
            let pooled = pool_map(row, grid_h, grid_w, k)?;
            let e = entropy(&pooled.values, cfg.bins);
            let t = tau(pooled.h, pooled.w, cfg);
            Some(KernelVote { kernel: k, entropy: e, tau: t, pass: e <= t })
        })
        .collect()
}

/// True when a strict majority of usable kernels vote foreground.
pub fn classify_row(row: &[f64], grid_h: usize, grid_w: usize, cfg: &EbaConfig) -> bool {
    let votes = kernel_votes(row, grid_h, grid_w, cfg);
    let pass = votes.iter().filter(|v| v.pass).count();
    2 * pass > votes.len()
}

pub fn foreground_tokens(
    a: &SimilarityMatrix,
    grid_h: usize,
    grid_w: usize,
    cfg: &EbaConfig,
) -> ForegroundSet {
    assert_eq!(a.n(), grid_h * grid_w, "similarity matrix does not match grid");
    let flags: Vec<bool> =
        (0..a.n()).into_par_iter().map(|i| classify_row(a.row(i), grid_h, grid_w, cfg)).collect();
    ForegroundSet {
        indices: flags.iter().enumerate().filter(|(_, &f)| f).map(|(i, _)| i).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feature_store::FeatureMap;
    use crate::similarity::outer_product;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pool_identity_and_mean() {
        let m = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(pool_map(&m, 2, 2, 1).unwrap().values, m.to_vec());
        let p = pool_map(&m, 2, 2, 2).unwrap();
        assert_eq!((p.h, p.w, p.values), (1, 1, vec![2.5]));
        assert!(pool_map(&m, 2, 2, 3).is_none());
    }

    #[test]
    fn partial_windows_average_their_own_cells() {
        let ones = vec![1.0; 9];
        let p = pool_map(&ones, 3, 3, 2).unwrap();
        assert_eq!((p.h, p.w), (2, 2));
        assert_eq!(p.values, vec![1.0; 4]);

        // 3×3 ramp, k=2: windows {0,1,3,4}, {2,5}, {6,7}, {8}
        let ramp: Vec<f64> = (0..9).map(f64::from).collect();
        let p = pool_map(&ramp, 3, 3, 2).unwrap();
        assert_eq!(p.values, vec![2.0, 3.5, 6.5, 8.0]);
    }

    #[test]
    fn rectangular_pooling_shape() {
        let m = vec![0.0; 5 * 7];
        let p = pool_map(&m, 5, 7, 3).unwrap();
        assert_eq!((p.h, p.w), (2, 3));
        assert!(pool_map(&m, 5, 7, 6).is_none());
    }

    #[test]
    fn entropy_reference_values() {
        assert_eq!(entropy(&[3.0; 7], 256), 0.0);
        let uniform = entropy(&[0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0], 4);
        assert!((uniform - 1.3862943611198906).abs() < 1e-12);
        let skew = entropy(&[1.0, 1.0, 2.0, 3.0], 256);
        assert!((skew - 1.0397207708399179).abs() < 1e-12);
    }

    #[test]
    fn maximum_goes_to_last_bin() {
        assert_eq!(bin_assignments(&[0.0, 0.5, 1.0], 2), vec![0, 1, 1]);
        assert_eq!(bin_assignments(&[2.0, 2.0], 8), vec![0, 0]);
    }

    #[test]
    fn tau_reference_values() {
        let cfg = EbaConfig::default();
        assert_eq!(tau(1, 1, &cfg), 1.0);
        assert!((tau(2, 2, &cfg) - 1.6931471805599454).abs() < 1e-12);
        assert!((tau(14, 14, &cfg) - 3.6390573296152584).abs() < 1e-12);
    }

    #[test]
    fn constant_row_is_foreground() {
        assert!(classify_row(&[0.7; 196], 14, 14, &EbaConfig::default()));
    }

    #[test]
    fn half_the_votes_is_background() {
        // 2×4 map with a single 1 at (1,1).
        // k=1: 8 cells {7×0, 1×1}: H = ln 8 - 7 ln 7 / 8 ≈ 0.377, tau = 0.2 ln 8 ≈ 0.416 -> pass
        // k=2: windows [0.25, 0]: H = ln 2 ≈ 0.693, tau = 0.2 ln 2 ≈ 0.139 -> fail
        let cfg = EbaConfig { kernels: vec![1, 2], tau_a: 0.0, tau_b: 0.2, bins: 256 };
        let mixed = [0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0];
        let v = kernel_votes(&mixed, 2, 4, &cfg);
        assert!(v[0].pass && !v[1].pass);
        assert!(!classify_row(&mixed, 2, 4, &cfg));
        assert!(classify_row(&[0.0; 8], 2, 4, &cfg));
    }

    #[test]
    fn oversized_kernels_shrink_the_vote() {
        let cfg = EbaConfig { kernels: vec![1, 2, 3, 4, 5], ..EbaConfig::default() };
        let v = kernel_votes(&[0.0; 6], 2, 3, &cfg);
        assert_eq!(v.iter().map(|v| v.kernel).collect::<Vec<_>>(), vec![1, 2]);
    }

    #[test]
    fn uniform_noise_rows_are_background() {
        // Monte-Carlo: i.i.d. uniform 14×14 maps should fail the vote in
        // at least 95% of trials.
        let cfg = EbaConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let trials = 400;
        let background = (0..trials)
            .filter(|_| {
                let row: Vec<f64> = (0..196).map(|_| rng.random::<f64>()).collect();
                !classify_row(&row, 14, 14, &cfg)
            })
            .count();
        assert!(background * 100 >= trials * 95, "{background}/{trials}");
    }

    #[test]
    fn identical_tokens_are_all_foreground() {
        let map = FeatureMap::new(4, 5, 3, 16, 64, 80, [0.3f32, -0.2, 0.9].repeat(20)).unwrap();
        let fg = foreground_tokens(&outer_product(&map), 4, 5, &EbaConfig::default());
        assert_eq!(fg.indices, (0..20).collect::<Vec<_>>());
    }

    #[test]
    fn config_validation() {
        assert!(EbaConfig::default().validate().is_ok());
        let bad = |f: fn(&mut EbaConfig)| {
            let mut c = EbaConfig::default();
            f(&mut c);
            c.validate().is_err()
        };
        assert!(bad(|c| c.kernels.clear()));
        assert!(bad(|c| c.kernels = vec![0, 1]));
        assert!(bad(|c| c.kernels = vec![1, 3, 2]));
        assert!(bad(|c| c.kernels = vec![1, 1]));
        assert!(bad(|c| c.tau_b = 1.5));
        assert!(bad(|c| c.bins = 1));
    }

    proptest! {
        #[test]
        fn entropy_is_bounded(
            values in proptest::collection::vec(-1e3f64..1e3, 1..300),
            bins in 2usize..400
        ) {
            let h = entropy(&values, bins);
            let cap = (bins.min(values.len()) as f64).ln();
            prop_assert!(h >= 0.0);
            prop_assert!(h <= cap + 1e-12, "{} > {}", h, cap);
        }

        #[test]
        fn pooling_preserves_constant_maps(c in -5.0f64..5.0, h in 1usize..12, w in 1usize..12, k in 1usize..12) {
            if let Some(p) = pool_map(&vec![c; h * w], h, w, k) {
                prop_assert_eq!(p.h, h.div_ceil(k));
                for v in p.values {
                    prop_assert!((v - c).abs() <= 1e-12 * c.abs().max(1.0));
                }
            }
        }
    }
}
