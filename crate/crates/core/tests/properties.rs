//! Pipeline-level properties on synthetic fixtures.

use most_core::eba::{bin_assignments, classify_row, foreground_tokens};
use most_core::fixtures::{self, random_blob_fixture, two_blobs};
use most_core::pooler::cluster;
use most_core::similarity::outer_product;
use most_core::{localize_image, EbaConfig, LocalizeConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn two_blob_foreground_recall_and_precision() {
    let fx = two_blobs();
    let (h, w) = (fx.map.grid_h as usize, fx.map.grid_w as usize);
    let fg = foreground_tokens(&outer_product(&fx.map), h, w, &EbaConfig::default());
    let in_blob = |p: usize| fx.blobs.iter().any(|b| b.contains(p / w, p % w));
    let blob_cells = (0..h * w).filter(|&p| in_blob(p)).count();
    let hits = fg.indices.iter().filter(|&&p| in_blob(p)).count();
    assert_eq!(hits, blob_cells, "block recall must be 1.0");
    let background = h * w - blob_cells;
    let false_fg = fg.len() - hits;
    assert!((background - false_fg) as f64 / background as f64 >= 0.9);
}

#[test]
fn noise_only_map_yields_nothing() {
    let set = localize_image(&fixtures::noise_map(14, 14, 32, 1), &LocalizeConfig::default()).unwrap();
    assert_eq!(set.foreground_tokens, 0);
    assert!(set.boxes.is_empty());
}

#[test]
fn box_invariants_hold_on_random_fixtures() {
    let cfg = LocalizeConfig::default();
    for seed in 0..60 {
        let fx = random_blob_fixture(seed);
        let m = &fx.map;
        let set = localize_image(m, &cfg).unwrap();
        assert!(set.boxes.len() <= set.pools);
        assert_eq!(set.boxes.len() + set.rejected.len(), set.pools);
        let image_area = m.img_w as f64 * m.img_h as f64;
        for b in &set.boxes {
            assert!(b.x1 < b.x2 && b.x2 <= m.img_w);
            assert!(b.y1 < b.y2 && b.y2 <= m.img_h);
            assert!(b.area() >= cfg.boxer.min_area);
            assert!((b.area() as f64) < cfg.boxer.whole_image_fraction * image_area);
            // the core token's clipped footprint lies inside the box
            let (r, c) = (b.core_token as u32 / m.grid_w, b.core_token as u32 % m.grid_w);
            let (px, py) = (c * m.patch, r * m.patch);
            assert!(px >= b.x1 && (px + m.patch).min(m.img_w) <= b.x2);
            assert!(py >= b.y1 && (py + m.patch).min(m.img_h) <= b.y2);
        }
        let ids: Vec<usize> = set.boxes.iter().map(|b| b.pool_id).collect();
        assert!(ids.windows(2).all(|w| w[0] < w[1]));
    }
}

#[test]
fn most_random_fixtures_are_recovered_exactly() {
    let cfg = LocalizeConfig::default();
    let exact = (0..100)
        .filter(|&seed| {
            let fx = random_blob_fixture(seed);
            let set = localize_image(&fx.map, &cfg).unwrap();
            let got: Vec<_> = set.boxes.iter().map(|b| (b.x1, b.y1, b.x2, b.y2)).collect();
            got == fx.expected_boxes()
        })
        .count();
    assert!(exact >= 95, "{exact}/100");
}

#[test]
fn scaling_features_by_two_and_a_half_keeps_boxes() {
    let cfg = LocalizeConfig::default();
    for seed in 0..40 {
        let fx = random_blob_fixture(seed);
        let a = localize_image(&fx.map, &cfg).unwrap();
        let b = localize_image(&fx.map.scaled(2.5), &cfg).unwrap();
        assert_eq!(a.boxes, b.boxes, "seed {seed}");
    }
}

#[test]
fn localization_is_deterministic() {
    let fx = random_blob_fixture(3);
    let cfg = LocalizeConfig::default();
    let first = localize_image(&fx.map, &cfg).unwrap();
    for _ in 0..5 {
        assert_eq!(localize_image(&fx.map, &cfg).unwrap(), first);
    }
    let h = fx.map.grid_h as usize;
    let w = fx.map.grid_w as usize;
    let a = outer_product(&fx.map);
    let fg = foreground_tokens(&a, h, w, &cfg.eba);
    assert_eq!(fg, foreground_tokens(&a, h, w, &cfg.eba));
    assert_eq!(cluster(&fg, h, w, &cfg.cluster), cluster(&fg, h, w, &cfg.cluster));
}

#[test]
fn affine_maps_keep_bin_assignments() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let trials = 2000;
    let mut same = 0;
    for _ in 0..trials {
        let n = rng.random_range(2..200);
        let bins = rng.random_range(2..300);
        let m: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let s = rng.random_range(0.01..100.0);
        let t = rng.random_range(-50.0..50.0);
        let moved: Vec<f64> = m.iter().map(|v| s * v + t).collect();
        if bin_assignments(&m, bins) == bin_assignments(&moved, bins) {
            same += 1;
        }
    }
    assert!(same * 100 >= trials * 99, "{same}/{trials}");
}

#[test]
fn foreground_sets_ignore_feature_scale() {
    let cfg = EbaConfig::default();
    for seed in 0..30 {
        let fx = random_blob_fixture(seed);
        let (h, w) = (fx.map.grid_h as usize, fx.map.grid_w as usize);
        let a = outer_product(&fx.map);
        let b = outer_product(&fx.map.scaled(3.7));
        for i in 0..h * w {
            assert_eq!(classify_row(a.row(i), h, w, &cfg), classify_row(b.row(i), h, w, &cfg));
        }
    }
}
