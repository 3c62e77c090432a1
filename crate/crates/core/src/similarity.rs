//! Token similarity `A = F Fᵀ`, its positive-part binarization, and degrees.

use rayon::prelude::*;

use crate::feature_store::FeatureMap;

/// Dense symmetric `n × n` matrix of token dot products.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    n: usize,
    values: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    /// Row `i`: token `i`'s similarity map in raster order.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// `Â = A > 0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMatrix {
    n: usize,
    bits: Vec<bool>,
}

impl BinaryMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[bool] {
        &self.bits[i * self.n..(i + 1) * self.n]
    }
}

/// Row sums of a [`BinaryMatrix`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegreeVector(pub Vec<usize>);

impl DegreeVector {
    pub fn get(&self, c: usize) -> usize {
        self.0[c]
    }
}

/// Dot product accumulated in f64 in index order. Every similarity value in
/// the crate goes through this function, so equal inputs give equal bits.
#[inline]
pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |acc, (&x, &y)| acc + x as f64 * y as f64)
}

/// Computes the upper triangle once and mirrors it, so `A` is exactly symmetric.
pub fn outer_product(map: &FeatureMap) -> SimilarityMatrix {
    let n = map.n_tokens();
    assert_eq!(map.data.len(), n * map.dim(), "feature data does not match geometry");
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let fi = map.token(i);
            (i..n).map(|j| dot(fi, map.token(j))).collect()
        })
        .collect();
    let mut values = vec![0.0; n * n];
    for (i, tail) in upper.into_iter().enumerate() {
        for (off, v) in tail.into_iter().enumerate() {
            let j = i + off;
            values[i * n + j] = v;
            values[j * n + i] = v;
        }
    }
    SimilarityMatrix { n, values }
}

pub fn binarize(a: &SimilarityMatrix) -> BinaryMatrix {
    BinaryMatrix { n: a.n, bits: a.values.iter().map(|&v| v > 0.0).collect() }
}

pub fn degrees(bin: &BinaryMatrix) -> DegreeVector {
    DegreeVector((0..bin.n).map(|i| bin.row(i).iter().filter(|&&b| b).count()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn map_from(n: u32, d: u32, data: Vec<f32>) -> FeatureMap {
        FeatureMap::new(1, n, d, 1, 1, n, data).unwrap()
    }

    fn random_map(rng: &mut ChaCha8Rng, n: u32, d: u32) -> FeatureMap {
        let data = (0..n * d).map(|_| rng.random_range(-1.0f32..1.0)).collect();
        map_from(n, d, data)
    }

    #[test]
    fn orthonormal_tokens_give_identity() {
        let a = outer_product(&map_from(2, 2, vec![1.0, 0.0, 0.0, 1.0]));
        assert_eq!(a.values(), &[1.0, 0.0, 0.0, 1.0]);
        let b = binarize(&a);
        assert!(b.get(0, 0) && !b.get(0, 1) && !b.get(1, 0) && b.get(1, 1));
        assert_eq!(degrees(&b), DegreeVector(vec![1, 1]));
    }

    #[test]
    fn zero_entries_are_false() {
        let a = outer_product(&map_from(2, 2, vec![1.0, 0.0, 0.0, 0.0]));
        let b = binarize(&a);
        assert!(b.get(0, 0));
        assert!(!b.get(1, 1));
        assert!(!b.get(0, 1));
    }

    #[test]
    fn identity_and_all_true_degrees() {
        let id4 = outer_product(&map_from(4, 4, {
            let mut v = vec![0.0; 16];
            for i in 0..4 {
                v[i * 4 + i] = 1.0;
            }
            v
        }));
        assert_eq!(degrees(&binarize(&id4)).0, vec![1, 1, 1, 1]);
        let ones = outer_product(&map_from(3, 2, vec![1.0; 6]));
        assert_eq!(degrees(&binarize(&ones)).0, vec![3, 3, 3]);
    }

    #[test]
    fn five_token_map_matches_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let map = random_map(&mut rng, 5, 3);
        let a = outer_product(&map);
        for i in 0..5 {
            for j in 0..5 {
                let mut s = 0.0f64;
                for k in 0..3 {
                    s += map.data[i * 3 + k] as f64 * map.data[j * 3 + k] as f64;
                }
                assert_eq!(a.get(i, j), s);
            }
        }
    }

    #[test]
    fn exactly_symmetric_with_nonnegative_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let map = random_map(&mut rng, 40, 17);
        let a = outer_product(&map);
        for i in 0..40 {
            assert!(a.get(i, i) >= 0.0);
            for j in 0..40 {
                assert_eq!(a.get(i, j).to_bits(), a.get(j, i).to_bits());
            }
        }
    }

    proptest! {
        #[test]
        fn scaling_is_quadratic(
            seed in any::<u64>(), n in 1u32..24, d in 1u32..9, s in 0.01f32..50.0
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let map = random_map(&mut rng, n, d);
            let a = outer_product(&map);
            let scaled = outer_product(&map.scaled(s));
            let s2 = (s as f64) * (s as f64);
            let n = n as usize;
            for i in 0..n {
                for j in 0..n {
                    // relative to the Cauchy-Schwarz bound of the entry
                    let scale = s2 * (a.get(i, i) * a.get(j, j)).sqrt();
                    let err = (a.get(i, j) * s2 - scaled.get(i, j)).abs();
                    prop_assert!(err <= 1e-6 * scale + 1e-300);
                }
            }
        }

        #[test]
        fn binarization_ignores_exact_rescaling(
            seed in any::<u64>(), n in 1u32..24, d in 1u32..9, e in -6i32..7
        ) {
            // powers of two scale f32 storage without rounding
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let map = random_map(&mut rng, n, d);
            let s = 2f32.powi(e);
            prop_assert_eq!(
                binarize(&outer_product(&map)),
                binarize(&outer_product(&map.scaled(s)))
            );
        }

        #[test]
        fn degrees_match_row_count_oracle(seed in any::<u64>(), n in 1usize..64) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let map = random_map(&mut rng, n as u32, 3);
            let a = outer_product(&map);
            let deg = degrees(&binarize(&a));
            for i in 0..n {
                let mut count = 0;
                for j in 0..n {
                    if a.get(i, j) > 0.0 {
                        count += 1;
                    }
                }
                prop_assert_eq!(deg.get(i), count);
            }
        }
    }
}
