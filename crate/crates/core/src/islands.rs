//! Connected-component labeling of boolean token grids (two-pass union-find).

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Connectivity {
    #[default]
    #[serde(rename = "4")]
    Four,
    #[serde(rename = "8")]
    Eight,
}

impl Connectivity {
    pub fn from_neighbors(n: u8) -> Option<Self> {
        match n {
            4 => Some(Connectivity::Four),
            8 => Some(Connectivity::Eight),
            _ => None,
        }
    }

    pub fn neighbors(self) -> u8 {
        match self {
            Connectivity::Four => 4,
            Connectivity::Eight => 8,
        }
    }
}

/// Row-major boolean grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridMask {
    pub h: usize,
    pub w: usize,
    pub bits: Vec<bool>,
}

impl GridMask {
    pub fn new(h: usize, w: usize, bits: Vec<bool>) -> Self {
        assert_eq!(bits.len(), h * w, "mask size does not match grid");
        GridMask { h, w, bits }
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.w + col]
    }
}

/// Component labels: 0 for false cells, `1..=count` for true cells,
/// numbered in raster order of each component's first cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Labels {
    pub h: usize,
    pub w: usize,
    pub labels: Vec<u32>,
    pub count: usize,
}

impl Labels {
    pub fn at(&self, index: usize) -> u32 {
        self.labels[index]
    }

    /// Inclusive `(row_min, row_max, col_min, col_max)` of component `label`.
    pub fn extent(&self, label: u32) -> Option<(usize, usize, usize, usize)> {
        let mut ext: Option<(usize, usize, usize, usize)> = None;
        for (i, _) in self.labels.iter().enumerate().filter(|(_, &l)| l == label && l != 0) {
            let (r, c) = (i / self.w, i % self.w);
            ext = Some(match ext {
                None => (r, r, c, c),
                Some((r0, r1, c0, c1)) => (r0.min(r), r1.max(r), c0.min(c), c1.max(c)),
            });
        }
        ext
    }
}

struct DisjointSet {
    parent: Vec<u32>,
}

impl DisjointSet {
    fn new() -> Self {
        DisjointSet { parent: vec![0] }
    }

    fn make(&mut self) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        id
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let grand = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grand;
            x = grand;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // keep the smaller root so provisional order is stable
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi as usize] = lo;
        }
    }
}

pub fn islands(mask: &GridMask, connectivity: Connectivity) -> Labels {
    let (h, w) = (mask.h, mask.w);
    let mut provisional = vec![0u32; h * w];
    let mut sets = DisjointSet::new();

    for r in 0..h {
        for c in 0..w {
            if !mask.bits[r * w + c] {
                continue;
            }
            // already-visited neighbors: W, N, and for 8-connectivity NW, NE
            let mut seen = [0u32; 4];
            let mut k = 0;
            let mut push = |label: u32| {
                if label != 0 {
                    seen[k] = label;
                    k += 1;
                }
            };
            if c > 0 {
                push(provisional[r * w + c - 1]);
            }
            if r > 0 {
                push(provisional[(r - 1) * w + c]);
                if connectivity == Connectivity::Eight {
                    if c > 0 {
                        push(provisional[(r - 1) * w + c - 1]);
                    }
                    if c + 1 < w {
                        push(provisional[(r - 1) * w + c + 1]);
                    }
                }
            }
            let label = match seen[..k].iter().min() {
                None => sets.make(),
                Some(&m) => {
                    for &other in &seen[..k] {
                        sets.union(m, other);
                    }
                    m
                }
            };
            provisional[r * w + c] = label;
        }
    }

    let mut final_of_root = vec![0u32; sets.parent.len()];
    let mut count = 0u32;
    let labels = provisional
        .iter()
        .map(|&p| {
            if p == 0 {
                return 0;
            }
            let root = sets.find(p) as usize;
            if final_of_root[root] == 0 {
                count += 1;
                final_of_root[root] = count;
            }
            final_of_root[root]
        })
        .collect();
    Labels { h, w, labels, count: count as usize }
}
