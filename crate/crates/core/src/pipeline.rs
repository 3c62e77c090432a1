//! Single-image localization: similarity, entropy vote, pooling, boxes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boxer::{
    build_mask_with, core_token, extract_box, reduce_pool_with, BoundingBox, BoxerConfig,
    Geometry, Rejection,
};
use crate::eba::{foreground_tokens, EbaConfig};
use crate::error::LocalizeError;
use crate::feature_store::{validate, FeatureError, FeatureMap};
use crate::islands::islands;
use crate::pooler::{cluster, ClusterConfig};
use crate::similarity::{binarize, degrees, outer_product};

/// Every tunable of the localization pipeline.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LocalizeConfig {
    pub eba: EbaConfig,
    pub cluster: ClusterConfig,
    pub boxer: BoxerConfig,
}

impl LocalizeConfig {
    pub fn validate(&self) -> Result<(), crate::error::ConfigError> {
        self.eba.validate()?;
        self.cluster.validate()?;
        self.boxer.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedPool {
    pub pool_id: usize,
    #[serde(flatten)]
    pub reason: Rejection,
}

/// Boxes for one image, ordered by pool id, plus what was discarded.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BoxSet {
    pub boxes: Vec<BoundingBox>,
    pub foreground_tokens: usize,
    pub pools: usize,
    pub rejected: Vec<RejectedPool>,
}

pub fn localize_image(map: &FeatureMap, cfg: &LocalizeConfig) -> Result<BoxSet, LocalizeError> {
    let violations = validate(map);
    if !violations.is_empty() {
        return Err(FeatureError::Invalid(violations).into());
    }
    cfg.validate()?;

    let geom = Geometry::from(map);
    let (h, w) = (geom.grid_h, geom.grid_w);
    let a = outer_product(map);
    let fg = foreground_tokens(&a, h, w, &cfg.eba);
    let pools = cluster(&fg, h, w, &cfg.cluster);
    let deg = degrees(&binarize(&a));

    let outcomes: Vec<Result<BoundingBox, RejectedPool>> = pools
        .par_iter()
        .map(|pool| {
            let reject = |reason| RejectedPool { pool_id: pool.id, reason };
            let cstar = core_token(pool, &deg);
            let reduced = reduce_pool_with(pool, cstar, &a).map_err(reject)?;
            let mask = build_mask_with(&reduced, &a, h, w);
            let labels = islands(&mask, cfg.boxer.connectivity);
            let (x1, y1, x2, y2) = extract_box(&labels, cstar, &geom, &cfg.boxer).map_err(reject)?;
            Ok(BoundingBox { x1, y1, x2, y2, pool_id: pool.id, core_token: cstar, pool_size: pool.len() })
        })
        .collect();

    let mut out = BoxSet { foreground_tokens: fg.len(), pools: pools.len(), ..BoxSet::default() };
    for o in outcomes {
        match o {
            Ok(b) => out.boxes.push(b),
            Err(r) => out.rejected.push(r),
        }
    }
    Ok(out)
}
