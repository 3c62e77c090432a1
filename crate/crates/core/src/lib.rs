//! Training-free multiple object localization from self-supervised vision
//! transformer patch features.
//!
//! Given one image's patch-token features `F` (see [`feature_store`]), the
//! pipeline in [`localize_image`]:
//!
//! 1. builds the token similarity matrix `A = F Fᵀ` ([`similarity`]);
//! 2. marks tokens whose similarity map has low multi-scale entropy as
//!    foreground ([`eba`]);
//! 3. groups foreground tokens by grid position with DBSCAN ([`pooler`]);
//! 4. turns each group into at most one pixel box ([`boxer`], [`islands`]).
//!
//! [`metrics`] scores boxes against ground truth (IoU, CorLoc, recall@k) and
//! [`discovery`] clusters per-region descriptors with K-means, picking K
//! with the kneedle rule.
//!
//! Nothing here runs a neural network: features arrive as MOSTFEAT files.

pub mod boxer;
pub mod discovery;
pub mod eba;
pub mod error;
pub mod feature_store;
pub mod fixtures;
pub mod islands;
pub mod metrics;
pub mod pipeline;
pub mod pooler;
pub mod similarity;

pub use boxer::{BoundingBox, BoxerConfig, Rejection};
pub use eba::{EbaConfig, ForegroundSet};
pub use error::{ConfigError, LocalizeError};
pub use feature_store::{read_feature_map, validate, write_feature_map, FeatureError, FeatureMap};
pub use islands::Connectivity;
pub use pipeline::{localize_image, BoxSet, LocalizeConfig, RejectedPool};
pub use pooler::{ClusterConfig, GridMetric, Pool};
pub use similarity::{BinaryMatrix, DegreeVector, SimilarityMatrix};
