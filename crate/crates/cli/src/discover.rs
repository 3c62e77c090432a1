//! `most discover`: cluster per-region descriptors into object classes.
//!
//! Region descriptors arrive as 1×1 feature files named
//! `<image_id>__<pool_id>.mfeat`.

use std::path::Path;

use rayon::prelude::*;

use most_core::discovery::{discover, DiscoveryConfig, RegionFeature};
use most_core::FeatureMap;

use crate::localize::feature_files;
use crate::schema::{to_json, BoxesFile, LabelsFile, RegionLabel};
use crate::{with_workers, write_output, CliError};

pub const REGION_SEPARATOR: &str = "__";

/// Parses `start:end[:step]` into an inclusive list of K values.
pub fn parse_k_range(s: &str) -> Result<Vec<usize>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |p: &str| p.trim().parse::<usize>().map_err(|_| format!("bad K range {s:?}"));
    let (start, end, step) = match parts.as_slice() {
        [a, b] => (num(a)?, num(b)?, 1),
        [a, b, c] => (num(a)?, num(b)?, num(c)?),
        _ => return Err(format!("K range must be start:end[:step], got {s:?}")),
    };
    if start < 1 || end < start || step == 0 {
        return Err(format!("K range {s:?} must satisfy 1 ≤ start ≤ end and step ≥ 1"));
    }
    Ok((start..=end).step_by(step).collect())
}

/// Splits a region file stem into image id and pool id.
pub fn region_name(stem: &str) -> Option<(String, usize)> {
    let (image, pool) = stem.rsplit_once(REGION_SEPARATOR)?;
    if image.is_empty() {
        return None;
    }
    Some((image.to_string(), pool.parse().ok()?))
}

pub fn load_regions(dir: &Path) -> Result<Vec<RegionFeature>, CliError> {
    let files = feature_files(dir)?;
    if files.is_empty() {
        return Err(CliError::NoInputs(format!("no region files in {}", dir.display())));
    }
    let loaded: Result<Vec<RegionFeature>, CliError> = files
        .par_iter()
        .map(|path| {
            let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let (image_id, pool_id) = region_name(&stem).ok_or_else(|| {
                CliError::Schema(format!("{}: expected <image_id>{REGION_SEPARATOR}<pool_id>", path.display()))
            })?;
            let map = FeatureMap::load(path).map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))?;
            if map.n_tokens() != 1 {
                return Err(CliError::Schema(format!(
                    "{}: region descriptors need a 1×1 grid, got {}×{}",
                    path.display(),
                    map.grid_h,
                    map.grid_w
                )));
            }
            Ok(RegionFeature { image_id, pool_id, vector: map.data.iter().map(|&v| v as f64).collect() })
        })
        .collect();
    let mut regions = loaded?;
    regions.sort_by(|a, b| (&a.image_id, a.pool_id).cmp(&(&b.image_id, b.pool_id)));
    Ok(regions)
}

pub struct DiscoverArgs<'a> {
    pub regions: &'a Path,
    pub boxes: Option<&'a Path>,
    pub out: &'a Path,
    pub config: DiscoveryConfig,
    pub workers: Option<usize>,
}

pub fn run(args: &DiscoverArgs) -> Result<LabelsFile, CliError> {
    let regions = load_regions(args.regions)?;
    let boxes = args.boxes.map(BoxesFile::load).transpose()?;
    let found = with_workers(args.workers, || discover(&regions, &args.config))?
        .map_err(|e| CliError::Usage(e.to_string()))?;
    if found.flat_curve {
        log::warn!("inertia curve is flat; using the smallest K");
    }
    log::info!("{} regions, K = {}", regions.len(), found.k);
    let labels = LabelsFile {
        k: found.k,
        flat_curve: found.flat_curve,
        k_values: found.k_values,
        inertias: found.inertias,
        regions: regions
            .iter()
            .zip(&found.labels)
            .map(|(r, &cluster)| RegionLabel {
                image_id: r.image_id.clone(),
                pool_id: r.pool_id,
                bbox: boxes.as_ref().and_then(|f| {
                    let b = f.find(&r.image_id)?.boxes.iter().find(|b| b.pool_id == r.pool_id)?;
                    Some([b.x1, b.y1, b.x2, b.y2])
                }),
                cluster,
            })
            .collect(),
    };
    write_output(args.out, &to_json(&labels))?;
    Ok(labels)
}
