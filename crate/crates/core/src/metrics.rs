//! Box-level evaluation: IoU, CorLoc, recall@k, and the oracle single-box
//! selection used for single-object localization.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Pixel box `[x1, x2) × [y1, y2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl PixelBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        PixelBox { x1, y1, x2, y2 }
    }

    pub fn area(&self) -> f64 {
        (self.x2 - self.x1).max(0.0) * (self.y2 - self.y1).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub bbox: PixelBox,
    pub pool_id: usize,
    /// Token count of the source pool; the ranking score.
    pub pool_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub image_id: String,
    pub predictions: Vec<Prediction>,
    pub ground_truth: Vec<PixelBox>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("no images to evaluate")]
    Empty,
    #[error("image {0} has no ground-truth boxes")]
    NoGroundTruth(String),
    #[error("k must be ≥ 1")]
    InvalidK,
}

/// Intersection over union; 0 for disjoint or zero-area boxes.
pub fn iou(a: &PixelBox, b: &PixelBox) -> f64 {
    let (area_a, area_b) = (a.area(), b.area());
    if area_a <= 0.0 || area_b <= 0.0 {
        log::warn!("IoU with a zero-area box: {a:?} vs {b:?}");
        return 0.0;
    }
    let iw = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(0.0);
    let ih = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(0.0);
    let inter = iw * ih;
    if inter == 0.0 {
        return 0.0;
    }
    inter / (area_a + area_b - inter)
}

fn best_overlap(p: &PixelBox, gts: &[PixelBox]) -> f64 {
    gts.iter().map(|g| iou(p, g)).fold(0.0, f64::max)
}

fn hit(record: &EvalRecord, thresh: f64) -> bool {
    record.predictions.iter().any(|p| record.ground_truth.iter().any(|g| iou(&p.bbox, g) > thresh))
}

/// Fraction of images where some prediction overlaps some ground-truth box
/// with IoU strictly above `thresh`.
pub fn corloc(records: &[EvalRecord], thresh: f64) -> Result<f64, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::Empty);
    }
    if let Some(r) = records.iter().find(|r| r.ground_truth.is_empty()) {
        return Err(MetricsError::NoGroundTruth(r.image_id.clone()));
    }
    let hits = records.iter().filter(|r| hit(r, thresh)).count();
    Ok(hits as f64 / records.len() as f64)
}

/// The prediction whose best IoU against any ground-truth box is highest;
/// ties go to the lowest pool id.
pub fn oracle_best_box(record: &EvalRecord) -> Option<&Prediction> {
    record
        .predictions
        .iter()
        .map(|p| (best_overlap(&p.bbox, &record.ground_truth), p))
        .fold(None, |best: Option<(f64, &Prediction)>, (score, p)| match best {
            Some((bs, bp)) if bs > score || (bs == score && bp.pool_id <= p.pool_id) => best,
            _ => Some((score, p)),
        })
        .map(|(_, p)| p)
}

/// CorLoc after keeping only [`oracle_best_box`] per image.
pub fn corloc_oracle(records: &[EvalRecord], thresh: f64) -> Result<f64, MetricsError> {
    let selected: Vec<EvalRecord> = records
        .iter()
        .map(|r| EvalRecord {
            image_id: r.image_id.clone(),
            predictions: oracle_best_box(r).cloned().into_iter().collect(),
            ground_truth: r.ground_truth.clone(),
        })
        .collect();
    corloc(&selected, thresh)
}

/// Predictions by descending pool size, then ascending pool id.
pub fn ranked(predictions: &[Prediction]) -> Vec<&Prediction> {
    let mut out: Vec<&Prediction> = predictions.iter().collect();
    out.sort_by(|a, b| b.pool_size.cmp(&a.pool_size).then(a.pool_id.cmp(&b.pool_id)));
    out
}

/// Ground-truth boxes matched by the top `k` ranked predictions of one
/// image. Each prediction, in rank order, takes the unmatched ground-truth
/// box it overlaps most, if that overlap exceeds `thresh`.
pub fn matched_at_k(record: &EvalRecord, k: usize, thresh: f64) -> usize {
    let mut taken = vec![false; record.ground_truth.len()];
    let mut matched = 0;
    for p in ranked(&record.predictions).into_iter().take(k) {
        let best = record
            .ground_truth
            .iter()
            .enumerate()
            .filter(|(i, _)| !taken[*i])
            .map(|(i, g)| (i, iou(&p.bbox, g)))
            .filter(|&(_, v)| v > thresh)
            .fold(None, |best: Option<(usize, f64)>, (i, v)| match best {
                Some((_, bv)) if bv >= v => best,
                _ => Some((i, v)),
            });
        if let Some((i, _)) = best {
            taken[i] = true;
            matched += 1;
        }
    }
    matched
}

/// Fraction of all ground-truth boxes recovered by the top `k` predictions
/// of their image.
pub fn recall_at_k(records: &[EvalRecord], k: usize, thresh: f64) -> Result<f64, MetricsError> {
    if k < 1 {
        return Err(MetricsError::InvalidK);
    }
    if records.is_empty() {
        return Err(MetricsError::Empty);
    }
    let total: usize = records.iter().map(|r| r.ground_truth.len()).sum();
    if total == 0 {
        return Err(MetricsError::NoGroundTruth(records[0].image_id.clone()));
    }
    let matched: usize = records.iter().map(|r| matched_at_k(r, k, thresh)).sum();
    Ok(matched as f64 / total as f64)
}

pub fn mean_boxes_per_image(records: &[EvalRecord]) -> Result<f64, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::Empty);
    }
    let boxes: usize = records.iter().map(|r| r.predictions.len()).sum();
    Ok(boxes as f64 / records.len() as f64)
}
