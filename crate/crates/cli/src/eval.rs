//! `most eval`: CorLoc, recall@k, and boxes per image.

use std::fmt::Write as _;
use std::path::Path;

use most_core::metrics::{corloc_oracle, mean_boxes_per_image, recall_at_k};

use crate::schema::{eval_records, to_json, BoxesFile, GroundTruth, MetricsReport};
use crate::{write_output, CliError};

pub const DEFAULT_IOU: f64 = 0.5;

/// Scores `pred` on every ground-truth image. CorLoc keeps the single
/// best-overlapping box per image, which gives the same value as asking
/// whether any box localizes an object.
pub fn evaluate(pred: &BoxesFile, gt: &GroundTruth, iou_threshold: f64) -> Result<MetricsReport, CliError> {
    if !(0.0..1.0).contains(&iou_threshold) {
        return Err(CliError::Usage(format!("IoU threshold {iou_threshold} outside [0, 1)")));
    }
    if gt.images.is_empty() {
        return Err(CliError::Schema("ground truth lists no images".into()));
    }
    let records = eval_records(pred, gt);
    let missing = gt.images.iter().filter(|g| pred.find(&g.id).is_none()).count();
    if missing == gt.images.len() {
        return Err(CliError::Usage("prediction and ground-truth image ids do not overlap".into()));
    }
    let metric = |r: Result<f64, most_core::metrics::MetricsError>| r.map_err(|e| CliError::Schema(e.to_string()));
    Ok(MetricsReport {
        images: records.len(),
        images_without_predictions: missing,
        iou_threshold,
        corloc: metric(corloc_oracle(&records, iou_threshold))?,
        recall_at_1: metric(recall_at_k(&records, 1, iou_threshold))?,
        recall_at_10: metric(recall_at_k(&records, 10, iou_threshold))?,
        recall_at_100: metric(recall_at_k(&records, 100, iou_threshold))?,
        mean_boxes_per_image: metric(mean_boxes_per_image(&records))?,
    })
}

pub fn render_table(r: &MetricsReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "images                 {}", r.images);
    let _ = writeln!(s, "without predictions    {}", r.images_without_predictions);
    let _ = writeln!(s, "IoU threshold          {:.2}", r.iou_threshold);
    let _ = writeln!(s, "CorLoc                 {:.2}%", 100.0 * r.corloc);
    let _ = writeln!(s, "recall@1               {:.2}%", 100.0 * r.recall_at_1);
    let _ = writeln!(s, "recall@10              {:.2}%", 100.0 * r.recall_at_10);
    let _ = writeln!(s, "recall@100             {:.2}%", 100.0 * r.recall_at_100);
    let _ = writeln!(s, "boxes per image        {:.2}", r.mean_boxes_per_image);
    s
}

pub fn run(pred: &Path, gt: &Path, iou_threshold: f64, out: Option<&Path>) -> Result<MetricsReport, CliError> {
    let pred = BoxesFile::load(pred)?;
    let gt = GroundTruth::load(gt)?;
    let report = evaluate(&pred, &gt, iou_threshold)?;
    print!("{}", render_table(&report));
    if let Some(out) = out {
        write_output(out, &to_json(&report))?;
    }
    Ok(report)
}
