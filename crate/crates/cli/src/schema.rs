//! JSON documents read and written by the `most` subcommands.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use most_core::metrics::{EvalRecord, PixelBox, Prediction};
use most_core::BoundingBox;

use crate::CliError;

/// Output of `most localize`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxesFile {
    pub images: Vec<ImageBoxes>,
    #[serde(default)]
    pub errors: Vec<ImageError>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageBoxes {
    pub image_id: String,
    pub width: u32,
    pub height: u32,
    pub boxes: Vec<BoxRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxRecord {
    pub x1: u32,
    pub y1: u32,
    pub x2: u32,
    pub y2: u32,
    pub pool_id: usize,
    pub core_token: usize,
    pub pool_size: usize,
}

impl From<&BoundingBox> for BoxRecord {
    fn from(b: &BoundingBox) -> Self {
        BoxRecord {
            x1: b.x1,
            y1: b.y1,
            x2: b.x2,
            y2: b.y2,
            pool_id: b.pool_id,
            core_token: b.core_token,
            pool_size: b.pool_size,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageError {
    pub file: String,
    pub code: String,
    pub message: String,
}

/// Dataset-agnostic ground truth: `{images: [{id, width, height, boxes: [[x1,y1,x2,y2], ...]}]}`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruth {
    pub images: Vec<GtImage>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GtImage {
    pub id: String,
    pub width: u32,
    pub height: u32,
    pub boxes: Vec<[f64; 4]>,
}

/// Output of `most eval`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub images: usize,
    pub images_without_predictions: usize,
    pub iou_threshold: f64,
    pub corloc: f64,
    pub recall_at_1: f64,
    pub recall_at_10: f64,
    pub recall_at_100: f64,
    pub mean_boxes_per_image: f64,
}

/// Output of `most discover`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelsFile {
    pub k: usize,
    pub flat_curve: bool,
    pub k_values: Vec<usize>,
    pub inertias: Vec<f64>,
    pub regions: Vec<RegionLabel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionLabel {
    pub image_id: String,
    pub pool_id: usize,
    #[serde(rename = "box")]
    pub bbox: Option<[u32; 4]>,
    pub cluster: usize,
}

/// Pretty JSON with a trailing newline; the canonical on-disk form.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("schema types serialize");
    s.push('\n');
    s
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))
}

fn box_problem(b: [f64; 4], width: u32, height: u32) -> Option<String> {
    let [x1, y1, x2, y2] = b;
    if b.iter().any(|v| !v.is_finite()) {
        return Some("coordinates must be finite".into());
    }
    if x1 < 0.0 || y1 < 0.0 {
        return Some(format!("negative coordinate in {b:?}"));
    }
    if x2 <= x1 || y2 <= y1 {
        return Some(format!("box {b:?} has x2 ≤ x1 or y2 ≤ y1"));
    }
    if x2 > width as f64 || y2 > height as f64 {
        return Some(format!("box {b:?} exceeds image size {width}×{height}"));
    }
    None
}

impl GroundTruth {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let gt: GroundTruth = read_json(path)?;
        gt.check().map_err(|m| CliError::Schema(format!("{}: {m}", path.display())))?;
        Ok(gt)
    }

    pub fn check(&self) -> Result<(), String> {
        let mut seen = std::collections::HashSet::new();
        for (i, img) in self.images.iter().enumerate() {
            if !seen.insert(img.id.as_str()) {
                return Err(format!("images[{i}].id: duplicate id {:?}", img.id));
            }
            if img.boxes.is_empty() {
                return Err(format!("images[{i}].boxes: at least one box is required"));
            }
            for (j, &b) in img.boxes.iter().enumerate() {
                if let Some(p) = box_problem(b, img.width, img.height) {
                    return Err(format!("images[{i}].boxes[{j}]: {p}"));
                }
            }
        }
        Ok(())
    }
}

impl BoxesFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let file: BoxesFile = read_json(path)?;
        file.check().map_err(|m| CliError::Schema(format!("{}: {m}", path.display())))?;
        Ok(file)
    }

    pub fn check(&self) -> Result<(), String> {
        let mut seen = std::collections::HashSet::new();
        for (i, img) in self.images.iter().enumerate() {
            if !seen.insert(img.image_id.as_str()) {
                return Err(format!("images[{i}].image_id: duplicate id {:?}", img.image_id));
            }
            for (j, b) in img.boxes.iter().enumerate() {
                let coords = [b.x1 as f64, b.y1 as f64, b.x2 as f64, b.y2 as f64];
                if let Some(p) = box_problem(coords, img.width, img.height) {
                    return Err(format!("images[{i}].boxes[{j}]: {p}"));
                }
            }
        }
        Ok(())
    }

    pub fn find(&self, image_id: &str) -> Option<&ImageBoxes> {
        self.images.iter().find(|i| i.image_id == image_id)
    }
}

/// Joins predictions onto ground-truth images. Images without a prediction
/// entry get an empty prediction list.
pub fn eval_records(pred: &BoxesFile, gt: &GroundTruth) -> Vec<EvalRecord> {
    let by_id: std::collections::HashMap<&str, &ImageBoxes> =
        pred.images.iter().map(|i| (i.image_id.as_str(), i)).collect();
    gt.images
        .iter()
        .map(|g| EvalRecord {
            image_id: g.id.clone(),
            predictions: by_id
                .get(g.id.as_str())
                .map(|p| {
                    p.boxes
                        .iter()
                        .map(|b| Prediction {
                            bbox: PixelBox::new(b.x1 as f64, b.y1 as f64, b.x2 as f64, b.y2 as f64),
                            pool_id: b.pool_id,
                            pool_size: b.pool_size,
                        })
                        .collect()
                })
                .unwrap_or_default(),
            ground_truth: g.boxes.iter().map(|&[x1, y1, x2, y2]| PixelBox::new(x1, y1, x2, y2)).collect(),
        })
        .collect()
}
