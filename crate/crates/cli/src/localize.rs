//! `most localize`: run the pipeline over a directory of feature files.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use most_core::feature_store::FILE_EXTENSION;
use most_core::{localize_image, FeatureMap, LocalizeConfig, LocalizeError};

use crate::config::RunConfig;
use crate::schema::{to_json, BoxRecord, BoxesFile, ImageBoxes, ImageError};
use crate::{with_workers, write_output, CliError};

/// Sorted `.mfeat` files directly inside `dir`.
pub fn feature_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == FILE_EXTENSION))
        .collect();
    files.sort();
    Ok(files)
}

fn image_id(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn process(path: &Path, cfg: &LocalizeConfig) -> Result<ImageBoxes, ImageError> {
    let fail = |code: &str, message: String| ImageError {
        file: path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
        code: code.into(),
        message,
    };
    let map = FeatureMap::load(path).map_err(|e| fail(e.code(), e.to_string()))?;
    let set = localize_image(&map, cfg).map_err(|e| match e {
        LocalizeError::Feature(f) => fail(f.code(), f.to_string()),
        LocalizeError::Config(c) => fail("config", c.to_string()),
    })?;
    log::debug!(
        "{}: {} foreground tokens, {} pools, {} boxes",
        path.display(),
        set.foreground_tokens,
        set.pools,
        set.boxes.len()
    );
    Ok(ImageBoxes {
        image_id: image_id(path),
        width: map.img_w,
        height: map.img_h,
        boxes: set.boxes.iter().map(BoxRecord::from).collect(),
    })
}

/// Localizes every feature file in `dir`. Per-image failures are collected
/// in `errors`; the result is sorted by image id and does not depend on the
/// worker count.
pub fn localize_dir(dir: &Path, cfg: &LocalizeConfig, workers: Option<usize>) -> Result<BoxesFile, CliError> {
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let files = feature_files(dir)?;
    if files.is_empty() {
        return Err(CliError::NoInputs(format!("no .{FILE_EXTENSION} files in {}", dir.display())));
    }
    let results: Vec<Result<ImageBoxes, ImageError>> =
        with_workers(workers, || files.par_iter().map(|p| process(p, cfg)).collect())?;

    let mut out = BoxesFile::default();
    for r in results {
        match r {
            Ok(img) => out.images.push(img),
            Err(e) => {
                log::warn!("skipping {}: {}", e.file, e.message);
                out.errors.push(e);
            }
        }
    }
    out.images.sort_by(|a, b| a.image_id.cmp(&b.image_id));
    out.errors.sort_by(|a, b| a.file.cmp(&b.file));
    Ok(out)
}

/// Runs a resolved configuration and writes the boxes document.
pub fn run(cfg: &RunConfig) -> Result<BoxesFile, CliError> {
    let input = cfg.input.as_deref().ok_or_else(|| CliError::Usage("--input is required".into()))?;
    let output = cfg.output.as_deref().ok_or_else(|| CliError::Usage("--out is required".into()))?;
    let boxes = localize_dir(input, &cfg.pipeline(), cfg.workers)?;
    write_output(output, &to_json(&boxes))?;
    if boxes.images.is_empty() {
        return Err(CliError::AllFailed(boxes.errors.len()));
    }
    Ok(boxes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use most_core::fixtures::two_blobs;

    #[test]
    fn two_blob_directory() {
        let dir = tempfile::tempdir().unwrap();
        two_blobs().map.save(dir.path().join("img_0001.mfeat")).unwrap();
        fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
        fs::write(dir.path().join("broken.mfeat"), b"MOSTFEAT").unwrap();
        let out = localize_dir(dir.path(), &LocalizeConfig::default(), Some(2)).unwrap();
        assert_eq!(out.images.len(), 1);
        assert_eq!(out.images[0].image_id, "img_0001");
        assert_eq!(out.images[0].boxes.len(), 2);
        assert_eq!(out.errors.len(), 1);
        assert_eq!(out.errors[0].file, "broken.mfeat");
        assert_eq!(out.errors[0].code, "truncated");
    }

    #[test]
    fn empty_directory_is_no_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let err = localize_dir(dir.path(), &LocalizeConfig::default(), None).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().starts_with("no inputs"));
    }

    #[test]
    fn all_failures_still_write_errors() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("a.mfeat"), b"junk").unwrap();
        let out = dir.path().join("boxes.json");
        let cfg = RunConfig {
            input: Some(dir.path().to_path_buf()),
            output: Some(out.clone()),
            ..RunConfig::default()
        };
        let err = run(&cfg).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        let written: BoxesFile = serde_json::from_str(&fs::read_to_string(out).unwrap()).unwrap();
        assert_eq!(written.errors[0].code, "bad_magic");
    }
}
