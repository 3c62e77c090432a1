//! `most viz`: SVG overlays of predicted boxes on the source images.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;

use crate::schema::{BoxesFile, ImageBoxes};
use crate::{write_output, CliError};

const EXTENSIONS: &[(&str, &str)] = &[
    ("jpg", "image/jpeg"),
    ("jpeg", "image/jpeg"),
    ("png", "image/png"),
    ("gif", "image/gif"),
    ("bmp", "image/bmp"),
    ("webp", "image/webp"),
];

const PALETTE: &[&str] = &[
    "#e6194b", "#3cb44b", "#ffe119", "#4363d8", "#f58231", "#911eb4", "#46f0f0", "#f032e6",
    "#bcf60c", "#fabebe", "#008080", "#e6beff", "#9a6324", "#800000", "#aaffc3", "#000075",
];

pub fn color(pool_id: usize) -> &'static str {
    PALETTE[pool_id % PALETTE.len()]
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// First `<image_id>.<ext>` in `dir`, trying extensions in a fixed order.
pub fn find_image(dir: &Path, image_id: &str) -> Option<(PathBuf, &'static str)> {
    EXTENSIONS.iter().find_map(|&(ext, mime)| {
        let p = dir.join(format!("{image_id}.{ext}"));
        p.is_file().then_some((p, mime))
    })
}

/// SVG document for one image. `image` is the embedded raster, if any.
pub fn render(img: &ImageBoxes, image: Option<(&[u8], &str)>) -> String {
    let (w, h) = (img.width, img.height);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(s, "  <title>{}</title>", escape(&img.image_id));
    if let Some((bytes, mime)) = image {
        let _ = writeln!(
            s,
            r#"  <image x="0" y="0" width="{w}" height="{h}" href="data:{mime};base64,{}"/>"#,
            STANDARD.encode(bytes)
        );
    }
    for b in &img.boxes {
        let _ = writeln!(
            s,
            r#"  <rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="{}" stroke-width="2" data-pool="{}"/>"#,
            b.x1,
            b.y1,
            b.x2 - b.x1,
            b.y2 - b.y1,
            color(b.pool_id),
            b.pool_id
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Writes `<out>/<image_id>.svg` for every image that has a source file.
/// Returns the number of overlays written.
pub fn run(boxes: &Path, images: &Path, out: &Path) -> Result<usize, CliError> {
    let file = BoxesFile::load(boxes)?;
    if file.images.is_empty() {
        return Err(CliError::NoInputs(format!("{} lists no images", boxes.display())));
    }
    let mut written = 0;
    for img in &file.images {
        let Some((path, mime)) = find_image(images, &img.image_id) else {
            log::warn!("no image file for {:?} in {}", img.image_id, images.display());
            continue;
        };
        let bytes = fs::read(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let svg = render(img, Some((&bytes, mime)));
        write_output(&out.join(format!("{}.svg", img.image_id)), &svg)?;
        written += 1;
    }
    Ok(written)
}
