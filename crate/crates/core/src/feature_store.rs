//! MOSTFEAT v1: the binary container for one image's patch-token grid.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! bytes 0..8    ASCII "MOSTFEAT"
//! bytes 8..36   u32 version (=1), grid_h, grid_w, dim, patch, img_h, img_w
//! bytes 36..    grid_h * grid_w * dim f32 values, token-major then dim
//! ```
//!
//! Tokens are stored row-major over the grid, so token `p` sits at
//! row `p / grid_w`, column `p % grid_w`.

use std::fmt;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

pub const MAGIC: &[u8; 8] = b"MOSTFEAT";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = MAGIC.len() + 7 * 4;
/// Extension used for feature files; the file stem is the image id.
pub const FILE_EXTENSION: &str = "mfeat";

/// Patch-token features for one image.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub grid_h: u32,
    pub grid_w: u32,
    pub dim: u32,
    pub patch: u32,
    pub img_h: u32,
    pub img_w: u32,
    /// `grid_h * grid_w` rows of `dim` values.
    pub data: Vec<f32>,
}

/// A single broken invariant reported by [`validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    EmptyGrid,
    ZeroDim,
    ZeroPatch,
    EmptyImage,
    HeightCoverage { grid_h: u32, patch: u32, img_h: u32 },
    WidthCoverage { grid_w: u32, patch: u32, img_w: u32 },
    DataLength { expected: u64, actual: usize },
    NonFinite { token: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyGrid => write!(f, "grid must contain at least one token"),
            Violation::ZeroDim => write!(f, "dim must be ≥ 1"),
            Violation::ZeroPatch => write!(f, "patch must be ≥ 1"),
            Violation::EmptyImage => write!(f, "image size must be ≥ 1 in both axes"),
            Violation::HeightCoverage { grid_h, patch, img_h } => write!(
                f,
                "grid height {grid_h}×{patch} does not cover image height {img_h} within one patch"
            ),
            Violation::WidthCoverage { grid_w, patch, img_w } => write!(
                f,
                "grid width {grid_w}×{patch} does not cover image width {img_w} within one patch"
            ),
            Violation::DataLength { expected, actual } => {
                write!(f, "expected {expected} values, found {actual}")
            }
            Violation::NonFinite { token } => write!(f, "non-finite value at token {token}"),
        }
    }
}

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated: expected {expected} bytes, got {actual}")]
    Truncated { expected: u64, actual: u64 },
    #[error("size mismatch: data continues past the declared payload")]
    TrailingData,
    #[error("size mismatch: header declares an unaddressable payload")]
    Oversized,
    #[error("non-finite value at token {token}")]
    NonFinite { token: usize },
    #[error("invalid feature map: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl FeatureError {
    /// Stable machine-readable code for each failure class.
    pub fn code(&self) -> &'static str {
        match self {
            FeatureError::BadMagic => "bad_magic",
            FeatureError::UnsupportedVersion(_) => "bad_version",
            FeatureError::Truncated { .. } => "truncated",
            FeatureError::TrailingData | FeatureError::Oversized => "size_mismatch",
            FeatureError::NonFinite { .. } => "non_finite",
            FeatureError::Invalid(_) => "invalid",
            FeatureError::Io(_) => "io",
        }
    }
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

impl FeatureMap {
    /// Builds a map and checks every invariant.
    pub fn new(
        grid_h: u32,
        grid_w: u32,
        dim: u32,
        patch: u32,
        img_h: u32,
        img_w: u32,
        data: Vec<f32>,
    ) -> Result<Self, FeatureError> {
        let map = FeatureMap { grid_h, grid_w, dim, patch, img_h, img_w, data };
        let violations = validate(&map);
        if violations.is_empty() {
            Ok(map)
        } else {
            Err(FeatureError::Invalid(violations))
        }
    }

    /// Token count `N = grid_h * grid_w`.
    pub fn n_tokens(&self) -> usize {
        self.grid_h as usize * self.grid_w as usize
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    /// Feature vector of token `p`.
    pub fn token(&self, p: usize) -> &[f32] {
        let d = self.dim();
        &self.data[p * d..(p + 1) * d]
    }

    /// Copy with every value multiplied by `s`.
    pub fn scaled(&self, s: f32) -> FeatureMap {
        FeatureMap { data: self.data.iter().map(|v| v * s).collect(), ..self.clone() }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, FeatureError> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.data.len() * 4);
        write_feature_map(self, &mut out)?;
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, FeatureError> {
        read_feature_map(bytes)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, FeatureError> {
        read_feature_map(BufReader::new(File::open(path)?))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), FeatureError> {
        let bytes = self.to_bytes()?;
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(&bytes)?;
        w.flush()?;
        Ok(())
    }
}

/// Lists every broken invariant; empty iff the map is valid.
pub fn validate(map: &FeatureMap) -> Vec<Violation> {
    let mut out = Vec::new();
    if map.grid_h == 0 || map.grid_w == 0 {
        out.push(Violation::EmptyGrid);
    }
    if map.dim == 0 {
        out.push(Violation::ZeroDim);
    }
    if map.patch == 0 {
        out.push(Violation::ZeroPatch);
    }
    if map.img_h == 0 || map.img_w == 0 {
        out.push(Violation::EmptyImage);
    }
    if map.patch > 0 {
        if !covers(map.grid_h, map.patch, map.img_h) {
            out.push(Violation::HeightCoverage {
                grid_h: map.grid_h,
                patch: map.patch,
                img_h: map.img_h,
            });
        }
        if !covers(map.grid_w, map.patch, map.img_w) {
            out.push(Violation::WidthCoverage {
                grid_w: map.grid_w,
                patch: map.patch,
                img_w: map.img_w,
            });
        }
    }
    let expected = (map.grid_h as u64 * map.grid_w as u64).saturating_mul(map.dim as u64);
    if expected != map.data.len() as u64 {
        out.push(Violation::DataLength { expected, actual: map.data.len() });
    } else if map.dim > 0 {
        let d = map.dim as usize;
        out.extend(
            map.data
                .chunks_exact(d)
                .enumerate()
                .filter(|(_, row)| row.iter().any(|v| !v.is_finite()))
                .map(|(token, _)| Violation::NonFinite { token }),
        );
    }
    out
}

// grid * patch must lie in [img - patch + 1, img + patch].
fn covers(grid: u32, patch: u32, img: u32) -> bool {
    let span = grid as u64 * patch as u64;
    let (patch, img) = (patch as u64, img as u64);
    span + patch > img && span <= img + patch
}

/// Serializes `map`. Nothing is written if the map is invalid.
pub fn write_feature_map<W: Write>(map: &FeatureMap, mut sink: W) -> Result<(), FeatureError> {
    let violations = validate(map);
    if !violations.is_empty() {
        return Err(FeatureError::Invalid(violations));
    }
    let mut buf = Vec::with_capacity(HEADER_LEN + map.data.len() * 4);
    buf.extend_from_slice(MAGIC);
    for word in [VERSION, map.grid_h, map.grid_w, map.dim, map.patch, map.img_h, map.img_w] {
        buf.extend_from_slice(&word.to_le_bytes());
    }
    for v in &map.data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    sink.write_all(&buf)?;
    Ok(())
}

/// Parses one MOSTFEAT v1 stream. The stream must end exactly at the end
/// of the payload.
pub fn read_feature_map<R: Read>(mut source: R) -> Result<FeatureMap, FeatureError> {
    let mut header = [0u8; HEADER_LEN];
    let got = read_up_to(&mut source, &mut header)?;
    if got < MAGIC.len() || &header[..MAGIC.len()] != MAGIC {
        return Err(FeatureError::BadMagic);
    }
    if got < HEADER_LEN {
        return Err(FeatureError::Truncated { expected: HEADER_LEN as u64, actual: got as u64 });
    }
    let mut words = [0u32; 7];
    for (i, w) in words.iter_mut().enumerate() {
        let at = MAGIC.len() + 4 * i;
        *w = u32::from_le_bytes(header[at..at + 4].try_into().expect("4-byte slice"));
    }
    let [version, grid_h, grid_w, dim, patch, img_h, img_w] = words;
    if version != VERSION {
        return Err(FeatureError::UnsupportedVersion(version));
    }

    let payload_len = (grid_h as u64)
        .checked_mul(grid_w as u64)
        .and_then(|v| v.checked_mul(dim as u64))
        .and_then(|v| v.checked_mul(4))
        .ok_or(FeatureError::Oversized)?;
    if payload_len > isize::MAX as u64 {
        return Err(FeatureError::Oversized);
    }
    let mut payload = Vec::new();
    (&mut source).take(payload_len).read_to_end(&mut payload)?;
    if (payload.len() as u64) < payload_len {
        return Err(FeatureError::Truncated {
            expected: HEADER_LEN as u64 + payload_len,
            actual: HEADER_LEN as u64 + payload.len() as u64,
        });
    }
    let mut probe = [0u8; 1];
    if read_up_to(&mut source, &mut probe)? != 0 {
        return Err(FeatureError::TrailingData);
    }

    let data: Vec<f32> = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().expect("4-byte chunk")))
        .collect();
    if dim > 0 {
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(FeatureError::NonFinite { token: pos / dim as usize });
        }
    }
    FeatureMap::new(grid_h, grid_w, dim, patch, img_h, img_w, data)
}

fn read_up_to<R: Read>(source: &mut R, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match source.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tiny() -> FeatureMap {
        FeatureMap::new(1, 1, 1, 1, 1, 1, vec![0.5]).unwrap()
    }

    #[test]
    fn smallest_map_layout() {
        let bytes = tiny().to_bytes().unwrap();
        // 8-byte magic + 7 header words + one f32
        assert_eq!(bytes.len(), 8 + 7 * 4 + 4);
        assert_eq!(&bytes[..8], b"MOSTFEAT");
        assert_eq!(&bytes[8..12], &1u32.to_le_bytes());
        assert_eq!(&bytes[36..], &0.5f32.to_le_bytes());
    }

    #[test]
    fn voc_sized_grid() {
        let map = FeatureMap::new(14, 14, 2, 16, 224, 224, vec![1.0; 14 * 14 * 2]).unwrap();
        assert_eq!(map.n_tokens(), 196);
        let back = FeatureMap::from_bytes(&map.to_bytes().unwrap()).unwrap();
        assert_eq!(back.n_tokens(), 196);
    }

    #[test]
    fn corrupted_magic() {
        let mut bytes = tiny().to_bytes().unwrap();
        bytes[0] = b'X';
        let err = FeatureMap::from_bytes(&bytes).unwrap_err();
        assert_eq!(err.to_string(), "bad magic");
        assert_eq!(err.code(), "bad_magic");
        assert!(matches!(FeatureMap::from_bytes(b"MOST"), Err(FeatureError::BadMagic)));
    }

    #[test]
    fn payload_one_value_short() {
        let map = FeatureMap::new(2, 2, 3, 1, 2, 2, vec![0.25; 12]).unwrap();
        let bytes = map.to_bytes().unwrap();
        let err = FeatureMap::from_bytes(&bytes[..bytes.len() - 4]).unwrap_err();
        assert!(err.to_string().starts_with("truncated"), "{err}");
        assert_eq!(err.code(), "truncated");
    }

    #[test]
    fn header_cut_short_is_truncated() {
        let bytes = tiny().to_bytes().unwrap();
        let err = FeatureMap::from_bytes(&bytes[..20]).unwrap_err();
        assert_eq!(err.code(), "truncated");
    }

    #[test]
    fn distinct_error_codes() {
        let good = tiny().to_bytes().unwrap();

        let mut v2 = good.clone();
        v2[8..12].copy_from_slice(&2u32.to_le_bytes());
        assert_eq!(FeatureMap::from_bytes(&v2).unwrap_err().code(), "bad_version");

        let mut nan = good.clone();
        nan[36..40].copy_from_slice(&f32::NAN.to_le_bytes());
        let err = FeatureMap::from_bytes(&nan).unwrap_err();
        assert_eq!(err.code(), "non_finite");
        assert_eq!(err.to_string(), "non-finite value at token 0");

        let mut long = good.clone();
        long.push(0);
        assert_eq!(FeatureMap::from_bytes(&long).unwrap_err().code(), "size_mismatch");

        // patch = 0 parses but fails validation
        let mut zero_patch = good;
        zero_patch[24..28].copy_from_slice(&0u32.to_le_bytes());
        assert_eq!(FeatureMap::from_bytes(&zero_patch).unwrap_err().code(), "invalid");
    }

    #[test]
    fn huge_header_is_rejected_without_allocating() {
        let mut bytes = tiny().to_bytes().unwrap();
        for at in [12, 16, 20] {
            bytes[at..at + 4].copy_from_slice(&u32::MAX.to_le_bytes());
        }
        let err = FeatureMap::from_bytes(&bytes).unwrap_err();
        assert!(matches!(err.code(), "size_mismatch" | "truncated"), "{err}");
    }

    #[test]
    fn validate_reports_each_violation() {
        assert!(validate(&tiny()).is_empty());

        let mut nan = FeatureMap::new(1, 3, 2, 1, 1, 3, vec![0.0; 6]).unwrap();
        nan.data[3] = f32::NAN;
        let v = validate(&nan);
        assert_eq!(v, vec![Violation::NonFinite { token: 1 }]);
        assert_eq!(v[0].to_string(), "non-finite value at token 1");

        let zero_patch = FeatureMap { patch: 0, ..tiny() };
        let v = validate(&zero_patch);
        assert_eq!(v, vec![Violation::ZeroPatch]);
        assert_eq!(v[0].to_string(), "patch must be ≥ 1");
    }

    #[test]
    fn coverage_slack_is_one_patch() {
        // 225 px at P=16 needs 15 tokens after padding; 14 leaves 1 px uncovered
        // which is still within one patch of slack.
        assert!(covers(14, 16, 225));
        assert!(covers(15, 16, 225));
        assert!(covers(14, 16, 209));
        assert!(!covers(14, 16, 208 + 32));
        assert!(!covers(16, 16, 224));
        assert!(covers(15, 16, 224));
    }

    #[test]
    fn writer_rejects_invalid_before_writing() {
        let bad = FeatureMap { data: vec![], ..tiny() };
        let mut sink = Vec::new();
        assert!(write_feature_map(&bad, &mut sink).is_err());
        assert!(sink.is_empty());
    }

    fn arb_map() -> impl Strategy<Value = FeatureMap> {
        (1u32..6, 1u32..6, 1u32..5, 1u32..17).prop_flat_map(|(h, w, d, p)| {
            let n = (h * w * d) as usize;
            (
                Just((h, w, d, p)),
                proptest::collection::vec(-1e6f32..1e6f32, n),
                0..p,
                0..p,
            )
                .prop_map(|((h, w, d, p), data, dh, dw)| FeatureMap {
                    grid_h: h,
                    grid_w: w,
                    dim: d,
                    patch: p,
                    img_h: h * p - dh,
                    img_w: w * p - dw,
                    data,
                })
        })
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(map in arb_map()) {
            let bytes = map.to_bytes().unwrap();
            let back = FeatureMap::from_bytes(&bytes).unwrap();
            prop_assert_eq!(
                back.data.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                map.data.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
            );
            prop_assert_eq!(back.to_bytes().unwrap(), bytes);
        }
    }
}
