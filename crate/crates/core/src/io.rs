//! File formats shared with external producers: PMAP float rasters and
//! `cameras.json` view records.

use std::fs;
use std::path::{Path, PathBuf};

use image::RgbImage;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::{CameraError, CameraExtrinsics, CameraIntrinsics, CameraModel};
use crate::pointmap::PointMap;

pub const PMAP_MAGIC: [u8; 4] = *b"PMAP";
pub const PMAP_VERSION: u32 = 1;
const HEADER_LEN: usize = 20;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {reason}")]
    Malformed { path: PathBuf, reason: String },
    #[error("{path}: {source}")]
    Image { path: PathBuf, source: image::ImageError },
}

impl IoError {
    pub fn path(&self) -> &Path {
        match self {
            IoError::Io { path, .. } | IoError::Malformed { path, .. } | IoError::Image { path, .. } => path,
        }
    }

    /// True for errors caused by file contents rather than the environment.
    pub fn is_malformed(&self) -> bool {
        match self {
            IoError::Malformed { .. } => true,
            IoError::Io { source, .. } => source.kind() == std::io::ErrorKind::NotFound,
            IoError::Image { source, .. } => !matches!(source, image::ImageError::IoError(_)),
        }
    }

    fn malformed(path: &Path, reason: impl Into<String>) -> Self {
        IoError::Malformed { path: path.to_path_buf(), reason: reason.into() }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PmapError {
    #[error("bad magic bytes")]
    BadMagic,
    #[error("unsupported version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("{0} trailing bytes after payload")]
    TrailingBytes(usize),
    #[error("expected {expected} channels, found {found}")]
    ChannelMismatch { expected: u32, found: u32 },
    #[error("payload length {len} does not match {width}x{height}x{channels}")]
    LengthMismatch { len: usize, width: u32, height: u32, channels: u32 },
}

/// Row-major, channel-interleaved `f32` raster.
#[derive(Debug, Clone, PartialEq)]
pub struct Pmap {
    pub width: u32,
    pub height: u32,
    pub channels: u32,
    pub data: Vec<f32>,
}

impl Pmap {
    pub fn new(width: u32, height: u32, channels: u32, data: Vec<f32>) -> Result<Self, PmapError> {
        let expected = width as usize * height as usize * channels as usize;
        if data.len() != expected {
            return Err(PmapError::LengthMismatch { len: data.len(), width, height, channels });
        }
        Ok(Self { width, height, channels, data })
    }

    pub fn from_point_map(pm: &PointMap) -> Self {
        let data = pm.points().iter().flat_map(|p| p.map(|v| v as f32)).collect();
        Self { width: pm.width(), height: pm.height(), channels: 3, data }
    }

    /// Single-channel raster; non-finite values are stored as NaN.
    pub fn from_scalars(width: u32, height: u32, values: &[f64]) -> Result<Self, PmapError> {
        let data = values.iter().map(|&v| if v.is_finite() { v as f32 } else { f32::NAN }).collect();
        Self::new(width, height, 1, data)
    }

    pub fn to_point_map(&self) -> Result<PointMap, PmapError> {
        if self.channels != 3 {
            return Err(PmapError::ChannelMismatch { expected: 3, found: self.channels });
        }
        let pts = self.data.chunks_exact(3).map(|c| [c[0] as f64, c[1] as f64, c[2] as f64]).collect();
        Ok(PointMap::from_points(self.width, self.height, pts))
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.data.len());
        out.extend_from_slice(&PMAP_MAGIC);
        for v in [PMAP_VERSION, self.width, self.height, self.channels] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, PmapError> {
        if bytes.len() < 4 || bytes[..4] != PMAP_MAGIC {
            return Err(if bytes.len() < 4 {
                PmapError::Truncated { expected: HEADER_LEN, found: bytes.len() }
            } else {
                PmapError::BadMagic
            });
        }
        if bytes.len() < HEADER_LEN {
            return Err(PmapError::Truncated { expected: HEADER_LEN, found: bytes.len() });
        }
        let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().expect("4 bytes"));
        let (version, width, height, channels) = (word(0), word(1), word(2), word(3));
        if version != PMAP_VERSION {
            return Err(PmapError::UnsupportedVersion(version));
        }
        let count = width as usize * height as usize * channels as usize;
        let expected = HEADER_LEN + 4 * count;
        match bytes.len().cmp(&expected) {
            std::cmp::Ordering::Less => return Err(PmapError::Truncated { expected, found: bytes.len() }),
            std::cmp::Ordering::Greater => return Err(PmapError::TrailingBytes(bytes.len() - expected)),
            std::cmp::Ordering::Equal => {}
        }
        let data =
            bytes[HEADER_LEN..].chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
        Ok(Self { width, height, channels, data })
    }
}

pub fn read_pmap(path: &Path) -> Result<Pmap, IoError> {
    let bytes = fs::read(path).map_err(|source| IoError::Io { path: path.to_path_buf(), source })?;
    Pmap::decode(&bytes).map_err(|e| IoError::malformed(path, e.to_string()))
}

pub fn write_pmap(path: &Path, pmap: &Pmap) -> Result<(), IoError> {
    fs::write(path, pmap.encode()).map_err(|source| IoError::Io { path: path.to_path_buf(), source })
}

pub fn read_point_map(path: &Path) -> Result<PointMap, IoError> {
    read_pmap(path)?.to_point_map().map_err(|e| IoError::malformed(path, e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtrinsicsRecord {
    #[serde(rename = "R")]
    pub r: [f64; 9],
    pub t: [f64; 3],
}

/// One entry of `cameras.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewRecord {
    pub image: String,
    pub width: u32,
    pub height: u32,
    pub intrinsics: CameraIntrinsics,
    pub extrinsics: ExtrinsicsRecord,
}

impl ViewRecord {
    pub fn from_camera(image: impl Into<String>, cam: &CameraModel) -> Self {
        Self {
            image: image.into(),
            width: cam.width,
            height: cam.height,
            intrinsics: cam.intrinsics,
            extrinsics: ExtrinsicsRecord {
                r: cam.extrinsics.rotation_row_major(),
                t: cam.extrinsics.translation_array(),
            },
        }
    }

    pub fn to_camera(&self) -> Result<CameraModel, CameraError> {
        let ext = CameraExtrinsics::from_arrays(&self.extrinsics.r, &self.extrinsics.t)?;
        CameraModel::new(self.intrinsics, ext, self.width, self.height)
    }
}

pub fn read_cameras(path: &Path) -> Result<Vec<ViewRecord>, IoError> {
    let text = fs::read_to_string(path).map_err(|source| IoError::Io { path: path.to_path_buf(), source })?;
    serde_json::from_str(&text).map_err(|e| IoError::malformed(path, e.to_string()))
}

/// Reads and validates every camera in a `cameras.json`.
pub fn read_camera_models(path: &Path) -> Result<Vec<(ViewRecord, CameraModel)>, IoError> {
    read_cameras(path)?
        .into_iter()
        .map(|r| {
            let cam = r.to_camera().map_err(|e| IoError::malformed(path, format!("view {}: {e}", r.image)))?;
            Ok((r, cam))
        })
        .collect()
}

pub fn write_cameras(path: &Path, views: &[ViewRecord]) -> Result<(), IoError> {
    let text = serde_json::to_string_pretty(views).expect("view records serialize");
    fs::write(path, text).map_err(|source| IoError::Io { path: path.to_path_buf(), source })
}

pub fn read_rgb(path: &Path) -> Result<RgbImage, IoError> {
    if !path.exists() {
        return Err(IoError::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"),
        });
    }
    Ok(image::open(path).map_err(|source| IoError::Image { path: path.to_path_buf(), source })?.to_rgb8())
}

pub fn write_png<P, C>(path: &Path, img: &image::ImageBuffer<P, C>) -> Result<(), IoError>
where
    P: image::PixelWithColorType,
    [P::Subpixel]: image::EncodableLayout,
    C: std::ops::Deref<Target = [P::Subpixel]>,
{
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|source| IoError::Image { path: path.to_path_buf(), source })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    #[test]
    fn pmap_round_trip_is_bit_exact() {
        let data = vec![1.5f32, -0.0, f32::NAN, f32::MAX, f32::MIN_POSITIVE, 3.25];
        let p = Pmap::new(2, 1, 3, data.clone()).unwrap();
        let back = Pmap::decode(&p.encode()).unwrap();
        assert_eq!((back.width, back.height, back.channels), (2, 1, 3));
        let bits = |d: &[f32]| d.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back.data), bits(&data));
    }

    #[test]
    fn pmap_header_layout() {
        let bytes = Pmap::new(3, 2, 1, vec![0.0; 6]).unwrap().encode();
        assert_eq!(&bytes[..4], &[0x50, 0x4D, 0x41, 0x50]);
        assert_eq!(&bytes[4..8], &1u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &3u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &2u32.to_le_bytes());
        assert_eq!(&bytes[16..20], &1u32.to_le_bytes());
        assert_eq!(bytes.len(), 20 + 24);
    }

    #[test]
    fn pmap_rejects_bad_input() {
        let good = Pmap::new(2, 2, 1, vec![1.0; 4]).unwrap().encode();
        assert!(matches!(Pmap::decode(&good[..good.len() - 1]), Err(PmapError::Truncated { .. })));
        assert!(matches!(Pmap::decode(&good[..10]), Err(PmapError::Truncated { .. })));
        let mut bad = good.clone();
        bad[0] = b'X';
        assert_eq!(Pmap::decode(&bad), Err(PmapError::BadMagic));
        let mut v2 = good.clone();
        v2[4] = 2;
        assert_eq!(Pmap::decode(&v2), Err(PmapError::UnsupportedVersion(2)));
        let mut long = good;
        long.push(0);
        assert_eq!(Pmap::decode(&long), Err(PmapError::TrailingBytes(1)));
    }

    #[test]
    fn point_map_conversion_keeps_invalid_entries() {
        let mut pm = PointMap::new_invalid(2, 2);
        pm.set(1, 0, Some(Vector3::new(0.5, -1.0, 4.0)));
        let back = Pmap::from_point_map(&pm).to_point_map().unwrap();
        assert_eq!(back.valid_count(), 1);
        assert_eq!(back.get(1, 0), pm.get(1, 0));
        assert_eq!(back.get(0, 0), None);
        assert!(Pmap::from_scalars(2, 2, &[1.0; 4]).unwrap().to_point_map().is_err());
    }

    #[test]
    fn cameras_json_round_trip_and_default_skew() {
        let text = r#"[{"image":"a.png","width":4,"height":3,
            "intrinsics":{"fx":2.0,"fy":2.0,"cx":1.5,"cy":1.0},
            "extrinsics":{"R":[1,0,0,0,1,0,0,0,1],"t":[0.1,0.2,0.3]}}]"#;
        let recs: Vec<ViewRecord> = serde_json::from_str(text).unwrap();
        assert_eq!(recs[0].intrinsics.skew, 0.0);
        let cam = recs[0].to_camera().unwrap();
        let again = ViewRecord::from_camera("a.png", &cam);
        assert_eq!(again, recs[0]);
        let json = serde_json::to_string(&again).unwrap();
        assert!(json.contains("\"R\""));
    }

    #[test]
    fn missing_field_is_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cameras.json");
        fs::write(&p, r#"[{"image":"a.png","width":4}]"#).unwrap();
        let err = read_cameras(&p).unwrap_err();
        assert!(err.is_malformed());
        assert_eq!(err.path(), p);
        let missing = read_pmap(&dir.path().join("nope.pmap")).unwrap_err();
        assert!(missing.is_malformed() && missing.to_string().contains("nope.pmap"));
    }
}
