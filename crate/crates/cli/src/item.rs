//! Loading of item directories and dataset manifests.

use std::fs;
use std::path::{Path, PathBuf};

use image::RgbImage;
use reprostitch::io::{read_camera_models, read_point_map, read_rgb};
use reprostitch::synth::{Manifest, MANIFEST};
use reprostitch::{CameraModel, Mask, View};

use crate::error::CliError;

pub const CAMERAS: &str = "cameras.json";

/// Views of one item, in `cameras.json` order. Each view's point map is
/// the image path with a `.pmap` extension.
pub fn load_item(dir: &Path) -> Result<(Vec<View>, Vec<CameraModel>), CliError> {
    let cameras_path = dir.join(CAMERAS);
    let records = read_camera_models(&cameras_path)?;
    if records.is_empty() {
        return Err(CliError::malformed(&cameras_path, "no views"));
    }
    let mut views = Vec::with_capacity(records.len());
    let mut cams = Vec::with_capacity(records.len());
    for (rec, cam) in records {
        let image_path = dir.join(&rec.image);
        let pmap_path = image_path.with_extension("pmap");
        let image = read_rgb(&image_path)?;
        let point_map = read_point_map(&pmap_path)?;
        if image.dimensions() != (cam.width, cam.height) {
            return Err(CliError::malformed(
                &image_path,
                format!("image is {:?}, cameras.json says {}x{}", image.dimensions(), cam.width, cam.height),
            ));
        }
        if point_map.dimensions() != image.dimensions() {
            return Err(CliError::malformed(
                &pmap_path,
                format!("point map is {:?}, image is {:?}", point_map.dimensions(), image.dimensions()),
            ));
        }
        views.push(View { point_map, image });
        cams.push(cam);
    }
    Ok((views, cams))
}

pub fn is_dataset(dir: &Path) -> bool {
    dir.join(MANIFEST).is_file()
}

pub fn read_manifest(root: &Path) -> Result<Manifest, CliError> {
    let path = root.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| CliError::malformed(&path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| CliError::malformed(&path, e))?;
    if manifest.items.is_empty() {
        return Err(CliError::malformed(&path, "manifest lists no items"));
    }
    Ok(manifest)
}

/// Directory of a manifest item, the parent of its `cameras.json`.
pub fn item_dir(root: &Path, cameras: &str) -> PathBuf {
    let p = root.join(cameras);
    p.parent().map(Path::to_path_buf).unwrap_or_else(|| root.to_path_buf())
}

/// Hole mask stored as an 8-bit PNG; all-valid when the file is absent.
pub fn read_holes(path: &Path, image: &RgbImage) -> Result<Mask, CliError> {
    if !path.exists() {
        return Ok(Mask::new(image.width(), image.height(), false));
    }
    let gray = image::open(path).map_err(|e| CliError::malformed(path, e))?.to_luma8();
    if gray.dimensions() != image.dimensions() {
        return Err(CliError::malformed(
            path,
            format!("hole mask is {:?}, stitched image is {:?}", gray.dimensions(), image.dimensions()),
        ));
    }
    Ok(Mask::from_gray(&gray))
}
