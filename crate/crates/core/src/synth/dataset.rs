use std::fs;
use std::path::Path;

use image::RgbImage;
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scene::SceneSpec;
use super::texture::hash3;
use super::SynthError;
use crate::camera::{axis_angle, CameraExtrinsics, CameraIntrinsics, CameraModel};
use crate::io::{write_cameras, write_pmap, write_png, IoError, Pmap, ViewRecord};
use crate::parallax::median_depth;
use crate::pointmap::PointMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParallaxMode {
    PureRotation,
    Slight,
    VeryLarge,
}

impl ParallaxMode {
    pub const ALL: [ParallaxMode; 3] = [ParallaxMode::PureRotation, ParallaxMode::Slight, ParallaxMode::VeryLarge];
}

/// Target baseline as a fraction of the reference median depth.
pub const SLIGHT_RATIO: (f64, f64) = (0.05, 0.15);
pub const VERY_LARGE_RATIO: (f64, f64) = (0.30, 0.50);
pub const MAX_ROTATION_DEG: f64 = 20.0;
pub const MIN_OVERLAP: f64 = 0.30;
const MAX_ATTEMPTS: usize = 16;

#[derive(Debug, Clone)]
pub struct ViewData {
    pub image: RgbImage,
    pub camera: CameraModel,
    pub point_map: PointMap,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParallaxMeta {
    pub mode: ParallaxMode,
    pub baseline: f64,
    pub median_depth: f64,
}

#[derive(Debug, Clone)]
pub struct DatasetItem {
    pub reference: ViewData,
    pub target: ViewData,
    pub gt_image: RgbImage,
    pub gt_camera: CameraModel,
    pub meta: ParallaxMeta,
}

/// Identity pose at the origin, `f = 0.9·width`, principal point at the
/// image centre.
pub fn base_camera(width: u32, height: u32) -> Result<CameraModel, SynthError> {
    let f = 0.9 * width as f64;
    let k = CameraIntrinsics::new(f, f, (width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0)?;
    Ok(CameraModel::new(k, CameraExtrinsics::identity(), width, height)?)
}

/// Same pose and focal length over twice the width and height, so that the
/// original frame is the centre crop.
pub fn wide_camera(base: &CameraModel) -> Result<CameraModel, SynthError> {
    let (w, h) = (base.width * 2, base.height * 2);
    let (dx, dy) = ((w - base.width) / 2, (h - base.height) / 2);
    let k = base.intrinsics;
    let wide = CameraIntrinsics::with_skew(k.fx, k.fy, k.cx + dx as f64, k.cy + dy as f64, k.skew)?;
    Ok(CameraModel::new(wide, base.extrinsics, w, h)?)
}

fn unit_vector(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(StandardNormal.sample(rng), StandardNormal.sample(rng), StandardNormal.sample(rng));
        if v.norm() > 1e-6 {
            return v.normalize();
        }
    }
}

/// Mostly sideways direction in the camera frame.
fn lateral(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    let phi = rng.random_range(0.0..std::f64::consts::TAU);
    Vector3::new(phi.cos(), 0.4 * phi.sin(), rng.random_range(-0.2..0.2)).normalize()
}

/// Fraction of valid reference points that project inside `cam`.
pub fn overlap_fraction(points: &PointMap, cam: &CameraModel) -> f64 {
    let n = points.valid_count();
    if n == 0 {
        return 0.0;
    }
    let seen = points
        .valid_points()
        .filter(|(_, p)| cam.project_world(p).is_some_and(|(u, v, _)| cam.contains_pixel(u, v)))
        .count();
    seen as f64 / n as f64
}

fn propose(
    base: &CameraModel,
    mode: ParallaxMode,
    depth: f64,
    centroid: &Vector3<f64>,
    rng: &mut ChaCha8Rng,
) -> Result<CameraExtrinsics, SynthError> {
    let r1 = *base.extrinsics.rotation();
    let c1 = base.extrinsics.center();
    let ext = match mode {
        ParallaxMode::PureRotation => {
            let angle = rng.random_range(2.0..MAX_ROTATION_DEG).to_radians();
            let r = axis_angle(&unit_vector(rng), angle);
            CameraExtrinsics::new(r * r1, r * base.extrinsics.translation())?
        }
        ParallaxMode::Slight => {
            let ratio = rng.random_range(SLIGHT_RATIO.0..SLIGHT_RATIO.1);
            let dir = r1.transpose() * lateral(rng);
            let r = axis_angle(&unit_vector(rng), rng.random_range(0.0..5.0f64).to_radians());
            CameraExtrinsics::from_center((r * r1).transpose(), c1 + dir * (ratio * depth))?
        }
        ParallaxMode::VeryLarge => {
            let ratio = rng.random_range(VERY_LARGE_RATIO.0..VERY_LARGE_RATIO.1);
            let dir = r1.transpose() * lateral(rng);
            let down = r1.transpose() * Vector3::y();
            CameraExtrinsics::look_at(c1 + dir * (ratio * depth), *centroid, down)?
        }
    };
    Ok(ext)
}

/// Reference view from `base`, a target view whose pose realizes `mode`,
/// and the wide ground-truth rendering. Deterministic per seed.
pub fn generate_pair(
    scene: &SceneSpec,
    base: &CameraModel,
    mode: ParallaxMode,
    seed: u64,
) -> Result<DatasetItem, SynthError> {
    let reference = scene.render(base);
    let depth = median_depth(&base.extrinsics, &reference.point_map).ok_or(SynthError::SceneNotVisible)?;
    if !(depth > 0.0) {
        return Err(SynthError::SceneNotVisible);
    }
    let n = reference.point_map.valid_count() as f64;
    let centroid = reference.point_map.valid_points().fold(Vector3::zeros(), |acc, (_, p)| acc + p) / n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = None;
    for _ in 0..MAX_ATTEMPTS {
        let ext = propose(base, mode, depth, &centroid, &mut rng)?;
        let cam = CameraModel::new(base.intrinsics, ext, base.width, base.height)?;
        if overlap_fraction(&reference.point_map, &cam) >= MIN_OVERLAP {
            chosen = Some(cam);
            break;
        }
    }
    let target_cam = chosen.ok_or(SynthError::InsufficientOverlap { attempts: MAX_ATTEMPTS })?;
    let target = scene.render(&target_cam);
    let gt_camera = wide_camera(base)?;
    let gt = scene.render(&gt_camera);
    let baseline = (target_cam.extrinsics.center() - base.extrinsics.center()).norm();
    Ok(DatasetItem {
        reference: ViewData { image: reference.image, camera: *base, point_map: reference.point_map },
        target: ViewData { image: target.image, camera: target_cam, point_map: target.point_map },
        gt_image: gt.image,
        gt_camera,
        meta: ParallaxMeta { mode, baseline, median_depth: depth },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub scenes: usize,
    pub per_scene: usize,
    /// Modes assigned to the items of each scene in rotation.
    pub mix: Vec<ParallaxMode>,
    pub width: u32,
    pub height: u32,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { scenes: 2, per_scene: 3, mix: ParallaxMode::ALL.to_vec(), width: 256, height: 256, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct GeneratedItem {
    pub scene: String,
    pub item: String,
    pub data: DatasetItem,
}

impl GeneratedItem {
    pub fn id(&self) -> String {
        format!("{}/{}", self.scene, self.item)
    }
}

/// Items in `(scene, item)` order; independent of the thread count.
pub fn generate_dataset(config: &SynthConfig) -> Result<Vec<GeneratedItem>, SynthError> {
    if config.scenes == 0 || config.per_scene == 0 || config.mix.is_empty() {
        return Err(SynthError::EmptyDataset);
    }
    let base = base_camera(config.width, config.height)?;
    let jobs: Vec<(usize, usize)> =
        (0..config.scenes).flat_map(|s| (0..config.per_scene).map(move |i| (s, i))).collect();
    jobs.into_par_iter()
        .map(|(s, i)| {
            let scene = SceneSpec::random(hash3(config.seed, s as i64, -1));
            let mode = config.mix[i % config.mix.len()];
            let data = generate_pair(&scene, &base, mode, hash3(config.seed, s as i64, i as i64))?;
            Ok(GeneratedItem { scene: format!("scene_{s:03}"), item: format!("item_{i:03}"), data })
        })
        .collect()
}

pub const REF_IMAGE: &str = "ref.png";
pub const TGT_IMAGE: &str = "tgt.png";
pub const GT_IMAGE: &str = "gt.png";
pub const REF_PMAP: &str = "ref.pmap";
pub const TGT_PMAP: &str = "tgt.pmap";
pub const CAMERAS: &str = "cameras.json";
pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemFiles {
    pub reference: String,
    pub target: String,
    pub gt: String,
    pub reference_pmap: String,
    pub target_pmap: String,
    pub cameras: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestItem {
    pub id: String,
    pub scene: String,
    pub files: ItemFiles,
    pub parallax_meta: ParallaxMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: SynthConfig,
    pub items: Vec<ManifestItem>,
}

/// Writes `<root>/<scene>/<item>/{ref.png, tgt.png, gt.png, ref.pmap,
/// tgt.pmap, cameras.json}` and `<root>/manifest.json` with paths relative
/// to `root`.
pub fn write_dataset(root: &Path, config: &SynthConfig, items: &[GeneratedItem]) -> Result<Manifest, IoError> {
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| IoError::Io { path, source }
    };
    let mut entries = Vec::with_capacity(items.len());
    for it in items {
        let id = it.id();
        let dir = root.join(&it.scene).join(&it.item);
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let d = &it.data;
        write_png(&dir.join(REF_IMAGE), &d.reference.image)?;
        write_png(&dir.join(TGT_IMAGE), &d.target.image)?;
        write_png(&dir.join(GT_IMAGE), &d.gt_image)?;
        write_pmap(&dir.join(REF_PMAP), &Pmap::from_point_map(&d.reference.point_map))?;
        write_pmap(&dir.join(TGT_PMAP), &Pmap::from_point_map(&d.target.point_map))?;
        write_cameras(
            &dir.join(CAMERAS),
            &[
                ViewRecord::from_camera(REF_IMAGE, &d.reference.camera),
                ViewRecord::from_camera(TGT_IMAGE, &d.target.camera),
            ],
        )?;
        let rel = |f: &str| format!("{id}/{f}");
        entries.push(ManifestItem {
            id: id.clone(),
            scene: it.scene.clone(),
            files: ItemFiles {
                reference: rel(REF_IMAGE),
                target: rel(TGT_IMAGE),
                gt: rel(GT_IMAGE),
                reference_pmap: rel(REF_PMAP),
                target_pmap: rel(TGT_PMAP),
                cameras: rel(CAMERAS),
            },
            parallax_meta: d.meta,
        });
    }
    entries.sort_by(|a, b| a.id.cmp(&b.id));
    let manifest = Manifest { config: config.clone(), items: entries };
    let path = root.join(MANIFEST);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text).map_err(io_err(&path))?;
    Ok(manifest)
}
