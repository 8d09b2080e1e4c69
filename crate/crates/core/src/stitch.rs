//! Reprojection stitching: fuse per-view point maps into one colored cloud,
//! project it into a reference camera, translate the projected coordinates
//! onto a non-negative canvas and resolve collisions with a z-buffer.

use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::{project_pinhole, world_to_camera, CameraModel};
use crate::pointmap::{ColoredCloud, PointMap, Provenance};
use crate::raster::Mask;

/// Projected coordinates within this distance of an integer are snapped to it
/// before the canvas bounds are computed, so that exact self-projections do
/// not grow the canvas by a pixel because of round-off.
pub const SNAP_EPS: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StitchError {
    #[error("no input views")]
    NoViews,
    #[error("view {view}: point map is {pm_width}x{pm_height} but image is {img_width}x{img_height}")]
    DimensionMismatch { view: usize, pm_width: u32, pm_height: u32, img_width: u32, img_height: u32 },
    #[error("{views} views but {cameras} cameras")]
    CameraCountMismatch { views: usize, cameras: usize },
    #[error("reference view {reference} out of range ({count} views)")]
    ReferenceOutOfRange { reference: usize, count: usize },
    #[error("fused cloud is empty")]
    EmptyCloud,
    #[error("empty projection: all {behind_camera} points are behind the camera")]
    EmptyProjection { behind_camera: usize },
    #[error("no samples to place on a canvas")]
    EmptySamples,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct StitchConfig {
    /// Hard cap on canvas width and height.
    pub max_dim: u32,
    pub hole_color: [u8; 3],
    /// Fill holes from their 3x3 neighbourhood after splatting.
    pub dilate_holes: bool,
}

impl Default for StitchConfig {
    fn default() -> Self {
        Self { max_dim: 8192, hole_color: [0, 0, 0], dilate_holes: false }
    }
}

/// One input view: an RGB image with its aligned point map.
#[derive(Debug, Clone, PartialEq)]
pub struct View {
    pub point_map: PointMap,
    pub image: RgbImage,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProjectedSamples {
    pub coords: Vec<(f64, f64)>,
    pub depths: Vec<f64>,
    pub colors: Vec<[u8; 3]>,
    pub source: Vec<Provenance>,
    pub behind_camera: usize,
}

impl ProjectedSamples {
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn push(&mut self, uv: (f64, f64), depth: f64, color: [u8; 3], source: Provenance) {
        self.coords.push(uv);
        self.depths.push(depth);
        self.colors.push(color);
        self.source.push(source);
    }
}

/// Placement of projected coordinates on the output raster: camera pixel
/// `(u, v)` lands on canvas pixel `(round(u + du), round(v + dv))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StitchCanvas {
    pub offset: (i64, i64),
    pub width: u32,
    pub height: u32,
    pub max_dim: u32,
    /// Samples falling beyond the clamped canvas.
    pub dropped_samples: usize,
}

impl StitchCanvas {
    /// Canvas pixel for camera coordinates, if it lies on the canvas.
    #[inline]
    pub fn pixel_of(&self, u: f64, v: f64) -> Option<(u32, u32)> {
        let x = (u + self.offset.0 as f64).round();
        let y = (v + self.offset.1 as f64).round();
        (x >= 0.0 && y >= 0.0 && x < self.width as f64 && y < self.height as f64).then_some((x as u32, y as u32))
    }

    /// Camera pixel coordinates of canvas pixel `(x, y)`.
    pub fn camera_coords(&self, x: f64, y: f64) -> (f64, f64) {
        (x - self.offset.0 as f64, y - self.offset.1 as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StitchResult {
    pub image: RgbImage,
    pub hole_mask: Mask,
    /// Nearest depth per canvas pixel, `+inf` at holes.
    pub depth_buffer: Vec<f64>,
    pub canvas: StitchCanvas,
    pub reference_view: usize,
    pub behind_camera: usize,
}

impl StitchResult {
    pub fn hole_fraction(&self) -> f64 {
        let n = self.hole_mask.as_slice().len();
        if n == 0 {
            return 0.0;
        }
        self.hole_mask.count() as f64 / n as f64
    }

    pub fn report(&self) -> StitchReport {
        StitchReport {
            canvas: CanvasReport { width: self.canvas.width, height: self.canvas.height, max_dim: self.canvas.max_dim },
            offset: [self.canvas.offset.0, self.canvas.offset.1],
            hole_fraction: self.hole_fraction(),
            dropped_samples: self.canvas.dropped_samples,
            behind_camera_count: self.behind_camera,
            reference_view: self.reference_view,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanvasReport {
    pub width: u32,
    pub height: u32,
    pub max_dim: u32,
}

/// JSON summary written next to a stitched image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StitchReport {
    pub canvas: CanvasReport,
    pub offset: [i64; 2],
    pub hole_fraction: f64,
    pub dropped_samples: usize,
    pub behind_camera_count: usize,
    pub reference_view: usize,
}

/// Concatenates the valid entries of every view's point map with the
/// colors of the matching image pixels.
pub fn fuse_pointclouds(views: &[View]) -> Result<ColoredCloud, StitchError> {
    if views.is_empty() {
        return Err(StitchError::NoViews);
    }
    for (i, v) in views.iter().enumerate() {
        if v.point_map.dimensions() != v.image.dimensions() {
            return Err(StitchError::DimensionMismatch {
                view: i,
                pm_width: v.point_map.width(),
                pm_height: v.point_map.height(),
                img_width: v.image.width(),
                img_height: v.image.height(),
            });
        }
    }
    let total: usize = views.iter().map(|v| v.point_map.valid_count()).sum();
    let mut cloud = ColoredCloud {
        positions: Vec::with_capacity(total),
        colors: Vec::with_capacity(total),
        source: Vec::with_capacity(total),
    };
    for (vi, v) in views.iter().enumerate() {
        let raw = v.image.as_raw();
        for (pixel, p) in v.point_map.valid_points() {
            let o = pixel as usize * 3;
            cloud.push(p, [raw[o], raw[o + 1], raw[o + 2]], Provenance { view: vi as u32, pixel });
        }
    }
    Ok(cloud)
}

pub fn reproject_cloud(cloud: &ColoredCloud, camera: &CameraModel) -> Result<ProjectedSamples, StitchError> {
    if cloud.is_empty() {
        return Err(StitchError::EmptyCloud);
    }
    let cam_points = world_to_camera(&cloud.positions, &camera.extrinsics);
    let proj = project_pinhole(&cam_points.points, &camera.intrinsics);
    if proj.pixels.is_empty() {
        return Err(StitchError::EmptyProjection { behind_camera: proj.behind_camera });
    }
    let mut out = ProjectedSamples {
        coords: Vec::with_capacity(proj.pixels.len()),
        depths: Vec::with_capacity(proj.pixels.len()),
        colors: Vec::with_capacity(proj.pixels.len()),
        source: Vec::with_capacity(proj.pixels.len()),
        behind_camera: proj.behind_camera,
    };
    for px in &proj.pixels {
        out.push((px.u, px.v), px.depth, cloud.colors[px.index], cloud.source[px.index]);
    }
    Ok(out)
}

#[inline]
fn snap(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() < SNAP_EPS {
        r
    } else {
        x
    }
}

/// Computes the translation that makes every coordinate non-negative and
/// the canvas size covering all samples, clamped to `max_dim`.
pub fn normalize_canvas(samples: &ProjectedSamples, max_dim: u32) -> Result<StitchCanvas, StitchError> {
    if samples.is_empty() {
        return Err(StitchError::EmptySamples);
    }
    let (mut min_u, mut min_v) = (f64::INFINITY, f64::INFINITY);
    let (mut max_u, mut max_v) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &(u, v) in &samples.coords {
        let (u, v) = (snap(u), snap(v));
        min_u = min_u.min(u);
        min_v = min_v.min(v);
        max_u = max_u.max(u);
        max_v = max_v.max(v);
    }
    let du = if min_u < 0.0 { -min_u.floor() } else { 0.0 };
    let dv = if min_v < 0.0 { -min_v.floor() } else { 0.0 };
    let extent = |max: f64, d: f64| -> u32 {
        let size = (snap(max + d)).ceil() + 1.0;
        if size >= max_dim as f64 {
            max_dim
        } else {
            size as u32
        }
    };
    let mut canvas = StitchCanvas {
        offset: (du as i64, dv as i64),
        width: extent(max_u, du),
        height: extent(max_v, dv),
        max_dim,
        dropped_samples: 0,
    };
    canvas.dropped_samples = samples.coords.iter().filter(|&&(u, v)| canvas.pixel_of(u, v).is_none()).count();
    Ok(canvas)
}

#[derive(Clone, Copy)]
struct Winner {
    depth: f64,
    source: Provenance,
    color: [u8; 3],
}

#[inline]
fn beats(depth: f64, source: Provenance, current: &Winner) -> bool {
    depth < current.depth || (depth == current.depth && source < current.source)
}

/// Nearest-depth z-buffer with single-pixel splats. Equal depths are broken
/// by provenance order, so the result does not depend on sample order.
pub fn splat_zbuffer(samples: &ProjectedSamples, canvas: &StitchCanvas, config: &StitchConfig) -> StitchResult {
    let (w, h) = (canvas.width as usize, canvas.height as usize);
    let empty = Winner {
        depth: f64::INFINITY,
        source: Provenance { view: u32::MAX, pixel: u32::MAX },
        color: config.hole_color,
    };
    let mut buf = vec![empty; w * h];
    for i in 0..samples.len() {
        let (u, v) = samples.coords[i];
        let Some((x, y)) = canvas.pixel_of(u, v) else { continue };
        let slot = &mut buf[y as usize * w + x as usize];
        if beats(samples.depths[i], samples.source[i], slot) {
            *slot = Winner { depth: samples.depths[i], source: samples.source[i], color: samples.colors[i] };
        }
    }
    if config.dilate_holes {
        buf = dilate(&buf, w, h);
    }
    let mut image = RgbImage::new(canvas.width, canvas.height);
    let mut hole_mask = Mask::new(canvas.width, canvas.height, false);
    let mut depth_buffer = Vec::with_capacity(w * h);
    for (i, win) in buf.iter().enumerate() {
        let (x, y) = ((i % w) as u32, (i / w) as u32);
        if win.depth.is_finite() {
            image.put_pixel(x, y, Rgb(win.color));
        } else {
            image.put_pixel(x, y, Rgb(config.hole_color));
            hole_mask.set(x, y, true);
        }
        depth_buffer.push(win.depth);
    }
    StitchResult {
        image,
        hole_mask,
        depth_buffer,
        canvas: *canvas,
        reference_view: 0,
        behind_camera: samples.behind_camera,
    }
}

fn dilate(buf: &[Winner], w: usize, h: usize) -> Vec<Winner> {
    let mut out = buf.to_vec();
    for y in 0..h {
        for x in 0..w {
            if buf[y * w + x].depth.is_finite() {
                continue;
            }
            let mut best = buf[y * w + x];
            for ny in y.saturating_sub(1)..(y + 2).min(h) {
                for nx in x.saturating_sub(1)..(x + 2).min(w) {
                    let n = &buf[ny * w + nx];
                    if n.depth.is_finite() && beats(n.depth, n.source, &best) {
                        best = *n;
                    }
                }
            }
            out[y * w + x] = best;
        }
    }
    out
}

/// Full pipeline: fuse all views, reproject into `cameras[reference]`,
/// place on a canvas and splat.
pub fn stitch(
    views: &[View],
    cameras: &[CameraModel],
    reference: usize,
    config: &StitchConfig,
) -> Result<StitchResult, StitchError> {
    if views.is_empty() {
        return Err(StitchError::NoViews);
    }
    if views.len() != cameras.len() {
        return Err(StitchError::CameraCountMismatch { views: views.len(), cameras: cameras.len() });
    }
    if reference >= views.len() {
        return Err(StitchError::ReferenceOutOfRange { reference, count: views.len() });
    }
    let cloud = fuse_pointclouds(views)?;
    let samples = reproject_cloud(&cloud, &cameras[reference])?;
    let canvas = normalize_canvas(&samples, config.max_dim)?;
    log::debug!(
        "stitch: {} samples, canvas {}x{} offset {:?}, {} dropped, {} behind camera",
        samples.len(),
        canvas.width,
        canvas.height,
        canvas.offset,
        canvas.dropped_samples,
        samples.behind_camera
    );
    let mut result = splat_zbuffer(&samples, &canvas, config);
    result.reference_view = reference;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::{CameraExtrinsics, CameraIntrinsics};
    use nalgebra::Vector3;

    fn samples(coords: &[(f64, f64)]) -> ProjectedSamples {
        let mut s = ProjectedSamples::default();
        for (i, &c) in coords.iter().enumerate() {
            s.push(c, 1.0, [1, 2, 3], Provenance { view: 0, pixel: i as u32 });
        }
        s
    }

    #[test]
    fn canvas_rule_example() {
        let c = normalize_canvas(&samples(&[(-10.2, -3.7), (40.0, 60.0)]), 8192).unwrap();
        assert_eq!(c.offset, (11, 4));
        assert_eq!((c.width, c.height), (52, 65));
        assert_eq!(c.dropped_samples, 0);
    }

    #[test]
    fn canvas_without_negative_coords_has_zero_offset() {
        let c = normalize_canvas(&samples(&[(0.0, 0.0), (9.0, 4.0), (3.3, 2.2)]), 8192).unwrap();
        assert_eq!(c.offset, (0, 0));
        assert_eq!((c.width, c.height), (10, 5));
    }

    #[test]
    fn canvas_is_clamped() {
        let c = normalize_canvas(&samples(&[(0.0, 0.0), (1000.0, 5.0), (5.0, 5.0)]), 100).unwrap();
        assert_eq!(c.width, 100);
        assert_eq!(c.dropped_samples, 1);
    }

    #[test]
    fn empty_samples_error() {
        assert_eq!(normalize_canvas(&ProjectedSamples::default(), 10), Err(StitchError::EmptySamples));
    }

    #[test]
    fn nearest_depth_wins() {
        let mut s = ProjectedSamples::default();
        s.push((1.0, 1.0), 3.0, [30, 30, 30], Provenance { view: 0, pixel: 0 });
        s.push((1.2, 0.9), 2.0, [20, 20, 20], Provenance { view: 1, pixel: 0 });
        let canvas = normalize_canvas(&s, 100).unwrap();
        let r = splat_zbuffer(&s, &canvas, &StitchConfig::default());
        assert_eq!(r.image.get_pixel(1, 1).0, [20, 20, 20]);
        assert_eq!(r.depth_buffer[(canvas.width + 1) as usize], 2.0);
    }

    #[test]
    fn equal_depth_tie_break_by_provenance() {
        let mut s = ProjectedSamples::default();
        s.push((0.0, 0.0), 2.0, [12, 12, 12], Provenance { view: 1, pixel: 2 });
        s.push((0.0, 0.0), 2.0, [5, 5, 5], Provenance { view: 0, pixel: 5 });
        let canvas = normalize_canvas(&s, 100).unwrap();
        let r = splat_zbuffer(&s, &canvas, &StitchConfig::default());
        assert_eq!(r.image.get_pixel(0, 0).0, [5, 5, 5]);
    }

    #[test]
    fn holes_are_infinite_and_masked() {
        let s = samples(&[(0.0, 0.0), (2.0, 0.0)]);
        let canvas = normalize_canvas(&s, 100).unwrap();
        let r = splat_zbuffer(&s, &canvas, &StitchConfig { hole_color: [9, 9, 9], ..Default::default() });
        assert!(r.hole_mask.get(1, 0));
        assert!(r.depth_buffer[1].is_infinite());
        assert_eq!(r.image.get_pixel(1, 0).0, [9, 9, 9]);
        assert!(!r.hole_mask.get(0, 0));
    }

    #[test]
    fn dilation_fills_single_pixel_gaps() {
        let s = samples(&[(0.0, 0.0), (2.0, 0.0)]);
        let canvas = normalize_canvas(&s, 100).unwrap();
        let r = splat_zbuffer(&s, &canvas, &StitchConfig { dilate_holes: true, ..Default::default() });
        assert_eq!(r.hole_mask.count(), 0);
        assert_eq!(r.image.get_pixel(1, 0).0, [1, 2, 3]);
    }

    fn single_pixel_view(p: [f64; 3]) -> View {
        View { point_map: PointMap::from_points(1, 1, vec![p]), image: RgbImage::from_pixel(1, 1, Rgb([200, 100, 50])) }
    }

    #[test]
    fn fuse_reports_dimension_mismatch() {
        let v = View { point_map: PointMap::new_invalid(2, 2), image: RgbImage::new(3, 2) };
        let ok = single_pixel_view([0.0, 0.0, 1.0]);
        assert!(matches!(fuse_pointclouds(&[ok, v]), Err(StitchError::DimensionMismatch { view: 1, .. })));
    }

    #[test]
    fn fuse_filters_invalid() {
        let nan = [f64::NAN; 3];
        let a = View {
            point_map: PointMap::from_points(2, 2, vec![[0.0, 0.0, 1.0], nan, [1.0, 0.0, 1.0], [0.0, 1.0, 1.0]]),
            image: RgbImage::new(2, 2),
        };
        let b = View {
            point_map: PointMap::from_points(2, 2, vec![nan, nan, [2.0, 0.0, 1.0], [0.0, 2.0, 1.0]]),
            image: RgbImage::new(2, 2),
        };
        let cloud = fuse_pointclouds(&[a, b]).unwrap();
        assert_eq!(cloud.len(), 2 * 4 - 3);
        assert_eq!(cloud.source[3], Provenance { view: 1, pixel: 2 });
    }

    #[test]
    fn principal_axis_point_projects_to_principal_point() {
        let cam = CameraModel::new(
            CameraIntrinsics::new(100.0, 100.0, 50.0, 40.0).unwrap(),
            CameraExtrinsics::identity(),
            100,
            80,
        )
        .unwrap();
        let cloud = fuse_pointclouds(&[single_pixel_view([0.0, 0.0, 2.0])]).unwrap();
        let s = reproject_cloud(&cloud, &cam).unwrap();
        assert_eq!(s.coords, vec![(50.0, 40.0)]);
        assert_eq!(s.depths, vec![2.0]);
    }

    #[test]
    fn all_behind_camera_is_an_error() {
        let cam = CameraModel::new(
            CameraIntrinsics::new(100.0, 100.0, 50.0, 40.0).unwrap(),
            CameraExtrinsics::identity(),
            100,
            80,
        )
        .unwrap();
        let cloud = fuse_pointclouds(&[single_pixel_view([0.0, 0.0, -2.0])]).unwrap();
        assert_eq!(reproject_cloud(&cloud, &cam), Err(StitchError::EmptyProjection { behind_camera: 1 }));
        assert_eq!(reproject_cloud(&ColoredCloud::default(), &cam), Err(StitchError::EmptyCloud));
    }

    #[test]
    fn reference_out_of_range() {
        let cam = CameraModel::new(
            CameraIntrinsics::new(1.0, 1.0, 0.0, 0.0).unwrap(),
            CameraExtrinsics::new(nalgebra::Matrix3::identity(), Vector3::zeros()).unwrap(),
            1,
            1,
        )
        .unwrap();
        let v = single_pixel_view([0.0, 0.0, 1.0]);
        assert_eq!(
            stitch(&[v], &[cam], 1, &StitchConfig::default()),
            Err(StitchError::ReferenceOutOfRange { reference: 1, count: 1 })
        );
    }
}
