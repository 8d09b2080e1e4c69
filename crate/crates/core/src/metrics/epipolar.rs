//! Two-view epipolar consistency: fundamental matrices from known cameras
//! and Sampson distances of correspondences.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::{MetricsError, StitchedImage};
use crate::camera::{relative_pose, skew, CameraModel};
use crate::raster::luma_plane;
use crate::registration::{detect_corners_in, match_patches_unique, MatchSet, Pt};

/// Rank-2 fundamental matrix with unit Frobenius norm, mapping view-1
/// points to view-2 epipolar lines (`x2ᵀ F x1 = 0`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FundamentalMatrix {
    f: Matrix3<f64>,
}

/// Singular value ratio below which a matrix is taken as rank 2 as is;
/// rebuilding it from its SVD would only add round-off.
const RANK_TOL: f64 = 1e-14;

impl FundamentalMatrix {
    /// Enforces rank 2 and unit norm.
    pub fn new(f: Matrix3<f64>) -> Self {
        let svd = f.svd(true, true);
        let mut s = svd.singular_values;
        let f = if s.min() <= RANK_TOL * s.max() {
            f
        } else {
            let (u, v_t) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
            let imin = s.imin();
            s[imin] = 0.0;
            u * Matrix3::from_diagonal(&s) * v_t
        };
        Self { f: f / f.norm() }
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.f
    }

    /// Ratio of smallest to largest singular value.
    pub fn rank_deficiency(&self) -> f64 {
        let s = self.f.singular_values();
        s.min() / s.max()
    }

    pub fn residual(&self, x1: &Pt, x2: &Pt) -> f64 {
        Vector3::new(x2.x, x2.y, 1.0).dot(&(self.f * Vector3::new(x1.x, x1.y, 1.0)))
    }
}

pub fn fundamental_from_cameras(cam1: &CameraModel, cam2: &CameraModel) -> Result<FundamentalMatrix, MetricsError> {
    let rel = relative_pose(&cam1.extrinsics, &cam2.extrinsics)?;
    let t = rel.translation();
    let scale = 1.0 + cam1.extrinsics.translation().norm() + cam2.extrinsics.translation().norm();
    if t.norm() <= 1e-12 * scale {
        return Err(MetricsError::PureRotation);
    }
    let k1_inv = cam1.intrinsics.inverse_matrix();
    let k2_inv = cam2.intrinsics.inverse_matrix();
    let e = skew(t) * rel.rotation();
    Ok(FundamentalMatrix::new(k2_inv.transpose() * e * k1_inv))
}

/// Sampson distance (pixels²) of one correspondence, `None` when the
/// gradient terms vanish relative to the scale of `f`.
pub fn sampson_distance(f: &Matrix3<f64>, x1: &Pt, x2: &Pt) -> Option<f64> {
    let h1 = Vector3::new(x1.x, x1.y, 1.0);
    let h2 = Vector3::new(x2.x, x2.y, 1.0);
    let fx1 = f * h1;
    let ftx2 = f.transpose() * h2;
    let num = h2.dot(&fx1);
    let denom = fx1.x * fx1.x + fx1.y * fx1.y + ftx2.x * ftx2.x + ftx2.y * ftx2.y;
    if !(denom > 1e-30 * f.norm_squared()) {
        return None;
    }
    Some(num * num / denom)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampsonReport {
    pub per_pair: Vec<Option<f64>>,
    /// Mean over inliers (all pairs when no inlier flags are set).
    pub mean: Option<f64>,
    pub used: usize,
    pub skipped: usize,
}

pub fn sampson_error(f: &FundamentalMatrix, matches: &MatchSet) -> SampsonReport {
    let per_pair: Vec<Option<f64>> = matches.pairs.iter().map(|(a, b)| sampson_distance(f.matrix(), a, b)).collect();
    let skipped = per_pair.iter().filter(|e| e.is_none()).count();
    let (mut sum, mut used) = (0.0, 0usize);
    for (i, e) in per_pair.iter().enumerate() {
        let keep = matches.inlier.as_ref().is_none_or(|flags| flags[i]);
        if let (true, Some(e)) = (keep, e) {
            sum += e;
            used += 1;
        }
    }
    SampsonReport { per_pair, mean: (used > 0).then(|| sum / used as f64), used, skipped }
}

/// Feature matching for stitched-pair Sampson evaluation. Uses larger
/// patches than registration plus a distance-ratio test, which keeps
/// repeated texture from producing gross mismatches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SampsonConfig {
    pub max_corners: usize,
    pub nms_radius: f64,
    pub patch: u32,
    pub min_ncc: f64,
    pub max_ratio: f64,
}

impl Default for SampsonConfig {
    fn default() -> Self {
        Self { max_corners: 1000, nms_radius: 4.0, patch: 25, min_ncc: 0.85, max_ratio: 0.6 }
    }
}

/// Correspondences between two stitched canvases, in the pixel frames of
/// the cameras the canvases were rendered for. Keypoints are restricted to
/// pixels whose whole patch is valid.
pub fn stitched_pair_matches(
    a: &StitchedImage<'_>,
    b: &StitchedImage<'_>,
    config: &SampsonConfig,
) -> Result<MatchSet, MetricsError> {
    let margin = (config.patch / 2).max(3);
    let pa = luma_plane(a.image);
    let pb = luma_plane(b.image);
    let ka = detect_corners_in(&pa, &a.holes.not(), margin, config.max_corners, config.nms_radius)?;
    let kb = detect_corners_in(&pb, &b.holes.not(), margin, config.max_corners, config.nms_radius)?;
    let mut m = match_patches_unique(&pa, &ka, &pb, &kb, config.patch, config.min_ncc, config.max_ratio)?;
    let shift = |p: &Pt, off: (i64, i64)| Pt::new(p.x - off.0 as f64, p.y - off.1 as f64);
    for pair in &mut m.pairs {
        *pair = (shift(&pair.0, a.offset), shift(&pair.1, b.offset));
    }
    Ok(m)
}

/// Sampson error of features matched between two stitched outputs, using
/// the exact fundamental matrix of their cameras.
pub fn stitched_pair_sampson(
    a: &StitchedImage<'_>,
    cam_a: &CameraModel,
    b: &StitchedImage<'_>,
    cam_b: &CameraModel,
    config: &SampsonConfig,
) -> Result<SampsonReport, MetricsError> {
    let f = fundamental_from_cameras(cam_a, cam_b)?;
    let m = stitched_pair_matches(a, b, config)?;
    Ok(sampson_error(&f, &m))
}
