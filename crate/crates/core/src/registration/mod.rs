//! Feature-based planar registration: Shi–Tomasi corners, zero-normalized
//! patch matching, normalized DLT homographies with RANSAC, bilinear warping
//! and a global-homography stitcher used as a comparison baseline.

mod baseline;
mod corners;
mod homography;
mod matching;
mod warp;

pub use baseline::{baseline_stitch, BaselineConfig};
pub use corners::{detect_corners, detect_corners_in, Keypoint};
pub use homography::{
    estimate_homography_dlt, ransac_homography, symmetric_transfer_error, Homography, RansacOutput, RansacParams,
};
pub use matching::{match_patches, match_patches_unique, MatchSet};
pub use warp::{warp_homography, warp_with_validity, WarpOutput};

use image::RgbImage;
use nalgebra::Point2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{luma_plane, Mask};

pub type Pt = Point2<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegistrationError {
    #[error("image {width}x{height} is smaller than the 16x16 minimum")]
    ImageTooSmall { width: u32, height: u32 },
    #[error("patch size must be odd and at least 5 (got {0})")]
    InvalidPatch(u32),
    #[error("at least 4 correspondences are required (got {0})")]
    TooFewPairs(usize),
    #[error("degenerate correspondence configuration: {0}")]
    Degenerate(&'static str),
    #[error("homography is singular")]
    Singular,
    #[error("registration failed: {0}")]
    Failure(String),
}

/// Thresholds for feature registration. Registration is declared failed
/// when RANSAC keeps fewer than `min_inliers` pairs or the refit RMS
/// transfer error exceeds `max_refit_error` pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegistrationConfig {
    pub max_corners: usize,
    pub nms_radius: f64,
    pub patch: u32,
    pub min_ncc: f64,
    pub threshold: f64,
    pub max_iters: usize,
    pub seed: u64,
    pub min_inliers: usize,
    pub max_refit_error: f64,
}

impl Default for RegistrationConfig {
    fn default() -> Self {
        Self {
            max_corners: 1000,
            nms_radius: 4.0,
            patch: 11,
            min_ncc: 0.8,
            threshold: 3.0,
            max_iters: 2000,
            seed: 0,
            min_inliers: 12,
            max_refit_error: 5.0,
        }
    }
}

impl RegistrationConfig {
    pub fn ransac(&self) -> RansacParams {
        RansacParams { threshold: self.threshold, max_iters: self.max_iters, seed: self.seed }
    }
}

/// A successful registration of a moving image onto a fixed one.
#[derive(Debug, Clone)]
pub struct Registration {
    /// Maps moving-image pixels to fixed-image pixels.
    pub homography: Homography,
    pub matches: MatchSet,
    pub inlier_count: usize,
    pub rms_error: f64,
}

/// Detects, matches and robustly fits `moving -> fixed`. Optional masks
/// restrict keypoints to pixels whose whole patch is valid.
pub fn register(
    moving: &RgbImage,
    moving_valid: Option<&Mask>,
    fixed: &RgbImage,
    fixed_valid: Option<&Mask>,
    config: &RegistrationConfig,
) -> Result<Registration, RegistrationError> {
    if config.patch < 5 || config.patch.is_multiple_of(2) {
        return Err(RegistrationError::InvalidPatch(config.patch));
    }
    let margin = (config.patch / 2).max(3);
    let pm = luma_plane(moving);
    let pf = luma_plane(fixed);
    let kps = |plane, mask: Option<&Mask>| match mask {
        Some(m) => detect_corners_in(plane, m, margin, config.max_corners, config.nms_radius),
        None => detect_corners(plane, config.max_corners, config.nms_radius),
    };
    let km = kps(&pm, moving_valid)?;
    let kf = kps(&pf, fixed_valid)?;
    let mut matches = match_patches(&pm, &km, &pf, &kf, config.patch, config.min_ncc)?;
    log::debug!("register: {} / {} keypoints, {} matches", km.len(), kf.len(), matches.len());
    if matches.len() < 4 {
        return Err(RegistrationError::Failure(format!("only {} matches", matches.len())));
    }
    let fit = ransac_homography(&matches.pairs, &config.ransac())?;
    if fit.inlier_count < config.min_inliers {
        return Err(RegistrationError::Failure(format!("{} inliers (< {})", fit.inlier_count, config.min_inliers)));
    }
    if !(fit.rms_error <= config.max_refit_error) {
        return Err(RegistrationError::Failure(format!(
            "refit transfer error {:.3} px (> {})",
            fit.rms_error, config.max_refit_error
        )));
    }
    matches.inlier = Some(fit.inliers.clone());
    Ok(Registration { homography: fit.homography, matches, inlier_count: fit.inlier_count, rms_error: fit.rms_error })
}
