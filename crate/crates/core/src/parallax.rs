//! Parallax level of an image pair: camera baseline over the median scene
//! depth seen by the first camera.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::{relative_pose, CameraError, CameraExtrinsics};
use crate::pointmap::PointMap;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParallaxError {
    #[error("point map has no valid points")]
    NoValidPoints,
    #[error("median depth {0} is not positive")]
    NonPositiveDepth(f64),
    #[error("thresholds must satisfy 0 <= tau1 <= tau2 (got {0}, {1})")]
    InvalidThresholds(f64, f64),
    #[error(transparent)]
    Camera(#[from] CameraError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParallaxClass {
    PureRotation,
    Slight,
    VeryLarge,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParallaxThresholds {
    pub tau1: f64,
    pub tau2: f64,
}

impl Default for ParallaxThresholds {
    fn default() -> Self {
        Self { tau1: 0.02, tau2: 0.25 }
    }
}

impl ParallaxThresholds {
    pub fn classify(&self, p_level: f64) -> ParallaxClass {
        if p_level < self.tau1 {
            ParallaxClass::PureRotation
        } else if p_level < self.tau2 {
            ParallaxClass::Slight
        } else {
            ParallaxClass::VeryLarge
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParallaxAssessment {
    pub p_level: f64,
    pub class: ParallaxClass,
    pub baseline: f64,
    pub median_depth: f64,
}

/// Median camera-frame depth of the valid points (mean of the two middle
/// values for even counts).
pub fn median_depth(cam: &CameraExtrinsics, pm: &PointMap) -> Option<f64> {
    let mut z: Vec<f64> = pm.valid_points().map(|(_, p)| cam.transform(&p).z).collect();
    if z.is_empty() {
        return None;
    }
    z.sort_by(f64::total_cmp);
    let n = z.len();
    Some(if n % 2 == 1 { z[n / 2] } else { 0.5 * (z[n / 2 - 1] + z[n / 2]) })
}

pub fn assess_parallax(
    cam1: &CameraExtrinsics,
    cam2: &CameraExtrinsics,
    pm1: &PointMap,
    thresholds: &ParallaxThresholds,
) -> Result<ParallaxAssessment, ParallaxError> {
    if !(thresholds.tau1 >= 0.0 && thresholds.tau1 <= thresholds.tau2) {
        return Err(ParallaxError::InvalidThresholds(thresholds.tau1, thresholds.tau2));
    }
    let depth = median_depth(cam1, pm1).ok_or(ParallaxError::NoValidPoints)?;
    if !(depth > 0.0) {
        return Err(ParallaxError::NonPositiveDepth(depth));
    }
    let baseline = relative_pose(cam1, cam2)?.translation().norm();
    let p_level = baseline / depth;
    Ok(ParallaxAssessment { p_level, class: thresholds.classify(p_level), baseline, median_depth: depth })
}
