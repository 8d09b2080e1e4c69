//! Pinhole camera geometry.
//!
//! Extrinsics `(R, t)` always map world coordinates into the camera frame:
//! `X_cam = R * X_world + t`. Pixel coordinates are `(u, v) = (column, row)`
//! with the origin at the center of the top-left pixel, so pixel `(x, y)` has
//! its center exactly at `(x as f64, y as f64)`.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Points with camera-frame depth at or below this value are treated as
/// behind the camera.
pub const MIN_DEPTH: f64 = 1e-6;

const ROTATION_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CameraError {
    #[error("focal lengths must be positive (fx={fx}, fy={fy})")]
    NonPositiveFocal { fx: f64, fy: f64 },
    #[error("intrinsic parameters must be finite")]
    NonFiniteIntrinsics,
    #[error("rotation is not orthonormal with det 1 (orthogonality error {ortho:.3e}, det {det})")]
    InvalidRotation { ortho: f64, det: f64 },
    #[error("translation must be finite")]
    NonFiniteTranslation,
    #[error("image dimensions must be at least 1x1 (got {width}x{height})")]
    EmptyImage { width: u32, height: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    #[serde(default)]
    pub skew: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self, CameraError> {
        Self::with_skew(fx, fy, cx, cy, 0.0)
    }

    pub fn with_skew(fx: f64, fy: f64, cx: f64, cy: f64, skew: f64) -> Result<Self, CameraError> {
        let k = Self { fx, fy, cx, cy, skew };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<(), CameraError> {
        if ![self.fx, self.fy, self.cx, self.cy, self.skew].iter().all(|v| v.is_finite()) {
            return Err(CameraError::NonFiniteIntrinsics);
        }
        if self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(CameraError::NonPositiveFocal { fx: self.fx, fy: self.fy });
        }
        Ok(())
    }

    /// The calibration matrix `K`.
    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, self.skew, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    /// Closed-form `K⁻¹` for an upper-triangular calibration matrix.
    pub fn inverse_matrix(&self) -> Matrix3<f64> {
        let (fx, fy, cx, cy, s) = (self.fx, self.fy, self.cx, self.cy, self.skew);
        Matrix3::new(1.0 / fx, -s / (fx * fy), (s * cy - cx * fy) / (fx * fy), 0.0, 1.0 / fy, -cy / fy, 0.0, 0.0, 1.0)
    }

    /// Projects a camera-frame point. Returns `None` when `z <= MIN_DEPTH`.
    pub fn project(&self, p: &Vector3<f64>) -> Option<(f64, f64)> {
        if !(p.z > MIN_DEPTH) {
            return None;
        }
        let x = p.x / p.z;
        let y = p.y / p.z;
        Some((self.fx * x + self.skew * y + self.cx, self.fy * y + self.cy))
    }

    /// Back-projects pixel `(u, v)` at camera depth `z`.
    pub fn unproject(&self, u: f64, v: f64, z: f64) -> Vector3<f64> {
        let y = (v - self.cy) / self.fy;
        let x = (u - self.cx - self.skew * y) / self.fx;
        Vector3::new(x * z, y * z, z)
    }

    /// Direction (not normalized, `z = 1`) of the ray through pixel `(u, v)`.
    pub fn ray_direction(&self, u: f64, v: f64) -> Vector3<f64> {
        self.unproject(u, v, 1.0)
    }
}

/// Rigid world-to-camera transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraExtrinsics {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl CameraExtrinsics {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, CameraError> {
        check_rotation(&rotation)?;
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(CameraError::NonFiniteTranslation);
        }
        Ok(Self { rotation, translation })
    }

    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    /// Builds extrinsics from a row-major rotation and a translation.
    pub fn from_arrays(r: &[f64; 9], t: &[f64; 3]) -> Result<Self, CameraError> {
        Self::new(Matrix3::from_row_slice(r), Vector3::new(t[0], t[1], t[2]))
    }

    /// Extrinsics of a camera centered at `center` with camera-to-world
    /// rotation `r_cw` (columns are the camera axes expressed in world).
    pub fn from_center(r_cw: Matrix3<f64>, center: Vector3<f64>) -> Result<Self, CameraError> {
        let r = r_cw.transpose();
        Self::new(r, -(r * center))
    }

    /// Camera at `center` with its optical axis aimed at `target`. `down`
    /// approximates the image `+v` direction in world coordinates.
    pub fn look_at(center: Vector3<f64>, target: Vector3<f64>, down: Vector3<f64>) -> Result<Self, CameraError> {
        let z = (target - center).normalize();
        let x = down.cross(&z).normalize();
        let y = z.cross(&x);
        Self::from_center(Matrix3::from_columns(&[x, y, z]), center)
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    /// Camera center in world coordinates, `-Rᵀ t`.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation.transpose() * self.translation)
    }

    pub fn transform(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn rotation_row_major(&self) -> [f64; 9] {
        let r = &self.rotation;
        [r[(0, 0)], r[(0, 1)], r[(0, 2)], r[(1, 0)], r[(1, 1)], r[(1, 2)], r[(2, 0)], r[(2, 1)], r[(2, 2)]]
    }

    pub fn translation_array(&self) -> [f64; 3] {
        [self.translation.x, self.translation.y, self.translation.z]
    }
}

fn check_rotation(r: &Matrix3<f64>) -> Result<(), CameraError> {
    let ortho = (r.transpose() * r - Matrix3::identity()).abs().max();
    let det = r.determinant();
    if !ortho.is_finite() || ortho > ROTATION_TOL || (det - 1.0).abs() > ROTATION_TOL {
        return Err(CameraError::InvalidRotation { ortho, det });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraModel {
    pub intrinsics: CameraIntrinsics,
    pub extrinsics: CameraExtrinsics,
    pub width: u32,
    pub height: u32,
}

impl CameraModel {
    pub fn new(
        intrinsics: CameraIntrinsics,
        extrinsics: CameraExtrinsics,
        width: u32,
        height: u32,
    ) -> Result<Self, CameraError> {
        intrinsics.validate()?;
        if width == 0 || height == 0 {
            return Err(CameraError::EmptyImage { width, height });
        }
        Ok(Self { intrinsics, extrinsics, width, height })
    }

    /// World point to pixel coordinates and depth.
    pub fn project_world(&self, p: &Vector3<f64>) -> Option<(f64, f64, f64)> {
        let pc = self.extrinsics.transform(p);
        self.intrinsics.project(&pc).map(|(u, v)| (u, v, pc.z))
    }

    pub fn contains_pixel(&self, u: f64, v: f64) -> bool {
        u >= -0.5 && v >= -0.5 && u < self.width as f64 - 0.5 && v < self.height as f64 - 0.5
    }
}

/// Output of [`world_to_camera`]. `points` has the input's length; entries
/// listed in `rejected` were non-finite and are NaN in the output.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraFramePoints {
    pub points: Vec<Vector3<f64>>,
    pub rejected: Vec<usize>,
}

pub fn world_to_camera(points: &[Vector3<f64>], extrinsics: &CameraExtrinsics) -> CameraFramePoints {
    let mut rejected = Vec::new();
    let points = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            if p.iter().all(|v| v.is_finite()) {
                extrinsics.transform(p)
            } else {
                rejected.push(i);
                Vector3::repeat(f64::NAN)
            }
        })
        .collect();
    CameraFramePoints { points, rejected }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelProjection {
    pub u: f64,
    pub v: f64,
    pub depth: f64,
    /// Index of the point in the projected input.
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Projection {
    pub pixels: Vec<PixelProjection>,
    /// Points with `Z <= MIN_DEPTH` (or non-finite) that were excluded.
    pub behind_camera: usize,
}

pub fn project_pinhole(points_cam: &[Vector3<f64>], intrinsics: &CameraIntrinsics) -> Projection {
    let mut out = Projection { pixels: Vec::with_capacity(points_cam.len()), behind_camera: 0 };
    for (index, p) in points_cam.iter().enumerate() {
        match intrinsics.project(p) {
            Some((u, v)) => out.pixels.push(PixelProjection { u, v, depth: p.z, index }),
            None => out.behind_camera += 1,
        }
    }
    out
}

/// Pose of `b` relative to `a`: maps `a`-frame points into the `b` frame.
pub fn relative_pose(a: &CameraExtrinsics, b: &CameraExtrinsics) -> Result<CameraExtrinsics, CameraError> {
    check_rotation(&a.rotation)?;
    check_rotation(&b.rotation)?;
    let r = b.rotation * a.rotation.transpose();
    let t = b.translation - r * a.translation;
    CameraExtrinsics::new(r, t)
}

/// Rotation by `angle` radians about unit `axis` (Rodrigues).
pub fn axis_angle(axis: &Vector3<f64>, angle: f64) -> Matrix3<f64> {
    nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(*axis), angle).into_inner()
}

/// Cross-product (skew-symmetric) matrix `[v]×`.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}
