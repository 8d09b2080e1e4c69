use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use super::{register, warp_homography, Pt, RegistrationConfig, RegistrationError};
use crate::raster::Mask;
use crate::stitch::{StitchCanvas, StitchResult, SNAP_EPS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    pub registration: RegistrationConfig,
    pub max_dim: u32,
    pub hole_color: [u8; 3],
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self { registration: RegistrationConfig::default(), max_dim: 8192, hole_color: [0, 0, 0] }
    }
}

fn snap(x: f64) -> f64 {
    if (x - x.round()).abs() < SNAP_EPS {
        x.round()
    } else {
        x
    }
}

/// Global-homography stitch of `target` into the frame of `reference`.
/// Overlapping pixels keep the reference value. The returned depth buffer
/// carries no geometry: covered pixels hold 0 and holes `+inf`.
pub fn baseline_stitch(
    reference: &RgbImage,
    target: &RgbImage,
    config: &BaselineConfig,
) -> Result<StitchResult, RegistrationError> {
    let reg = register(target, None, reference, None, &config.registration)?;
    let h = reg.homography;
    let (tw, th) = (target.width() as f64 - 1.0, target.height() as f64 - 1.0);
    let (rw, rh) = (reference.width() as f64 - 1.0, reference.height() as f64 - 1.0);
    let mut xs = vec![0.0, rw];
    let mut ys = vec![0.0, rh];
    for c in [Pt::new(0.0, 0.0), Pt::new(tw, 0.0), Pt::new(0.0, th), Pt::new(tw, th)] {
        let q = h.matrix() * nalgebra::Vector3::new(c.x, c.y, 1.0);
        if q.z <= 1e-12 {
            return Err(RegistrationError::Failure("target corner maps behind the reference view".into()));
        }
        xs.push(snap(q.x / q.z));
        ys.push(snap(q.y / q.z));
    }
    let fold = |v: &[f64]| v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let (min_x, max_x) = fold(&xs);
    let (min_y, max_y) = fold(&ys);
    let du = if min_x < 0.0 { -min_x.floor() } else { 0.0 };
    let dv = if min_y < 0.0 { -min_y.floor() } else { 0.0 };
    let size = |m: f64| ((m.ceil() + 1.0).min(config.max_dim as f64)) as u32;
    let (width, height) = (size(max_x + du), size(max_y + dv));
    let offset = (du as i64, dv as i64);

    let warped = warp_homography(target, &h, width, height, offset)?;
    let mut image = RgbImage::from_pixel(width, height, Rgb(config.hole_color));
    let mut hole_mask = Mask::new(width, height, true);
    let mut depth_buffer = vec![f64::INFINITY; width as usize * height as usize];
    for y in 0..height {
        for x in 0..width {
            if warped.valid.get(x, y) {
                image.put_pixel(x, y, *warped.image.get_pixel(x, y));
                hole_mask.set(x, y, false);
                depth_buffer[y as usize * width as usize + x as usize] = 0.0;
            }
        }
    }
    let mut dropped = 0;
    for (x, y, p) in reference.enumerate_pixels() {
        let (cx, cy) = (x as i64 + offset.0, y as i64 + offset.1);
        if cx >= width as i64 || cy >= height as i64 {
            dropped += 1;
            continue;
        }
        let (cx, cy) = (cx as u32, cy as u32);
        image.put_pixel(cx, cy, *p);
        hole_mask.set(cx, cy, false);
        depth_buffer[cy as usize * width as usize + cx as usize] = 0.0;
    }
    Ok(StitchResult {
        image,
        hole_mask,
        depth_buffer,
        canvas: StitchCanvas { offset, width, height, max_dim: config.max_dim, dropped_samples: dropped },
        reference_view: 0,
        behind_camera: 0,
    })
}
