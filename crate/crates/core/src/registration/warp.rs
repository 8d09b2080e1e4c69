use image::{Rgb, RgbImage};
use nalgebra::Vector3;

use super::{Homography, RegistrationError};
use crate::raster::Mask;

/// Source coordinates this close outside the image are clamped onto it.
const EDGE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct WarpOutput {
    pub image: RgbImage,
    /// True where the preimage lies inside the source (and every bilinear
    /// tap is valid when a source validity mask is given).
    pub valid: Mask,
}

/// Inverse-mapped bilinear warp. Output pixel `(x, y)` corresponds to the
/// point `(x - offset.0, y - offset.1)` in the destination frame of `h`.
pub fn warp_homography(
    image: &RgbImage,
    h: &Homography,
    width: u32,
    height: u32,
    offset: (i64, i64),
) -> Result<WarpOutput, RegistrationError> {
    warp_with_validity(image, None, h, width, height, offset)
}

pub fn warp_with_validity(
    image: &RgbImage,
    source_valid: Option<&Mask>,
    h: &Homography,
    width: u32,
    height: u32,
    offset: (i64, i64),
) -> Result<WarpOutput, RegistrationError> {
    let inv = h.inverse()?;
    let m = inv.matrix();
    let (sw, sh) = (image.width(), image.height());
    let (max_x, max_y) = (sw as f64 - 1.0, sh as f64 - 1.0);
    let mut out = RgbImage::new(width, height);
    let mut valid = Mask::new(width, height, false);
    for y in 0..height {
        for x in 0..width {
            let q = m * Vector3::new(x as f64 - offset.0 as f64, y as f64 - offset.1 as f64, 1.0);
            if q.z.abs() <= 1e-12 {
                continue;
            }
            let (mut sx, mut sy) = (q.x / q.z, q.y / q.z);
            if !(sx >= -EDGE_EPS && sy >= -EDGE_EPS && sx <= max_x + EDGE_EPS && sy <= max_y + EDGE_EPS) {
                continue;
            }
            sx = sx.clamp(0.0, max_x);
            sy = sy.clamp(0.0, max_y);
            let x0 = (sx.floor() as u32).min(sw.saturating_sub(2));
            let y0 = (sy.floor() as u32).min(sh.saturating_sub(2));
            let x1 = (x0 + 1).min(sw - 1);
            let y1 = (y0 + 1).min(sh - 1);
            let fx = sx - x0 as f64;
            let fy = sy - y0 as f64;
            let taps = [
                (x0, y0, (1.0 - fx) * (1.0 - fy)),
                (x1, y0, fx * (1.0 - fy)),
                (x0, y1, (1.0 - fx) * fy),
                (x1, y1, fx * fy),
            ];
            if let Some(sv) = source_valid {
                if taps.iter().any(|&(tx, ty, w)| w > 0.0 && !sv.get(tx, ty)) {
                    continue;
                }
            }
            let mut acc = [0.0f64; 3];
            for &(tx, ty, w) in &taps {
                if w == 0.0 {
                    continue;
                }
                let p = image.get_pixel(tx, ty).0;
                for c in 0..3 {
                    acc[c] += w * p[c] as f64;
                }
            }
            out.put_pixel(x, y, Rgb(acc.map(|v| v.round().clamp(0.0, 255.0) as u8)));
            valid.set(x, y, true);
        }
    }
    Ok(WarpOutput { image: out, valid })
}
