//! Full-reference image quality: PSNR and SSIM restricted to a validity mask.

use image::RgbImage;

use super::MetricsError;
use crate::raster::{luma_plane, Mask, Plane};

/// PSNR returned for identical images (and the ceiling for all others).
pub const PSNR_CAP: f64 = 99.0;

/// PSNR in dB over the masked pixels of two 8-bit RGB images, all
/// channels pooled, `MAX = 255`.
pub fn psnr(a: &RgbImage, b: &RgbImage, mask: &Mask) -> Result<f64, MetricsError> {
    check_dims(a, b, mask)?;
    let mut sum = 0.0;
    let mut n = 0usize;
    let (ra, rb) = (a.as_raw(), b.as_raw());
    for (i, &m) in mask.as_slice().iter().enumerate() {
        if !m {
            continue;
        }
        for c in 0..3 {
            let d = ra[3 * i + c] as f64 - rb[3 * i + c] as f64;
            sum += d * d;
        }
        n += 1;
    }
    if n == 0 {
        return Err(MetricsError::EmptyMask);
    }
    let mse = sum / (3 * n) as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((10.0 * (255.0f64 * 255.0 / mse).log10()).min(PSNR_CAP))
}

fn check_dims(a: &RgbImage, b: &RgbImage, mask: &Mask) -> Result<(), MetricsError> {
    if a.dimensions() != b.dimensions() || a.dimensions() != mask.dimensions() {
        return Err(MetricsError::DimensionMismatch { a: a.dimensions(), b: b.dimensions(), mask: mask.dimensions() });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimParams {
    pub window: u32,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self { window: 11, sigma: 1.5, k1: 0.01, k2: 0.03 }
    }
}

/// Normalized 1-D Gaussian taps.
pub fn gaussian_kernel(window: u32, sigma: f64) -> Vec<f64> {
    let c = (window as f64 - 1.0) / 2.0;
    let g: Vec<f64> = (0..window).map(|i| (-(i as f64 - c).powi(2) / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|v| v / s).collect()
}

/// Separable "valid" filtering of `p` with kernel `g`.
fn filter_valid(p: &Plane, g: &[f64]) -> Plane {
    let k = g.len() as u32;
    let (ow, oh) = (p.width - k + 1, p.height - k + 1);
    let mut horiz = Plane::new(ow, p.height);
    for y in 0..p.height {
        for x in 0..ow {
            let mut acc = 0.0;
            for (i, w) in g.iter().enumerate() {
                acc += w * p.get(x + i as u32, y);
            }
            horiz.set(x, y, acc);
        }
    }
    let mut out = Plane::new(ow, oh);
    for y in 0..oh {
        for x in 0..ow {
            let mut acc = 0.0;
            for (i, w) in g.iter().enumerate() {
                acc += w * horiz.get(x, y + i as u32);
            }
            out.set(x, y, acc);
        }
    }
    out
}

/// Mean local SSIM on BT.601 luma with a Gaussian window. Only windows lying
/// entirely inside `mask` contribute.
pub fn ssim(a: &RgbImage, b: &RgbImage, mask: &Mask, params: &SsimParams) -> Result<f64, MetricsError> {
    check_dims(a, b, mask)?;
    let (w, h) = a.dimensions();
    let k = params.window;
    if k == 0 || w < k || h < k {
        return Err(MetricsError::ImageSmallerThanWindow { window: k, width: w, height: h });
    }
    let pa = luma_plane(a);
    let pb = luma_plane(b);
    let prod = |x: &Plane, y: &Plane| Plane {
        width: x.width,
        height: x.height,
        data: x.data.iter().zip(&y.data).map(|(p, q)| p * q).collect(),
    };
    let g = gaussian_kernel(k, params.sigma);
    let mu_a = filter_valid(&pa, &g);
    let mu_b = filter_valid(&pb, &g);
    let e_aa = filter_valid(&prod(&pa, &pa), &g);
    let e_bb = filter_valid(&prod(&pb, &pb), &g);
    let e_ab = filter_valid(&prod(&pa, &pb), &g);

    // summed-area table of invalid pixels
    let (w1, h1) = (w as usize + 1, h as usize + 1);
    let mut sat = vec![0u32; w1 * h1];
    for y in 0..h as usize {
        for x in 0..w as usize {
            let bad = u32::from(!mask.get(x as u32, y as u32));
            sat[(y + 1) * w1 + x + 1] = bad + sat[y * w1 + x + 1] + sat[(y + 1) * w1 + x] - sat[y * w1 + x];
        }
    }
    let k = k as usize;
    let c1 = (params.k1 * 255.0).powi(2);
    let c2 = (params.k2 * 255.0).powi(2);
    let mut total = 0.0;
    let mut count = 0usize;
    for y in 0..mu_a.height as usize {
        for x in 0..mu_a.width as usize {
            let bad = sat[(y + k) * w1 + x + k] + sat[y * w1 + x] - sat[y * w1 + x + k] - sat[(y + k) * w1 + x];
            if bad > 0 {
                continue;
            }
            let i = y * mu_a.width as usize + x;
            let (ma, mb) = (mu_a.data[i], mu_b.data[i]);
            let va = e_aa.data[i] - ma * ma;
            let vb = e_bb.data[i] - mb * mb;
            let cov = e_ab.data[i] - ma * mb;
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1;
        }
    }
    if count == 0 {
        return Err(MetricsError::EmptyMask);
    }
    Ok(total / count as f64)
}
