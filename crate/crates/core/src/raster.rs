//! Small raster containers shared by the stitcher, registration and metrics.

use image::{GrayImage, Luma, RgbImage};

/// Per-pixel boolean flags, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: u32,
    height: u32,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(width: u32, height: u32, value: bool) -> Self {
        Self { width, height, data: vec![value; width as usize * height as usize] }
    }

    pub fn from_vec(width: u32, height: u32, data: Vec<bool>) -> Self {
        assert_eq!(data.len(), width as usize * height as usize, "mask size mismatch");
        Self { width, height, data }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.data[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        self.data[y as usize * self.width as usize + x as usize] = value;
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.data
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn and(&self, other: &Mask) -> Mask {
        assert_eq!(self.dimensions(), other.dimensions());
        let data = self.data.iter().zip(&other.data).map(|(a, b)| *a && *b).collect();
        Mask { width: self.width, height: self.height, data }
    }

    pub fn not(&self) -> Mask {
        Mask { width: self.width, height: self.height, data: self.data.iter().map(|b| !b).collect() }
    }

    /// 8-bit rendering, 255 where set.
    pub fn to_gray(&self) -> GrayImage {
        GrayImage::from_fn(self.width, self.height, |x, y| Luma([if self.get(x, y) { 255 } else { 0 }]))
    }

    pub fn from_gray(img: &GrayImage) -> Self {
        let data = img.pixels().map(|p| p.0[0] >= 128).collect();
        Self { width: img.width(), height: img.height(), data }
    }

    /// True if every pixel in the square of radius `r` around `(x, y)` is set
    /// and inside the mask.
    pub fn all_in_window(&self, x: u32, y: u32, r: u32) -> bool {
        if x < r || y < r || x + r >= self.width || y + r >= self.height {
            return false;
        }
        (y - r..=y + r).all(|yy| (x - r..=x + r).all(|xx| self.get(xx, yy)))
    }
}

/// Single-channel floating point plane, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub width: u32,
    pub height: u32,
    pub data: Vec<f64>,
}

impl Plane {
    pub fn new(width: u32, height: u32) -> Self {
        Self { width, height, data: vec![0.0; width as usize * height as usize] }
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.data[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, v: f64) {
        self.data[y as usize * self.width as usize + x as usize] = v;
    }
}

/// ITU-R BT.601 luma weights.
#[inline]
pub fn luma(rgb: [u8; 3]) -> f64 {
    0.299 * rgb[0] as f64 + 0.587 * rgb[1] as f64 + 0.114 * rgb[2] as f64
}

pub fn luma_plane(img: &RgbImage) -> Plane {
    Plane { width: img.width(), height: img.height(), data: img.pixels().map(|p| luma(p.0)).collect() }
}

/// Copies `src` into a `width x height` canvas at `(dx, dy)`; returns the
/// padded image and the mask of pixels covered by `src`.
pub fn pad_centered(src: &RgbImage, width: u32, height: u32) -> (RgbImage, Mask, (u32, u32)) {
    let dx = (width - src.width()) / 2;
    let dy = (height - src.height()) / 2;
    let mut out = RgbImage::new(width, height);
    let mut mask = Mask::new(width, height, false);
    for (x, y, p) in src.enumerate_pixels() {
        out.put_pixel(x + dx, y + dy, *p);
        mask.set(x + dx, y + dy, true);
    }
    (out, mask, (dx, dy))
}

/// Center crop matching [`pad_centered`]'s placement.
pub fn crop_centered(src: &RgbImage, width: u32, height: u32) -> RgbImage {
    let dx = (src.width() - width) / 2;
    let dy = (src.height() - height) / 2;
    image::imageops::crop_imm(src, dx, dy, width, height).to_image()
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgb;

    #[test]
    fn pad_then_crop_round_trips() {
        let src = RgbImage::from_fn(5, 3, |x, y| Rgb([x as u8, y as u8, 7]));
        let (padded, mask, off) = pad_centered(&src, 10, 8);
        assert_eq!(off, (2, 2));
        assert_eq!(mask.count(), 15);
        assert_eq!(crop_centered(&padded, 5, 3), src);
    }

    #[test]
    fn window_check_respects_borders() {
        let mut m = Mask::new(7, 7, true);
        assert!(m.all_in_window(3, 3, 3));
        assert!(!m.all_in_window(3, 3, 4));
        assert!(!m.all_in_window(0, 3, 1));
        assert!(m.all_in_window(3, 3, 2));
        m.set(1, 1, false);
        assert!(!m.all_in_window(3, 3, 2));
        assert!(m.all_in_window(4, 4, 2));
    }

    #[test]
    fn luma_of_white_is_255() {
        assert!((luma([255, 255, 255]) - 255.0).abs() < 1e-9);
    }
}
