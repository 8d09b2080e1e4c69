use super::RegistrationError;
use crate::raster::{Mask, Plane};

/// Corner location (pixel coordinates) and minimum-eigenvalue response.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub score: f64,
}

const MIN_SIZE: u32 = 16;
/// Radius of the binomial window weighting the structure tensor.
const WINDOW: i64 = 2;
const WEIGHTS: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];
/// Candidates below this fraction of the strongest response are ignored.
const QUALITY: f64 = 0.01;
const MIN_RESPONSE: f64 = 1e-6;

/// Shi–Tomasi corners on a luma plane.
pub fn detect_corners(img: &Plane, max_count: usize, nms_radius: f64) -> Result<Vec<Keypoint>, RegistrationError> {
    detect(img, None, 0, max_count, nms_radius)
}

/// As [`detect_corners`], keeping only corners whose `margin`-radius
/// neighbourhood is entirely inside `valid`.
pub fn detect_corners_in(
    img: &Plane,
    valid: &Mask,
    margin: u32,
    max_count: usize,
    nms_radius: f64,
) -> Result<Vec<Keypoint>, RegistrationError> {
    assert_eq!(valid.dimensions(), (img.width, img.height), "mask size mismatch");
    detect(img, Some(valid), margin, max_count, nms_radius)
}

fn response_map(img: &Plane) -> Plane {
    let (w, h) = (img.width as i64, img.height as i64);
    let at = |x: i64, y: i64| img.data[(y * w + x) as usize];
    // gradient products, zero on the one-pixel border
    let mut ixx = vec![0.0; (w * h) as usize];
    let mut iyy = vec![0.0; (w * h) as usize];
    let mut ixy = vec![0.0; (w * h) as usize];
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let gx = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
            let gy = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
            let i = (y * w + x) as usize;
            // Sobel gain is 8
            ixx[i] = gx * gx / 64.0;
            iyy[i] = gy * gy / 64.0;
            ixy[i] = gx * gy / 64.0;
        }
    }
    let mut out = Plane::new(img.width, img.height);
    let r = WINDOW + 1;
    for y in r..h - r {
        for x in r..w - r {
            let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
            for yy in y - WINDOW..=y + WINDOW {
                for xx in x - WINDOW..=x + WINDOW {
                    let i = (yy * w + xx) as usize;
                    let k = WEIGHTS[(yy - y + WINDOW) as usize] * WEIGHTS[(xx - x + WINDOW) as usize];
                    a += k * ixx[i];
                    b += k * ixy[i];
                    c += k * iyy[i];
                }
            }
            let half_tr = 0.5 * (a + c);
            let disc = (0.25 * (a - c) * (a - c) + b * b).sqrt();
            out.data[(y * w + x) as usize] = (half_tr - disc).max(0.0);
        }
    }
    out
}

fn detect(
    img: &Plane,
    valid: Option<&Mask>,
    margin: u32,
    max_count: usize,
    nms_radius: f64,
) -> Result<Vec<Keypoint>, RegistrationError> {
    if img.width < MIN_SIZE || img.height < MIN_SIZE {
        return Err(RegistrationError::ImageTooSmall { width: img.width, height: img.height });
    }
    let resp = response_map(img);
    let (w, h) = (img.width, img.height);
    let border = (WINDOW as u32 + 1).max(margin);
    let usable = |x: u32, y: u32| valid.is_none_or(|m| m.all_in_window(x, y, border));

    let mut candidates = Vec::new();
    let mut peak: f64 = 0.0;
    for y in border..h.saturating_sub(border) {
        for x in border..w.saturating_sub(border) {
            let s = resp.get(x, y);
            if s <= MIN_RESPONSE || !usable(x, y) {
                continue;
            }
            // 3x3 local maximum; ties resolved towards the first pixel in raster order
            let mut is_max = true;
            'n: for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let n = resp.get((x as i64 + dx) as u32, (y as i64 + dy) as u32);
                    let earlier = dy < 0 || (dy == 0 && dx < 0);
                    if n > s || (n == s && earlier) {
                        is_max = false;
                        break 'n;
                    }
                }
            }
            if is_max {
                peak = peak.max(s);
                candidates.push((x, y, s));
            }
        }
    }
    let floor = peak * QUALITY;
    candidates.retain(|c| c.2 >= floor);
    candidates.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.1.cmp(&b.1)).then(a.0.cmp(&b.0)));

    // greedy suppression on a bucket grid
    let cell = nms_radius.max(1.0);
    let gw = (w as f64 / cell).ceil() as usize + 1;
    let gh = (h as f64 / cell).ceil() as usize + 1;
    let mut grid: Vec<Vec<(f64, f64)>> = vec![Vec::new(); gw * gh];
    let mut out = Vec::new();
    for (x, y, s) in candidates {
        if out.len() >= max_count {
            break;
        }
        let (px, py) = refine(&resp, x, y);
        let (gx, gy) = ((px / cell) as usize, (py / cell) as usize);
        let mut clear = true;
        'g: for cy in gy.saturating_sub(1)..=(gy + 1).min(gh - 1) {
            for cx in gx.saturating_sub(1)..=(gx + 1).min(gw - 1) {
                for &(qx, qy) in &grid[cy * gw + cx] {
                    if (qx - px).hypot(qy - py) < nms_radius {
                        clear = false;
                        break 'g;
                    }
                }
            }
        }
        if clear {
            grid[gy * gw + gx].push((px, py));
            out.push(Keypoint { x: px, y: py, score: s });
        }
    }
    Ok(out)
}

/// Sub-pixel peak by separable parabola fit, clamped to half a pixel.
fn refine(resp: &Plane, x: u32, y: u32) -> (f64, f64) {
    let c = resp.get(x, y);
    let offset = |m: f64, p: f64| {
        let denom = m - 2.0 * c + p;
        if denom < 0.0 {
            (0.5 * (m - p) / denom).clamp(-0.5, 0.5)
        } else {
            0.0
        }
    };
    let dx = offset(resp.get(x - 1, y), resp.get(x + 1, y));
    let dy = offset(resp.get(x, y - 1), resp.get(x, y + 1));
    (x as f64 + dx, y as f64 + dy)
}
