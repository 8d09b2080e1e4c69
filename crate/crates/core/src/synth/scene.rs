use image::{Rgb, RgbImage};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::texture::{hash3, Texture};
use crate::camera::{CameraModel, MIN_DEPTH};
use crate::pointmap::PointMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    fn index(self) -> usize {
        self as usize
    }

    /// The two in-plane axes, in increasing order.
    fn others(self) -> (usize, usize) {
        match self {
            Axis::X => (1, 2),
            Axis::Y => (0, 2),
            Axis::Z => (0, 1),
        }
    }
}

/// Rectangle on the plane `p[axis] = offset`, bounded in the two other
/// coordinates by `min`/`max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisQuad {
    pub axis: Axis,
    pub offset: f64,
    pub min: [f64; 2],
    pub max: [f64; 2],
    pub texture: Texture,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AaBox {
    pub min: [f64; 3],
    pub max: [f64; 3],
    pub texture: Texture,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Primitive {
    Quad(AxisQuad),
    Box(AaBox),
}

/// Unbounded plane behind the primitives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Background {
    pub axis: Axis,
    pub offset: f64,
    pub texture: Texture,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub primitives: Vec<Primitive>,
    pub background: Option<Background>,
    /// Colour of pixels whose ray hits nothing.
    pub miss_color: [u8; 3],
}

/// Nearest intersection along a ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub distance: f64,
    pub point: Vector3<f64>,
    pub color: [u8; 3],
    /// Index into `primitives`; `None` for the background.
    pub primitive: Option<usize>,
}

const RAY_EPS: f64 = 1e-9;

fn plane_hit(o: &Vector3<f64>, d: &Vector3<f64>, axis: Axis, offset: f64) -> Option<(f64, Vector3<f64>)> {
    let k = axis.index();
    if d[k] == 0.0 {
        return None;
    }
    let s = (offset - o[k]) / d[k];
    if !(s > RAY_EPS) {
        return None;
    }
    let mut p = o + d * s;
    p[k] = offset;
    Some((s, p))
}

impl AxisQuad {
    fn intersect(&self, o: &Vector3<f64>, d: &Vector3<f64>) -> Option<(f64, Vector3<f64>, [u8; 3])> {
        let (s, p) = plane_hit(o, d, self.axis, self.offset)?;
        let (a, b) = self.axis.others();
        let inside = p[a] >= self.min[0] && p[a] <= self.max[0] && p[b] >= self.min[1] && p[b] <= self.max[1];
        inside.then(|| (s, p, self.texture.sample(p[a], p[b])))
    }

    /// Distance from `p` to the rectangle.
    pub fn distance(&self, p: &Vector3<f64>) -> f64 {
        let (a, b) = self.axis.others();
        let da = (self.min[0] - p[a]).max(p[a] - self.max[0]).max(0.0);
        let db = (self.min[1] - p[b]).max(p[b] - self.max[1]).max(0.0);
        let dn = p[self.axis.index()] - self.offset;
        (da * da + db * db + dn * dn).sqrt()
    }
}

impl AaBox {
    pub fn center(&self) -> Vector3<f64> {
        Vector3::new(
            0.5 * (self.min[0] + self.max[0]),
            0.5 * (self.min[1] + self.max[1]),
            0.5 * (self.min[2] + self.max[2]),
        )
    }

    fn intersect(&self, o: &Vector3<f64>, d: &Vector3<f64>) -> Option<(f64, Vector3<f64>, [u8; 3])> {
        let axes = [Axis::X, Axis::Y, Axis::Z];
        let mut best: Option<(f64, Vector3<f64>, [u8; 3])> = None;
        // test the three faces facing the ray origin
        for (face, &axis) in axes.iter().enumerate() {
            let k = axis.index();
            if d[k] == 0.0 {
                continue;
            }
            let (offset, side) = if d[k] > 0.0 { (self.min[k], 0) } else { (self.max[k], 1) };
            let Some((s, p)) = plane_hit(o, d, axis, offset) else { continue };
            let (a, b) = axis.others();
            if p[a] < self.min[a] || p[a] > self.max[a] || p[b] < self.min[b] || p[b] > self.max[b] {
                continue;
            }
            if best.is_none_or(|(bs, _, _)| s < bs) {
                let shift = (2 * face + side) as f64 * 101.0;
                best = Some((s, p, self.texture.sample(p[a] + shift, p[b])));
            }
        }
        best
    }

    /// Distance from `p` to the box surface.
    pub fn distance(&self, p: &Vector3<f64>) -> f64 {
        let mut outside = 0.0;
        let mut inside = f64::INFINITY;
        for k in 0..3 {
            let d = (self.min[k] - p[k]).max(p[k] - self.max[k]);
            outside += d.max(0.0).powi(2);
            inside = inside.min(-d);
        }
        if outside > 0.0 {
            outside.sqrt()
        } else {
            inside.max(0.0)
        }
    }
}

impl Primitive {
    fn intersect(&self, o: &Vector3<f64>, d: &Vector3<f64>) -> Option<(f64, Vector3<f64>, [u8; 3])> {
        match self {
            Primitive::Quad(q) => q.intersect(o, d),
            Primitive::Box(b) => b.intersect(o, d),
        }
    }

    pub fn distance(&self, p: &Vector3<f64>) -> f64 {
        match self {
            Primitive::Quad(q) => q.distance(p),
            Primitive::Box(b) => b.distance(p),
        }
    }
}

/// Image, world-space point map and camera-frame depth of a rendered view.
/// Missed pixels have NaN points and depths.
#[derive(Debug, Clone)]
pub struct RenderOutput {
    pub image: RgbImage,
    pub point_map: PointMap,
    pub depth: Vec<f64>,
}

impl SceneSpec {
    pub fn trace(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<Hit> {
        let mut best: Option<Hit> = None;
        for (i, prim) in self.primitives.iter().enumerate() {
            if let Some((s, p, c)) = prim.intersect(origin, dir) {
                if best.is_none_or(|b| s < b.distance) {
                    best = Some(Hit { distance: s, point: p, color: c, primitive: Some(i) });
                }
            }
        }
        if let Some(bg) = &self.background {
            if let Some((s, p)) = plane_hit(origin, dir, bg.axis, bg.offset) {
                if best.is_none_or(|b| s < b.distance) {
                    let (a, b) = bg.axis.others();
                    best = Some(Hit { distance: s, point: p, color: bg.texture.sample(p[a], p[b]), primitive: None });
                }
            }
        }
        best
    }

    /// Distance from `p` to the nearest surface of the scene.
    pub fn surface_distance(&self, p: &Vector3<f64>) -> f64 {
        let mut d = self.primitives.iter().map(|q| q.distance(p)).fold(f64::INFINITY, f64::min);
        if let Some(bg) = &self.background {
            d = d.min((p[bg.axis.index()] - bg.offset).abs());
        }
        d
    }

    /// Per-pixel ray casting; the nearest intersection wins.
    pub fn render(&self, camera: &CameraModel) -> RenderOutput {
        let (w, h) = (camera.width, camera.height);
        let origin = camera.extrinsics.center();
        let r_t = camera.extrinsics.rotation().transpose();
        let shaded: Vec<([u8; 3], [f64; 3], f64)> = (0..w as usize * h as usize)
            .into_par_iter()
            .map(|i| {
                let (x, y) = ((i % w as usize) as f64, (i / w as usize) as f64);
                let dir = r_t * camera.intrinsics.ray_direction(x, y);
                match self.trace(&origin, &dir) {
                    Some(hit) => {
                        let z = camera.extrinsics.transform(&hit.point).z;
                        if z > MIN_DEPTH {
                            (hit.color, [hit.point.x, hit.point.y, hit.point.z], z)
                        } else {
                            (self.miss_color, [f64::NAN; 3], f64::NAN)
                        }
                    }
                    None => (self.miss_color, [f64::NAN; 3], f64::NAN),
                }
            })
            .collect();
        let mut image = RgbImage::new(w, h);
        for (px, s) in image.pixels_mut().zip(&shaded) {
            *px = Rgb(s.0);
        }
        let points = shaded.iter().map(|s| s.1).collect();
        let depth = shaded.iter().map(|s| s.2).collect();
        RenderOutput { image, point_map: PointMap::from_points(w, h, points), depth }
    }

    /// Random boxes in front of a floor and a far background plane, for
    /// a camera at the origin looking along `+z` with `+y` down.
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tex = |k: i64, rng: &mut ChaCha8Rng| {
            let s = hash3(seed, k, 0);
            if rng.random_bool(0.7) {
                Texture::Mosaic { seed: s, cell: rng.random_range(0.08..0.16) }
            } else {
                Texture::ValueNoise { seed: s, cell: rng.random_range(0.08..0.14) }
            }
        };
        let mut primitives = Vec::new();
        let floor_y = rng.random_range(1.6..2.2);
        primitives.push(Primitive::Quad(AxisQuad {
            axis: Axis::Y,
            offset: floor_y,
            min: [-14.0, 0.5],
            max: [14.0, 18.0],
            texture: Texture::Mosaic { seed: hash3(seed, -1, 1), cell: 0.25 },
        }));
        let boxes = rng.random_range(3..=6);
        for k in 0..boxes {
            let c = [rng.random_range(-2.6..2.6), rng.random_range(-1.2..1.2), rng.random_range(4.5..9.0)];
            let half = [rng.random_range(0.3..0.9), rng.random_range(0.3..0.9), rng.random_range(0.3..0.9)];
            primitives.push(Primitive::Box(AaBox {
                min: [c[0] - half[0], c[1] - half[1], c[2] - half[2]],
                max: [c[0] + half[0], (c[1] + half[1]).min(floor_y), c[2] + half[2]],
                texture: tex(k as i64 + 1, &mut rng),
            }));
        }
        let background = Some(Background {
            axis: Axis::Z,
            offset: rng.random_range(11.0..14.0),
            texture: Texture::Mosaic { seed: hash3(seed, -2, 2), cell: 0.3 },
        });
        Self { primitives, background, miss_color: [0, 0, 0] }
    }

    /// A single textured plane `z = depth` covering the view.
    pub fn planar(depth: f64, seed: u64) -> Self {
        Self {
            primitives: vec![Primitive::Quad(AxisQuad {
                axis: Axis::Z,
                offset: depth,
                min: [-1e3, -1e3],
                max: [1e3, 1e3],
                texture: Texture::Mosaic { seed: hash3(seed, 7, 7), cell: depth * 0.02 },
            })],
            background: None,
            miss_color: [0, 0, 0],
        }
    }
}
