use serde::{Deserialize, Serialize};

/// Procedural surface colour as a function of surface coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Texture {
    Checker {
        cell: f64,
        a: [u8; 3],
        b: [u8; 3],
    },
    Gradient {
        from: [u8; 3],
        to: [u8; 3],
        period: f64,
    },
    /// Smoothly interpolated random lattice colours.
    ValueNoise {
        seed: u64,
        cell: f64,
    },
    /// Piecewise-constant random colour per lattice cell.
    Mosaic {
        seed: u64,
        cell: f64,
    },
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn hash3(seed: u64, i: i64, j: i64) -> u64 {
    splitmix(splitmix(splitmix(seed) ^ i as u64) ^ (j as u64).rotate_left(32))
}

fn lattice_color(seed: u64, i: i64, j: i64) -> [f64; 3] {
    let h = hash3(seed, i, j);
    let ch = |k: u32| 16.0 + ((h >> (8 * k)) & 0xFF) as f64 * (224.0 / 255.0);
    [ch(0), ch(1), ch(2)]
}

fn to_u8(c: [f64; 3]) -> [u8; 3] {
    c.map(|v| v.round().clamp(0.0, 255.0) as u8)
}

impl Texture {
    pub fn sample(&self, s: f64, t: f64) -> [u8; 3] {
        match *self {
            Texture::Checker { cell, a, b } => {
                let parity = ((s / cell).floor() as i64 + (t / cell).floor() as i64).rem_euclid(2);
                if parity == 0 {
                    a
                } else {
                    b
                }
            }
            Texture::Gradient { from, to, period } => {
                let f = (s / period).rem_euclid(1.0);
                to_u8([0, 1, 2].map(|k| from[k] as f64 + f * (to[k] as f64 - from[k] as f64)))
            }
            Texture::ValueNoise { seed, cell } => {
                let (x, y) = (s / cell, t / cell);
                let (i, j) = (x.floor() as i64, y.floor() as i64);
                let smooth = |f: f64| f * f * (3.0 - 2.0 * f);
                let (fx, fy) = (smooth(x - i as f64), smooth(y - j as f64));
                let c00 = lattice_color(seed, i, j);
                let c10 = lattice_color(seed, i + 1, j);
                let c01 = lattice_color(seed, i, j + 1);
                let c11 = lattice_color(seed, i + 1, j + 1);
                to_u8([0, 1, 2].map(|k| {
                    let top = c00[k] + fx * (c10[k] - c00[k]);
                    let bottom = c01[k] + fx * (c11[k] - c01[k]);
                    top + fy * (bottom - top)
                }))
            }
            Texture::Mosaic { seed, cell } => {
                to_u8(lattice_color(seed, (s / cell).floor() as i64, (t / cell).floor() as i64))
            }
        }
    }
}
