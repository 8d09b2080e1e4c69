//! Dense point maps and fused colored clouds.

use nalgebra::Vector3;

/// Per-pixel world coordinates for one view. Invalid pixels hold NaN triples.
#[derive(Debug, Clone, PartialEq)]
pub struct PointMap {
    width: u32,
    height: u32,
    points: Vec<[f64; 3]>,
}

impl PointMap {
    pub fn new_invalid(width: u32, height: u32) -> Self {
        Self { width, height, points: vec![[f64::NAN; 3]; width as usize * height as usize] }
    }

    /// Builds a map from row-major points. Entries with any non-finite
    /// component are normalized to the NaN triple.
    pub fn from_points(width: u32, height: u32, mut points: Vec<[f64; 3]>) -> Self {
        assert_eq!(points.len(), width as usize * height as usize, "point map size mismatch");
        for p in &mut points {
            if !p.iter().all(|v| v.is_finite()) {
                *p = [f64::NAN; 3];
            }
        }
        Self { width, height, points }
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

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn get(&self, x: u32, y: u32) -> Option<Vector3<f64>> {
        let p = self.points[y as usize * self.width as usize + x as usize];
        p[0].is_finite().then(|| Vector3::new(p[0], p[1], p[2]))
    }

    pub fn set(&mut self, x: u32, y: u32, p: Option<Vector3<f64>>) {
        let i = y as usize * self.width as usize + x as usize;
        self.points[i] = match p {
            Some(p) if p.iter().all(|v| v.is_finite()) => [p.x, p.y, p.z],
            _ => [f64::NAN; 3],
        };
    }

    /// Valid entries with their row-major pixel index.
    pub fn valid_points(&self) -> impl Iterator<Item = (u32, Vector3<f64>)> + '_ {
        self.points
            .iter()
            .enumerate()
            .filter(|(_, p)| p[0].is_finite())
            .map(|(i, p)| (i as u32, Vector3::new(p[0], p[1], p[2])))
    }

    pub fn valid_count(&self) -> usize {
        self.points.iter().filter(|p| p[0].is_finite()).count()
    }
}

/// Where a cloud point came from. The derived ordering (view, then pixel)
/// is the z-buffer tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Provenance {
    pub view: u32,
    pub pixel: u32,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ColoredCloud {
    pub positions: Vec<Vector3<f64>>,
    pub colors: Vec<[u8; 3]>,
    pub source: Vec<Provenance>,
}

impl ColoredCloud {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn push(&mut self, p: Vector3<f64>, color: [u8; 3], source: Provenance) {
        debug_assert!(p.iter().all(|v| v.is_finite()));
        self.positions.push(p);
        self.colors.push(color);
        self.source.push(source);
    }
}
