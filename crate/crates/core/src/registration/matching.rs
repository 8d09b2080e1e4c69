use rayon::prelude::*;

use super::{Keypoint, Pt, RegistrationError};
use crate::raster::Plane;

/// Paired correspondences `(a, b)`. `inlier` stays `None` until a robust
/// estimator has classified the pairs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MatchSet {
    pub pairs: Vec<(Pt, Pt)>,
    pub scores: Vec<f64>,
    pub inlier: Option<Vec<bool>>,
}

impl MatchSet {
    pub fn from_pairs(pairs: Vec<(Pt, Pt)>) -> Self {
        let scores = vec![1.0; pairs.len()];
        Self { pairs, scores, inlier: None }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Swaps the roles of the two images.
    pub fn transposed(&self) -> Self {
        Self {
            pairs: self.pairs.iter().map(|&(a, b)| (b, a)).collect(),
            scores: self.scores.clone(),
            inlier: self.inlier.clone(),
        }
    }
}

/// Zero-mean, unit-norm patch around the keypoint's nearest pixel.
fn descriptor(img: &Plane, k: &Keypoint, r: i64) -> Option<Vec<f64>> {
    let (cx, cy) = (k.x.round() as i64, k.y.round() as i64);
    if cx < r || cy < r || cx + r >= img.width as i64 || cy + r >= img.height as i64 {
        return None;
    }
    let mut d = Vec::with_capacity(((2 * r + 1) * (2 * r + 1)) as usize);
    for y in cy - r..=cy + r {
        for x in cx - r..=cx + r {
            d.push(img.get(x as u32, y as u32));
        }
    }
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    d.iter_mut().for_each(|v| *v -= mean);
    let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm < 1e-9 {
        return None;
    }
    d.iter_mut().for_each(|v| *v /= norm);
    Some(d)
}

/// First index of the maximum; NaN-free inputs assumed.
fn argmax(scores: impl Iterator<Item = f64>) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scores.enumerate() {
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    best
}

/// Mutual-best matching under zero-normalized cross-correlation. Pairs are
/// emitted in order of their `a` keypoint.
pub fn match_patches(
    img_a: &Plane,
    kps_a: &[Keypoint],
    img_b: &Plane,
    kps_b: &[Keypoint],
    patch: u32,
    min_ncc: f64,
) -> Result<MatchSet, RegistrationError> {
    match_patches_unique(img_a, kps_a, img_b, kps_b, patch, min_ncc, 1.0)
}

/// Descriptor distance of unit-norm zero-mean patches with correlation `s`.
fn ncc_distance(s: f64) -> f64 {
    (2.0 - 2.0 * s).max(0.0).sqrt()
}

/// Mutual-best matching with a distance-ratio test: a match is kept only if
/// its descriptor distance is below `max_ratio` times the distance to the
/// runner-up in both directions. `max_ratio = 1` disables the test.
pub fn match_patches_unique(
    img_a: &Plane,
    kps_a: &[Keypoint],
    img_b: &Plane,
    kps_b: &[Keypoint],
    patch: u32,
    min_ncc: f64,
    max_ratio: f64,
) -> Result<MatchSet, RegistrationError> {
    if patch < 5 || patch.is_multiple_of(2) {
        return Err(RegistrationError::InvalidPatch(patch));
    }
    let r = (patch / 2) as i64;
    let da: Vec<(usize, Vec<f64>)> =
        kps_a.iter().enumerate().filter_map(|(i, k)| descriptor(img_a, k, r).map(|d| (i, d))).collect();
    let db: Vec<(usize, Vec<f64>)> =
        kps_b.iter().enumerate().filter_map(|(i, k)| descriptor(img_b, k, r).map(|d| (i, d))).collect();
    let mut out = MatchSet::default();
    if da.is_empty() || db.is_empty() {
        return Ok(out);
    }
    let ncc: Vec<Vec<f64>> = da
        .par_iter()
        .map(|(_, a)| db.iter().map(|(_, b)| a.iter().zip(b).map(|(x, y)| x * y).sum()).collect())
        .collect();
    let best_b: Vec<(usize, f64)> = ncc.iter().map(|row| argmax(row.iter().copied()).expect("non-empty row")).collect();
    let best_a: Vec<usize> =
        (0..db.len()).map(|j| argmax(ncc.iter().map(|row| row[j])).expect("non-empty column").0).collect();
    let distinct = |best: f64, scores: &mut dyn Iterator<Item = f64>| {
        if max_ratio >= 1.0 {
            return true;
        }
        let second = scores.fold(f64::NEG_INFINITY, f64::max);
        !second.is_finite() || ncc_distance(best) < max_ratio * ncc_distance(second)
    };
    for (i, &(j, s)) in best_b.iter().enumerate() {
        if best_a[j] != i || s < min_ncc {
            continue;
        }
        let row = &ncc[i];
        let unique = distinct(s, &mut row.iter().enumerate().filter(|(k, _)| *k != j).map(|(_, v)| *v))
            && distinct(s, &mut ncc.iter().enumerate().filter(|(k, _)| *k != i).map(|(_, r)| r[j]));
        if unique {
            let ka = &kps_a[da[i].0];
            let kb = &kps_b[db[j].0];
            out.pairs.push((Pt::new(ka.x, ka.y), Pt::new(kb.x, kb.y)));
            out.scores.push(s);
        }
    }
    Ok(out)
}
