use nalgebra::{DMatrix, Matrix3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Pt, RegistrationError};

/// Planar projective transform, normalized so that `h33 = 1` whenever
/// `|h33| > 1e-12`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography {
    h: Matrix3<f64>,
}

impl Homography {
    pub fn new(h: Matrix3<f64>) -> Result<Self, RegistrationError> {
        if !h.iter().all(|v| v.is_finite()) || h.norm() == 0.0 {
            return Err(RegistrationError::Singular);
        }
        let h = if h[(2, 2)].abs() > 1e-12 { h / h[(2, 2)] } else { h / h.norm() };
        let scale = h.norm();
        if h.determinant().abs() <= 1e-12 * scale * scale * scale {
            return Err(RegistrationError::Singular);
        }
        Ok(Self { h })
    }

    pub fn identity() -> Self {
        Self { h: Matrix3::identity() }
    }

    pub fn translation(dx: f64, dy: f64) -> Self {
        Self { h: Matrix3::new(1.0, 0.0, dx, 0.0, 1.0, dy, 0.0, 0.0, 1.0) }
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.h
    }

    /// Maps a point; `None` when it lands on the line at infinity.
    #[inline]
    pub fn apply(&self, p: &Pt) -> Option<Pt> {
        let q = self.h * Vector3::new(p.x, p.y, 1.0);
        (q.z.abs() > 1e-12).then(|| Pt::new(q.x / q.z, q.y / q.z))
    }

    pub fn inverse(&self) -> Result<Self, RegistrationError> {
        let inv = self.h.try_inverse().ok_or(RegistrationError::Singular)?;
        Self::new(inv)
    }

    /// Composition `self ∘ other` (apply `other` first).
    pub fn compose(&self, other: &Homography) -> Result<Self, RegistrationError> {
        Self::new(self.h * other.h)
    }
}

/// RMS of forward and backward transfer distances for one pair.
pub fn symmetric_transfer_error(h: &Homography, h_inv: &Homography, a: &Pt, b: &Pt) -> f64 {
    let fwd = h.apply(a).map_or(f64::INFINITY, |p| (p - b).norm_squared());
    let bwd = h_inv.apply(b).map_or(f64::INFINITY, |p| (p - a).norm_squared());
    (0.5 * (fwd + bwd)).sqrt()
}

/// Similarity that moves the centroid to the origin and the mean distance
/// to `sqrt(2)`.
fn hartley(points: impl Iterator<Item = Pt> + Clone) -> Matrix3<f64> {
    let n = points.clone().count() as f64;
    let (sx, sy) = points.clone().fold((0.0, 0.0), |(x, y), p| (x + p.x, y + p.y));
    let (cx, cy) = (sx / n, sy / n);
    let mean = points.map(|p| (p.x - cx).hypot(p.y - cy)).sum::<f64>() / n;
    let s = if mean > 1e-12 { std::f64::consts::SQRT_2 / mean } else { 1.0 };
    Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0)
}

fn transform(t: &Matrix3<f64>, p: &Pt) -> Pt {
    Pt::new(t[(0, 0)] * p.x + t[(0, 2)], t[(1, 1)] * p.y + t[(1, 2)])
}

fn collinear(a: &Pt, b: &Pt, c: &Pt) -> bool {
    let area = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
    area.abs() < 1e-9
}

fn any_collinear_triple(p: &[Pt]) -> bool {
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            for k in j + 1..p.len() {
                if collinear(&p[i], &p[j], &p[k]) {
                    return true;
                }
            }
        }
    }
    false
}

/// Least-squares DLT with isotropic normalization of both point sets.
/// `pairs` are `(source, destination)`; the result maps source to destination.
pub fn estimate_homography_dlt(pairs: &[(Pt, Pt)]) -> Result<Homography, RegistrationError> {
    let n = pairs.len();
    if n < 4 {
        return Err(RegistrationError::TooFewPairs(n));
    }
    if !pairs.iter().all(|(a, b)| a.iter().chain(b.iter()).all(|v| v.is_finite())) {
        return Err(RegistrationError::Degenerate("non-finite coordinates"));
    }
    let ts = hartley(pairs.iter().map(|p| p.0));
    let td = hartley(pairs.iter().map(|p| p.1));
    let src: Vec<Pt> = pairs.iter().map(|p| transform(&ts, &p.0)).collect();
    let dst: Vec<Pt> = pairs.iter().map(|p| transform(&td, &p.1)).collect();
    if n == 4 && (any_collinear_triple(&src) || any_collinear_triple(&dst)) {
        return Err(RegistrationError::Degenerate("three collinear points in a minimal sample"));
    }

    // pad to at least 9 rows so the null vector is present in Vᵀ
    let rows = (2 * n).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (k, (s, d)) in src.iter().zip(&dst).enumerate() {
        let (x, y, u, v) = (s.x, s.y, d.x, d.y);
        let r = 2 * k;
        a[(r, 0)] = -x;
        a[(r, 1)] = -y;
        a[(r, 2)] = -1.0;
        a[(r, 6)] = u * x;
        a[(r, 7)] = u * y;
        a[(r, 8)] = u;
        a[(r + 1, 3)] = -x;
        a[(r + 1, 4)] = -y;
        a[(r + 1, 5)] = -1.0;
        a[(r + 1, 6)] = v * x;
        a[(r + 1, 7)] = v * y;
        a[(r + 1, 8)] = v;
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.ok_or(RegistrationError::Degenerate("svd failed"))?;
    let sv = &svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&i, &j| sv[i].total_cmp(&sv[j]));
    let (smallest, second) = (order[0], order[1]);
    let largest = sv[order[order.len() - 1]];
    if sv[second] <= 1e-10 * largest {
        return Err(RegistrationError::Degenerate("correspondences do not determine a unique homography"));
    }
    let h = v_t.row(smallest);
    let hn = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);
    let td_inv = td.try_inverse().ok_or(RegistrationError::Singular)?;
    let hm = Homography::new(td_inv * hn * ts).map_err(|_| RegistrationError::Degenerate("singular fit"))?;
    Ok(hm)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RansacParams {
    /// Inlier threshold on the symmetric transfer error, pixels.
    pub threshold: f64,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self { threshold: 3.0, max_iters: 2000, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct RansacOutput {
    pub homography: Homography,
    pub inliers: Vec<bool>,
    pub inlier_count: usize,
    /// RMS symmetric transfer error over the inliers.
    pub rms_error: f64,
}

struct Score {
    count: usize,
    sq_error: f64,
    inliers: Vec<bool>,
}

fn score(h: &Homography, pairs: &[(Pt, Pt)], threshold: f64) -> Option<Score> {
    let h_inv = h.inverse().ok()?;
    let mut inliers = vec![false; pairs.len()];
    let (mut count, mut sq_error) = (0, 0.0);
    for (i, (a, b)) in pairs.iter().enumerate() {
        let e = symmetric_transfer_error(h, &h_inv, a, b);
        if e <= threshold {
            inliers[i] = true;
            count += 1;
            sq_error += e * e;
        }
    }
    Some(Score { count, sq_error, inliers })
}

fn better(a: &Score, b: &Score) -> bool {
    a.count > b.count || (a.count == b.count && a.sq_error < b.sq_error)
}

/// RANSAC over minimal 4-point samples followed by least-squares refits on
/// the inlier set. Best model order is (inlier count, squared error,
/// iteration index); the sample sequence depends only on `seed`.
pub fn ransac_homography(pairs: &[(Pt, Pt)], params: &RansacParams) -> Result<RansacOutput, RegistrationError> {
    if pairs.len() < 4 {
        return Err(RegistrationError::Failure(format!("{} pairs (< 4)", pairs.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut best: Option<(Homography, Score)> = None;
    for _ in 0..params.max_iters {
        let idx = rand::seq::index::sample(&mut rng, pairs.len(), 4);
        let sample: Vec<(Pt, Pt)> = idx.iter().map(|i| pairs[i]).collect();
        let Ok(h) = estimate_homography_dlt(&sample) else { continue };
        let Some(s) = score(&h, pairs, params.threshold) else { continue };
        if best.as_ref().is_none_or(|(_, b)| better(&s, b)) {
            best = Some((h, s));
        }
    }
    let Some((mut h, mut s)) = best.filter(|(_, s)| s.count >= 4) else {
        return Err(RegistrationError::Failure("no model with at least 4 inliers".into()));
    };
    for _ in 0..10 {
        let subset: Vec<(Pt, Pt)> = pairs.iter().zip(&s.inliers).filter(|(_, &k)| k).map(|(p, _)| *p).collect();
        let Ok(refit) = estimate_homography_dlt(&subset) else { break };
        let Some(rs) = score(&refit, pairs, params.threshold) else { break };
        let improved = better(&rs, &s);
        if rs.count >= s.count {
            h = refit;
            s = rs;
        }
        if !improved {
            break;
        }
    }
    let rms_error = (s.sq_error / s.count as f64).sqrt();
    Ok(RansacOutput { homography: h, inlier_count: s.count, inliers: s.inliers, rms_error })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn known_h() -> Homography {
        Homography::new(Matrix3::new(0.9, 0.05, 12.0, -0.03, 1.1, -7.0, 1e-4, -2e-4, 1.0)).unwrap()
    }

    fn max_transfer(h: &Homography, pairs: &[(Pt, Pt)]) -> f64 {
        let inv = h.inverse().unwrap();
        pairs.iter().map(|(a, b)| symmetric_transfer_error(h, &inv, a, b)).fold(0.0, f64::max)
    }

    #[test]
    fn four_exact_points() {
        let h = known_h();
        let src = [Pt::new(0.0, 0.0), Pt::new(100.0, 5.0), Pt::new(90.0, 80.0), Pt::new(-3.0, 70.0)];
        let pairs: Vec<_> = src.iter().map(|p| (*p, h.apply(p).unwrap())).collect();
        let est = estimate_homography_dlt(&pairs).unwrap();
        assert!(max_transfer(&est, &pairs) < 1e-6);
        assert!((est.matrix() - h.matrix()).abs().max() < 1e-8);
    }

    #[test]
    fn identity_correspondences() {
        let pts = [Pt::new(1.0, 2.0), Pt::new(50.0, 3.0), Pt::new(40.0, 60.0), Pt::new(2.0, 45.0), Pt::new(20.0, 20.0)];
        let pairs: Vec<_> = pts.iter().map(|p| (*p, *p)).collect();
        let est = estimate_homography_dlt(&pairs).unwrap();
        assert!((est.matrix() - Matrix3::identity()).abs().max() < 1e-10);
    }

    #[test]
    fn collinear_minimal_sample_is_degenerate() {
        let src = [Pt::new(0.0, 0.0), Pt::new(1.0, 1.0), Pt::new(2.0, 2.0), Pt::new(0.0, 5.0)];
        let pairs: Vec<_> = src.iter().map(|p| (*p, Pt::new(p.x + 1.0, p.y * 2.0))).collect();
        assert!(matches!(estimate_homography_dlt(&pairs), Err(RegistrationError::Degenerate(_))));
    }

    #[test]
    fn too_few_pairs() {
        let pairs = vec![(Pt::origin(), Pt::origin()); 3];
        assert_eq!(estimate_homography_dlt(&pairs).unwrap_err(), RegistrationError::TooFewPairs(3));
        assert!(matches!(ransac_homography(&pairs, &RansacParams::default()), Err(RegistrationError::Failure(_))));
    }

    #[test]
    fn singular_matrix_rejected() {
        assert!(Homography::new(Matrix3::new(1.0, 2.0, 3.0, 2.0, 4.0, 6.0, 0.0, 0.0, 1.0)).is_err());
        assert!(Homography::new(Matrix3::zeros()).is_err());
        assert!(Homography::new(Matrix3::from_element(f64::NAN)).is_err());
    }
}
