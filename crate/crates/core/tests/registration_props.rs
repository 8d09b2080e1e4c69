use image::{Rgb, RgbImage};
use nalgebra::Matrix3;
use proptest::prelude::*;
use reprostitch::registration::{
    estimate_homography_dlt, ransac_homography, symmetric_transfer_error, warp_homography, Pt, RansacParams,
};
use reprostitch::Homography;

/// Homographies that keep the 640×480 test region in front of the camera
/// with bounded distortion.
fn homography() -> impl Strategy<Value = Homography> {
    (
        (0.5..2.0f64, -0.3..0.3f64, -200.0..200.0f64),
        (-0.3..0.3f64, 0.5..2.0f64, -200.0..200.0f64),
        (-5e-4..5e-4f64, -5e-4..5e-4f64),
    )
        .prop_filter_map("degenerate", |((a, b, c), (d, e, f), (g, h))| {
            let m = Matrix3::new(a, b, c, d, e, f, g, h, 1.0);
            let w_ok = [(0.0, 0.0), (640.0, 0.0), (0.0, 480.0), (640.0, 480.0)]
                .iter()
                .all(|&(x, y)| g * x + h * y + 1.0 > 0.2);
            (w_ok && m.determinant().abs() > 0.1).then(|| Homography::new(m).ok()).flatten()
        })
}

fn points(n: usize) -> impl Strategy<Value = Vec<Pt>> {
    prop::collection::vec((0.0..640.0f64, 0.0..480.0f64).prop_map(|(x, y)| Pt::new(x, y)), n)
}

fn max_transfer(h: &Homography, pairs: &[(Pt, Pt)]) -> f64 {
    let inv = h.inverse().unwrap();
    pairs.iter().map(|(a, b)| symmetric_transfer_error(h, &inv, a, b)).fold(0.0, f64::max)
}

proptest! {
    #[test]
    fn dlt_is_exact_on_noiseless_pairs(h in homography(), src in points(12)) {
        let pairs: Vec<(Pt, Pt)> = src.iter().map(|p| (*p, h.apply(p).unwrap())).collect();
        let est = estimate_homography_dlt(&pairs).unwrap();
        prop_assert!(max_transfer(&est, &pairs) < 1e-6);
    }

    #[test]
    fn ransac_is_deterministic_and_monotone_in_threshold(
        h in homography(),
        src in points(40),
        junk in points(20),
        seed in any::<u64>(),
    ) {
        let mut pairs: Vec<(Pt, Pt)> = src.iter().map(|p| (*p, h.apply(p).unwrap())).collect();
        pairs.extend(junk.iter().zip(src.iter().rev()).map(|(a, b)| (*a, *b)));
        let run = |threshold| {
            ransac_homography(&pairs, &RansacParams { threshold, max_iters: 300, seed }).unwrap()
        };
        let a = run(2.0);
        let b = run(2.0);
        prop_assert_eq!(a.homography.matrix(), b.homography.matrix());
        prop_assert_eq!(&a.inliers, &b.inliers);
        let mut last = 0;
        for t in [0.5, 1.0, 2.0, 4.0, 8.0] {
            let n = run(t).inlier_count;
            prop_assert!(n >= last, "threshold {t}: {n} < {last}");
            last = n;
        }
    }

    #[test]
    fn identity_warp_is_bit_exact(w in 2u32..40, h in 2u32..40, seed in any::<u32>()) {
        let img = RgbImage::from_fn(w, h, |x, y| {
            let v = (x.wrapping_mul(2654435761) ^ y.wrapping_mul(40503) ^ seed) as u8;
            Rgb([v, v.wrapping_mul(3), v ^ 0x5a])
        });
        let out = warp_homography(&img, &Homography::identity(), w, h, (0, 0)).unwrap();
        prop_assert_eq!(out.valid.count(), (w * h) as usize);
        prop_assert_eq!(out.image, img);
    }
}
