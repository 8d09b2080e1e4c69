use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;
use reprostitch::camera::{axis_angle, project_pinhole, relative_pose, world_to_camera};
use reprostitch::{CameraExtrinsics, CameraIntrinsics};

fn rotation() -> impl Strategy<Value = Matrix3<f64>> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -3.1..3.1f64).prop_filter_map("zero axis", |(x, y, z, a)| {
        let axis = Vector3::new(x, y, z);
        (axis.norm() > 1e-3).then(|| axis_angle(&axis, a))
    })
}

fn vec3(r: f64) -> impl Strategy<Value = Vector3<f64>> {
    (-r..r, -r..r, -r..r).prop_map(|(x, y, z)| Vector3::new(x, y, z))
}

fn extrinsics() -> impl Strategy<Value = CameraExtrinsics> {
    (rotation(), vec3(50.0)).prop_map(|(r, t)| CameraExtrinsics::new(r, t).expect("valid rotation"))
}

fn intrinsics() -> impl Strategy<Value = CameraIntrinsics> {
    (50.0..2000.0f64, 0.8..1.25f64, -500.0..1500.0f64, -500.0..1500.0f64, -5.0..5.0f64)
        .prop_map(|(f, aspect, cx, cy, s)| CameraIntrinsics::with_skew(f, f * aspect, cx, cy, s).expect("valid"))
}

fn ortho_error(r: &Matrix3<f64>) -> f64 {
    (r.transpose() * r - Matrix3::identity()).abs().max()
}

proptest! {
    #[test]
    fn identity_extrinsics_leave_points_unchanged(pts in prop::collection::vec(vec3(1e6), 1..40)) {
        let out = world_to_camera(&pts, &CameraExtrinsics::identity());
        prop_assert!(out.rejected.is_empty());
        prop_assert_eq!(out.points, pts);
    }

    #[test]
    fn back_projection_round_trips(k in intrinsics(), u in -200.0..2200.0f64, v in -200.0..2200.0f64, z in 1e-3..1e4f64) {
        let p = k.unproject(u, v, z);
        let proj = project_pinhole(&[p], &k);
        prop_assert_eq!(proj.pixels.len(), 1);
        let px = proj.pixels[0];
        prop_assert!((px.u - u).abs() < 1e-6 && (px.v - v).abs() < 1e-6, "{} {} vs {} {}", px.u, px.v, u, v);
        prop_assert!((px.depth - z).abs() <= 1e-12 * z);
    }

    #[test]
    fn relative_pose_to_self_is_identity(e in extrinsics()) {
        let rel = relative_pose(&e, &e).unwrap();
        prop_assert!((rel.rotation() - Matrix3::identity()).abs().max() < 1e-12);
        prop_assert!(rel.translation().norm() < 1e-12 * (1.0 + e.translation().norm()));
    }

    #[test]
    fn relative_pose_composes_transforms(a in extrinsics(), b in extrinsics(), p in vec3(100.0)) {
        let rel = relative_pose(&a, &b).unwrap();
        prop_assert!(ortho_error(rel.rotation()) < 1e-12);
        let direct = b.transform(&p);
        let via = rel.transform(&a.transform(&p));
        prop_assert!((direct - via).norm() < 1e-9 * (1.0 + direct.norm()));
    }

    #[test]
    fn non_orthonormal_rotation_is_rejected(r in rotation(), eps in 1e-6..0.5f64) {
        let mut bad = r;
        bad[(0, 0)] += eps;
        prop_assert!(CameraExtrinsics::new(bad, Vector3::zeros()).is_err());
    }
}
