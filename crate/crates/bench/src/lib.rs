//! Shared fixtures for the benchmarks in `benches/`.

use reprostitch::synth::{base_camera, generate_pair, ParallaxMode, SceneSpec};
use reprostitch::{CameraModel, DatasetItem, View};

/// Very-large-parallax synthetic pair at `size`×`size`.
pub fn item(size: u32, seed: u64) -> DatasetItem {
    let scene = SceneSpec::random(seed);
    generate_pair(&scene, &base_camera(size, size).expect("camera"), ParallaxMode::VeryLarge, seed).expect("pair")
}

pub fn views(it: &DatasetItem) -> (Vec<View>, Vec<CameraModel>) {
    let views = vec![
        View { point_map: it.reference.point_map.clone(), image: it.reference.image.clone() },
        View { point_map: it.target.point_map.clone(), image: it.target.image.clone() },
    ];
    (views, vec![it.reference.camera, it.target.camera])
}
