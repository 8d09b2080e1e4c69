//! Synthetic scenes with exact cameras, point maps and wide ground-truth
//! renderings, used as the oracle for the stitcher and the metrics.

mod dataset;
mod scene;
mod texture;

pub use dataset::{
    base_camera, generate_dataset, generate_pair, overlap_fraction, wide_camera, write_dataset, DatasetItem,
    GeneratedItem, ItemFiles, Manifest, ManifestItem, ParallaxMeta, ParallaxMode, SynthConfig, ViewData, CAMERAS,
    GT_IMAGE, MANIFEST, MAX_ROTATION_DEG, MIN_OVERLAP, REF_IMAGE, REF_PMAP, SLIGHT_RATIO, TGT_IMAGE, TGT_PMAP,
    VERY_LARGE_RATIO,
};
pub use scene::{AaBox, Axis, AxisQuad, Background, Hit, Primitive, RenderOutput, SceneSpec};
pub use texture::Texture;

use thiserror::Error;

use crate::camera::CameraError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("scene is not visible from the base camera")]
    SceneNotVisible,
    #[error("no target pose with enough overlap after {attempts} attempts")]
    InsufficientOverlap { attempts: usize },
    #[error("dataset must contain at least one scene, item and mode")]
    EmptyDataset,
    #[error(transparent)]
    Camera(#[from] CameraError),
}

/// Renders `scene` from `camera`.
pub fn render_view(scene: &SceneSpec, camera: &crate::camera::CameraModel) -> RenderOutput {
    scene.render(camera)
}
