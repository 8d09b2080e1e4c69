//! Reprojection-based image stitching: point-map fusion, z-buffered
//! reprojection onto a reference camera, a homography baseline, evaluation
//! metrics, residual-diffusion mathematics and a synthetic-scene oracle.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod camera;
pub mod io;
pub mod metrics;
pub mod parallax;
pub mod pointmap;
pub mod raster;
pub mod rddm;
pub mod registration;
pub mod stitch;
pub mod synth;

pub use camera::{CameraError, CameraExtrinsics, CameraIntrinsics, CameraModel};
pub use metrics::{MetricReport, MetricsError, StitchedImage};
pub use parallax::{assess_parallax, ParallaxAssessment, ParallaxClass, ParallaxThresholds};
pub use pointmap::{ColoredCloud, PointMap, Provenance};
pub use raster::Mask;
pub use registration::{baseline_stitch, BaselineConfig, Homography, RegistrationConfig, RegistrationError};
pub use stitch::{stitch, StitchConfig, StitchError, StitchReport, StitchResult, View};
pub use synth::{DatasetItem, ParallaxMode, SceneSpec};
