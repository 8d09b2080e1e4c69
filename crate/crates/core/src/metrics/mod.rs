//! Evaluation stack: PSNR/SSIM, the pad–register–measure protocol for
//! stitched images, registration success rate, and Sampson epipolar error.

mod epipolar;
mod protocol;
mod quality;

pub use epipolar::{
    fundamental_from_cameras, sampson_distance, sampson_error, stitched_pair_matches, stitched_pair_sampson,
    FundamentalMatrix, SampsonConfig, SampsonReport,
};
pub use protocol::{
    aggregate, evaluate_stitched, format_rsr, rsr, write_pairs_csv, Aggregate, EvalConfig, EvaluationReport,
    MetricReport, PairReport, QualityScores,
};
pub use quality::{gaussian_kernel, psnr, ssim, SsimParams, PSNR_CAP};

use image::RgbImage;
use thiserror::Error;

use crate::camera::CameraError;
use crate::raster::Mask;
use crate::registration::RegistrationError;
use crate::stitch::StitchResult;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("dimension mismatch: {a:?} vs {b:?} (mask {mask:?})")]
    DimensionMismatch { a: (u32, u32), b: (u32, u32), mask: (u32, u32) },
    #[error("no valid pixels to evaluate")]
    EmptyMask,
    #[error("image {width}x{height} is smaller than the {window}px window")]
    ImageSmallerThanWindow { window: u32, width: u32, height: u32 },
    #[error("dimension contract violated: {0}")]
    Contract(String),
    #[error("rsr requires n >= 1 and 0 <= failures <= n (n={n}, failures={failures})")]
    InvalidCounts { n: usize, failures: usize },
    #[error("epipolar geometry undefined for pure rotation")]
    PureRotation,
    #[error(transparent)]
    Camera(#[from] CameraError),
    #[error(transparent)]
    Registration(#[from] RegistrationError),
}

/// A stitched canvas as consumed by the evaluators: the image, its hole
/// mask and the canvas offset of the reference camera's pixel frame.
#[derive(Debug, Clone, Copy)]
pub struct StitchedImage<'a> {
    pub image: &'a RgbImage,
    pub holes: &'a Mask,
    pub offset: (i64, i64),
}

impl<'a> From<&'a StitchResult> for StitchedImage<'a> {
    fn from(r: &'a StitchResult) -> Self {
        Self { image: &r.image, holes: &r.hole_mask, offset: r.canvas.offset }
    }
}
