use std::path::Path;
use std::process::Command;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use super::RddmError;
use crate::stitch::StitchResult;

/// How a stitched image is refined before evaluation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum Refiner {
    #[default]
    PassThrough,
    /// `command[0] command[1..] --input <png> --holes <png> --output <png>`
    External { command: Vec<String> },
}

pub fn refine(stitched: &StitchResult, refiner: &Refiner) -> Result<RgbImage, RddmError> {
    match refiner {
        Refiner::PassThrough => Ok(stitched.image.clone()),
        Refiner::External { command } => run_external(stitched, command),
    }
}

fn refiner_error(msg: impl Into<String>) -> RddmError {
    RddmError::Refiner(msg.into())
}

fn run_external(stitched: &StitchResult, command: &[String]) -> Result<RgbImage, RddmError> {
    let (program, args) = command.split_first().ok_or_else(|| refiner_error("empty refiner command"))?;
    let dir = tempfile::tempdir().map_err(|e| refiner_error(format!("temp dir: {e}")))?;
    let input = dir.path().join("input.png");
    let holes = dir.path().join("holes.png");
    let output = dir.path().join("output.png");
    save(&stitched.image, &input)?;
    stitched.hole_mask.to_gray().save(&holes).map_err(|e| refiner_error(format!("writing holes: {e}")))?;
    let out = Command::new(program)
        .args(args)
        .arg("--input")
        .arg(&input)
        .arg("--holes")
        .arg(&holes)
        .arg("--output")
        .arg(&output)
        .output()
        .map_err(|e| refiner_error(format!("could not start {program}: {e}")))?;
    if !out.status.success() {
        return Err(refiner_error(format!(
            "{program} exited with {}: {}",
            out.status,
            String::from_utf8_lossy(&out.stderr).trim()
        )));
    }
    let refined = image::open(&output).map_err(|e| refiner_error(format!("reading refiner output: {e}")))?.to_rgb8();
    if refined.dimensions() != stitched.image.dimensions() {
        return Err(refiner_error(format!(
            "refiner changed dimensions from {:?} to {:?}",
            stitched.image.dimensions(),
            refined.dimensions()
        )));
    }
    Ok(refined)
}

fn save(img: &RgbImage, path: &Path) -> Result<(), RddmError> {
    img.save(path).map_err(|e| refiner_error(format!("writing {}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::Mask;
    use crate::stitch::StitchCanvas;
    use image::Rgb;

    fn result() -> StitchResult {
        let image = RgbImage::from_fn(7, 5, |x, y| Rgb([(x * 30) as u8, (y * 50) as u8, 17]));
        StitchResult {
            image,
            hole_mask: Mask::new(7, 5, false),
            depth_buffer: vec![1.0; 35],
            canvas: StitchCanvas { offset: (0, 0), width: 7, height: 5, max_dim: 8192, dropped_samples: 0 },
            reference_view: 0,
            behind_camera: 0,
        }
    }

    fn sh(script: &str) -> Refiner {
        Refiner::External { command: vec!["sh".into(), "-c".into(), script.into(), "sh".into()] }
    }

    #[test]
    fn pass_through_is_identity() {
        let r = result();
        assert_eq!(refine(&r, &Refiner::PassThrough).unwrap(), r.image);
    }

    #[test]
    fn external_copy() {
        let r = result();
        assert_eq!(refine(&r, &sh(r#"cp "$2" "$6""#)).unwrap(), r.image);
    }

    #[test]
    fn external_failure_captures_stderr() {
        let err = refine(&result(), &sh("echo broken >&2; exit 3")).unwrap_err();
        assert!(err.to_string().contains("broken"), "{err}");
    }

    #[test]
    fn external_dimension_change_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let small = dir.path().join("small.png");
        RgbImage::new(3, 3).save(&small).unwrap();
        let err = refine(&result(), &sh(&format!(r#"cp "{}" "$6""#, small.display()))).unwrap_err();
        assert!(err.to_string().contains("dimensions"), "{err}");
    }

    #[test]
    fn config_serde() {
        let r: Refiner = serde_json::from_str(r#"{"mode":"external","command":["a","b"]}"#).unwrap();
        assert_eq!(r, Refiner::External { command: vec!["a".into(), "b".into()] });
        let p: Refiner = serde_json::from_str(r#"{"mode":"pass-through"}"#).unwrap();
        assert_eq!(p, Refiner::PassThrough);
    }
}
