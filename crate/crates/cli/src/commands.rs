use std::fs;
use std::path::{Path, PathBuf};

use image::RgbImage;
use rayon::prelude::*;
use reprostitch::io::{read_camera_models, read_point_map, read_rgb, write_pmap, write_png, Pmap};
use reprostitch::metrics::{
    aggregate, evaluate_stitched, format_rsr, stitched_pair_sampson, write_pairs_csv, MetricsError, PairReport,
    StitchedImage,
};
use reprostitch::rddm::{refine, run_checks};
use reprostitch::synth::{generate_dataset, write_dataset, ManifestItem, MANIFEST};
use reprostitch::{assess_parallax, baseline_stitch, stitch, ParallaxAssessment, StitchReport, StitchResult};
use serde::{Deserialize, Serialize};

use crate::config::{Method, RunConfig};
use crate::error::CliError;
use crate::item::{is_dataset, item_dir, load_item, read_holes, read_manifest};

pub const STITCHED: &str = "stitched.png";
pub const HOLES: &str = "holes.png";
pub const DEPTH: &str = "depth.pmap";
pub const STITCHED_ALT: &str = "stitched_alt.png";
pub const HOLES_ALT: &str = "holes_alt.png";
pub const STITCH_REPORT: &str = "stitch_report.json";
pub const EVAL_REPORT: &str = "eval_report.json";
pub const EVAL_PAIRS: &str = "eval_pairs.csv";
pub const PARALLAX: &str = "parallax.json";

/// Contents of `stitch_report.json`. `companion` describes the stitch
/// anchored on another view, written as `stitched_alt.png`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StitchOutput {
    pub method: Method,
    #[serde(flatten)]
    pub stitch: StitchReport,
    pub companion: Option<StitchReport>,
    pub config: serde_json::Value,
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    fs::write(path, text + "\n").map_err(|e| CliError::write(path, e))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::write(dir, e))
}

fn write_image(path: &Path, img: &RgbImage) -> Result<(), CliError> {
    write_png(path, img).map_err(|e| CliError::write(path, e))
}

pub fn synth(config: &RunConfig, out: &Path) -> Result<PathBuf, CliError> {
    create_dir(out)?;
    let items = config
        .thread_pool()?
        .install(|| generate_dataset(&config.synth))
        .map_err(|e| CliError::Failed(format!("dataset generation: {e}")))?;
    write_dataset(out, &config.synth, &items).map_err(|e| CliError::Env(e.to_string()))?;
    log::info!("wrote {} items to {}", items.len(), out.display());
    Ok(out.join(MANIFEST))
}

fn run_method(
    config: &RunConfig,
    views: &[reprostitch::View],
    cams: &[reprostitch::CameraModel],
    reference: usize,
) -> Result<StitchResult, CliError> {
    match config.method {
        Method::Pis3r => stitch(views, cams, reference, &config.stitch).map_err(|e| CliError::Failed(e.to_string())),
        Method::HomographyBaseline => {
            if views.len() != 2 {
                return Err(CliError::Invalid(format!(
                    "homography-baseline stitches exactly two views, item has {}",
                    views.len()
                )));
            }
            let mut r = baseline_stitch(&views[reference].image, &views[1 - reference].image, &config.baseline)
                .map_err(|e| CliError::Failed(format!("homography-baseline: {e}")))?;
            r.reference_view = reference;
            Ok(r)
        }
    }
}

/// Stitches one item directory into `out`.
pub fn stitch_item(config: &RunConfig, dir: &Path, out: &Path) -> Result<StitchOutput, CliError> {
    let (views, cams) = load_item(dir)?;
    let reference = config.reference;
    if reference >= views.len() {
        return Err(CliError::Invalid(format!("reference {reference} out of range for {} views", views.len())));
    }
    let primary = run_method(config, &views, &cams, reference)?;
    let companion = (0..views.len()).find(|&i| i != reference).and_then(|i| {
        run_method(config, &views, &cams, i)
            .inspect_err(|e| log::warn!("{}: companion stitch on view {i} failed: {e}", dir.display()))
            .ok()
    });
    let refined = refine(&primary, &config.diffusion).map_err(|e| CliError::Failed(e.to_string()))?;

    create_dir(out)?;
    write_image(&out.join(STITCHED), &refined)?;
    write_png(&out.join(HOLES), &primary.hole_mask.to_gray()).map_err(|e| CliError::write(&out.join(HOLES), e))?;
    let depth = Pmap::from_scalars(primary.canvas.width, primary.canvas.height, &primary.depth_buffer)
        .expect("depth buffer matches canvas");
    write_pmap(&out.join(DEPTH), &depth).map_err(|e| CliError::write(&out.join(DEPTH), e))?;
    if let Some(c) = &companion {
        let img = refine(c, &config.diffusion).map_err(|e| CliError::Failed(e.to_string()))?;
        write_image(&out.join(STITCHED_ALT), &img)?;
        write_png(&out.join(HOLES_ALT), &c.hole_mask.to_gray())
            .map_err(|e| CliError::write(&out.join(HOLES_ALT), e))?;
    }
    let report = StitchOutput {
        method: config.method,
        stitch: primary.report(),
        companion: companion.map(|c| c.report()),
        config: config.echo(),
    };
    write_json(&out.join(STITCH_REPORT), &report)?;
    Ok(report)
}

#[derive(Debug, Serialize)]
struct StitchSummaryEntry {
    item: String,
    ok: bool,
    hole_fraction: Option<f64>,
    error: Option<String>,
}

/// Stitches an item directory, or every item of a dataset root into
/// `out/<item id>/`. Failed items do not stop the others; the first
/// failure (by item id) decides the exit status.
pub fn stitch_cmd(config: &RunConfig, input: &Path, out: &Path) -> Result<String, CliError> {
    if !is_dataset(input) {
        let r = stitch_item(config, input, out)?;
        return Ok(format!("{}: hole fraction {:.4}", out.display(), r.stitch.hole_fraction));
    }
    let manifest = read_manifest(input)?;
    let mut results: Vec<(String, Result<StitchOutput, CliError>)> = config.thread_pool()?.install(|| {
        manifest
            .items
            .par_iter()
            .map(|it| {
                let r = stitch_item(config, &item_dir(input, &it.files.cameras), &out.join(&it.id));
                (it.id.clone(), r)
            })
            .collect()
    });
    results.sort_by(|a, b| a.0.cmp(&b.0));
    let summary: Vec<StitchSummaryEntry> = results
        .iter()
        .map(|(id, r)| StitchSummaryEntry {
            item: id.clone(),
            ok: r.is_ok(),
            hole_fraction: r.as_ref().ok().map(|o| o.stitch.hole_fraction),
            error: r.as_ref().err().map(|e| e.to_string()),
        })
        .collect();
    create_dir(out)?;
    write_json(&out.join("stitch_summary.json"), &summary)?;
    let failed = summary.iter().filter(|s| !s.ok).count();
    if let Some((id, Err(err))) = results.into_iter().find(|(_, r)| r.is_err()) {
        log::error!("{failed} of {} items failed", summary.len());
        return Err(match err {
            CliError::Failed(m) => CliError::Failed(format!("{failed} item(s) failed, first {id}: {m}")),
            other => other,
        });
    }
    Ok(format!("stitched {} items into {}", summary.len(), out.display()))
}

fn read_stitch_output(path: &Path) -> Result<Option<StitchOutput>, CliError> {
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(path).map_err(|e| CliError::malformed(path, e))?;
    serde_json::from_str(&text).map(Some).map_err(|e| CliError::malformed(path, e))
}

fn metrics_error(path: &Path, e: MetricsError) -> CliError {
    match e {
        MetricsError::Contract(_) => CliError::malformed(path, e),
        other => CliError::Failed(format!("{}: {other}", path.display())),
    }
}

fn eval_item(config: &RunConfig, dataset: &Path, stitched: &Path, item: &ManifestItem) -> Result<PairReport, CliError> {
    let dir = stitched.join(&item.id);
    let reference = read_rgb(&dataset.join(&item.files.reference))?;
    let gt = read_rgb(&dataset.join(&item.files.gt))?;
    let image_path = dir.join(STITCHED);
    let image = read_rgb(&image_path)?;
    let holes = read_holes(&dir.join(HOLES), &image)?;
    let report = read_stitch_output(&dir.join(STITCH_REPORT))?;
    let offset = report.as_ref().map_or((0, 0), |r| (r.stitch.offset[0], r.stitch.offset[1]));
    let view = StitchedImage { image: &image, holes: &holes, offset };
    let metrics = evaluate_stitched(&view, &reference, &gt, &config.eval).map_err(|e| metrics_error(&image_path, e))?;

    let mut sampson_mean = None;
    if let Some(comp) = report.as_ref().and_then(|r| r.companion.as_ref().map(|c| (r, c))) {
        let (primary, companion) = comp;
        let alt_path = dir.join(STITCHED_ALT);
        if alt_path.exists() {
            let cams = read_camera_models(&dataset.join(&item.files.cameras))?;
            let cam = |i: usize| {
                cams.get(i).map(|c| c.1).ok_or_else(|| {
                    CliError::malformed(&dir.join(STITCH_REPORT), format!("view {i} not in cameras.json"))
                })
            };
            let (cam_a, cam_b) = (cam(primary.stitch.reference_view)?, cam(companion.reference_view)?);
            let alt = read_rgb(&alt_path)?;
            let alt_holes = read_holes(&dir.join(HOLES_ALT), &alt)?;
            let alt_view =
                StitchedImage { image: &alt, holes: &alt_holes, offset: (companion.offset[0], companion.offset[1]) };
            match stitched_pair_sampson(&view, &cam_a, &alt_view, &cam_b, &config.sampson) {
                Ok(r) => sampson_mean = r.mean,
                Err(e) => log::info!("{}: sampson evaluation skipped: {e}", item.id),
            }
        }
    }
    Ok(PairReport { item: item.id.clone(), metrics, sampson_mean })
}

/// Evaluates the stitched outputs under `stitched/<item id>/` against the
/// dataset's ground truth.
pub fn eval_cmd(config: &RunConfig, dataset: &Path, stitched: &Path, out: &Path) -> Result<String, CliError> {
    let manifest = read_manifest(dataset)?;
    let missing: Vec<String> = manifest
        .items
        .iter()
        .map(|it| stitched.join(&it.id).join(STITCHED))
        .filter(|p| !p.is_file())
        .map(|p| p.display().to_string())
        .collect();
    if !missing.is_empty() {
        return Err(CliError::Incomplete(missing));
    }
    let pairs: Vec<Result<PairReport, CliError>> = config
        .thread_pool()?
        .install(|| manifest.items.par_iter().map(|it| eval_item(config, dataset, stitched, it)).collect());
    let pairs = pairs.into_iter().collect::<Result<Vec<_>, _>>()?;
    let report = aggregate(pairs, config.echo()).map_err(|e| CliError::Failed(e.to_string()))?;
    create_dir(out)?;
    write_json(&out.join(EVAL_REPORT), &report)?;
    let csv_path = out.join(EVAL_PAIRS);
    let file = fs::File::create(&csv_path).map_err(|e| CliError::write(&csv_path, e))?;
    write_pairs_csv(&report, file).map_err(|e| CliError::write(&csv_path, e))?;

    let a = &report.aggregate;
    let opt = |v: Option<f64>, digits: usize| v.map_or("n/a".to_string(), |v| format!("{v:.digits$}"));
    Ok(format!(
        "pairs {}  RSR {}\nall pairs:  PSNR {}  SSIM {}\nregistered: PSNR {}  SSIM {}\nSampson {}  LPIPS {}",
        a.pairs,
        format_rsr(a.rsr),
        opt(a.psnr_mean, 2),
        opt(a.ssim_mean, 4),
        opt(a.psnr_mean_registered, 2),
        opt(a.ssim_mean_registered, 4),
        opt(a.sampson_mean, 4),
        a.lpips
    ))
}

#[derive(Debug, Serialize)]
struct ClassifyOutput {
    #[serde(flatten)]
    assessment: ParallaxAssessment,
    reference_view: usize,
    other_view: usize,
    thresholds: reprostitch::ParallaxThresholds,
}

/// Parallax assessment of the reference view against the first other view
/// of `cameras`; `pmap` is the reference view's point map.
pub fn classify_cmd(config: &RunConfig, cameras: &Path, pmap: &Path, out: Option<&Path>) -> Result<String, CliError> {
    let records = read_camera_models(cameras)?;
    let reference = config.reference;
    if reference >= records.len() {
        return Err(CliError::malformed(
            cameras,
            format!("reference {reference} out of range for {} views", records.len()),
        ));
    }
    let other = (0..records.len())
        .find(|&i| i != reference)
        .ok_or_else(|| CliError::malformed(cameras, "need at least two views"))?;
    let pm = read_point_map(pmap)?;
    let a = assess_parallax(&records[reference].1.extrinsics, &records[other].1.extrinsics, &pm, &config.parallax)
        .map_err(|e| CliError::malformed(pmap, e))?;
    let output =
        ClassifyOutput { assessment: a, reference_view: reference, other_view: other, thresholds: config.parallax };
    let text = serde_json::to_string_pretty(&output).expect("assessment serializes");
    if let Some(dir) = out {
        create_dir(dir)?;
        write_json(&dir.join(PARALLAX), &output)?;
    }
    Ok(text)
}

pub fn rddm_check_cmd(seed: u64) -> Result<String, CliError> {
    let checks = run_checks(seed);
    let lines: Vec<String> =
        checks.iter().map(|c| format!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail)).collect();
    let failed = checks.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        println!("{}", lines.join("\n"));
        return Err(CliError::Failed(format!("{failed} of {} diffusion checks failed", checks.len())));
    }
    Ok(lines.join("\n"))
}
