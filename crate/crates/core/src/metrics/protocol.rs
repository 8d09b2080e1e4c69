//! Stitched-image evaluation: pad the reference to the ground-truth frame,
//! register the stitched canvas onto it, then score the valid pixels
//! against ground truth.

use std::io::Write;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use super::{psnr, ssim, MetricsError, SsimParams, StitchedImage};
use crate::raster::pad_centered;
use crate::registration::{register, warp_with_validity, Homography, RegistrationConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub registration: RegistrationConfig,
    pub ssim_window: u32,
    pub ssim_sigma: f64,
    pub ssim_k1: f64,
    pub ssim_k2: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        let s = SsimParams::default();
        Self {
            registration: RegistrationConfig::default(),
            ssim_window: s.window,
            ssim_sigma: s.sigma,
            ssim_k1: s.k1,
            ssim_k2: s.k2,
        }
    }
}

impl EvalConfig {
    pub fn ssim_params(&self) -> SsimParams {
        SsimParams { window: self.ssim_window, sigma: self.ssim_sigma, k1: self.ssim_k1, k2: self.ssim_k2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityScores {
    pub psnr: f64,
    pub ssim: Option<f64>,
    pub valid_pixel_count: usize,
}

/// Scores of one stitched image. `psnr`/`ssim` are present only when
/// registration succeeded; `unregistered` holds the scores obtained by
/// placing the canvas with its own offset, used for all-pairs averages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
    pub valid_pixel_count: usize,
    pub registration_ok: bool,
    pub registration_detail: Option<String>,
    pub unregistered: Option<QualityScores>,
}

fn score(
    stitched: &StitchedImage<'_>,
    h: &Homography,
    gt: &RgbImage,
    config: &EvalConfig,
) -> Result<QualityScores, MetricsError> {
    let source_valid = stitched.holes.not();
    let warped = warp_with_validity(stitched.image, Some(&source_valid), h, gt.width(), gt.height(), (0, 0))?;
    let n = warped.valid.count();
    if n == 0 {
        return Err(MetricsError::EmptyMask);
    }
    let p = psnr(&warped.image, gt, &warped.valid)?;
    let s = match ssim(&warped.image, gt, &warped.valid, &config.ssim_params()) {
        Ok(s) => Some(s),
        Err(MetricsError::EmptyMask) | Err(MetricsError::ImageSmallerThanWindow { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(QualityScores { psnr: p, ssim: s, valid_pixel_count: n })
}

pub fn evaluate_stitched(
    stitched: &StitchedImage<'_>,
    reference: &RgbImage,
    gt: &RgbImage,
    config: &EvalConfig,
) -> Result<MetricReport, MetricsError> {
    if stitched.image.dimensions() != stitched.holes.dimensions() {
        return Err(MetricsError::Contract(format!(
            "stitched image {:?} and hole mask {:?} differ",
            stitched.image.dimensions(),
            stitched.holes.dimensions()
        )));
    }
    if gt.width() < reference.width() || gt.height() < reference.height() {
        return Err(MetricsError::Contract(format!(
            "ground truth {:?} is smaller than reference {:?}",
            gt.dimensions(),
            reference.dimensions()
        )));
    }
    let (padded, ref_mask, pad) = pad_centered(reference, gt.width(), gt.height());
    let valid = stitched.holes.not();
    match register(stitched.image, Some(&valid), &padded, Some(&ref_mask), &config.registration) {
        Ok(reg) => {
            let q = score(stitched, &reg.homography, gt, config)?;
            Ok(MetricReport {
                psnr: Some(q.psnr),
                ssim: q.ssim,
                valid_pixel_count: q.valid_pixel_count,
                registration_ok: true,
                registration_detail: Some(format!("{} inliers, rms {:.3} px", reg.inlier_count, reg.rms_error)),
                unregistered: None,
            })
        }
        Err(e) => {
            log::debug!("registration failed: {e}");
            let place = Homography::translation(
                pad.0 as f64 - stitched.offset.0 as f64,
                pad.1 as f64 - stitched.offset.1 as f64,
            );
            let unregistered = score(stitched, &place, gt, config).ok();
            Ok(MetricReport {
                psnr: None,
                ssim: None,
                valid_pixel_count: 0,
                registration_ok: false,
                registration_detail: Some(e.to_string()),
                unregistered,
            })
        }
    }
}

/// Registration success rate in percent.
pub fn rsr(n: usize, failures: usize) -> Result<f64, MetricsError> {
    if n == 0 || failures > n {
        return Err(MetricsError::InvalidCounts { n, failures });
    }
    Ok((1.0 - failures as f64 / n as f64) * 100.0)
}

pub fn format_rsr(value: f64) -> String {
    format!("{value:.1}%")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairReport {
    pub item: String,
    pub metrics: MetricReport,
    pub sampson_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub pairs: usize,
    pub failed_registrations: usize,
    pub rsr: f64,
    /// Means over all pairs; failed pairs contribute their unregistered scores.
    pub psnr_mean: Option<f64>,
    pub ssim_mean: Option<f64>,
    /// Means over pairs whose registration succeeded.
    pub psnr_mean_registered: Option<f64>,
    pub ssim_mean_registered: Option<f64>,
    pub sampson_mean: Option<f64>,
    pub lpips: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub pairs: Vec<PairReport>,
    pub aggregate: Aggregate,
    pub config_echo: serde_json::Value,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| s / n as f64)
}

/// Sorts pairs by item id and computes dataset means and RSR.
pub fn aggregate(mut pairs: Vec<PairReport>, config_echo: serde_json::Value) -> Result<EvaluationReport, MetricsError> {
    pairs.sort_by(|a, b| a.item.cmp(&b.item));
    let n = pairs.len();
    let failed = pairs.iter().filter(|p| !p.metrics.registration_ok).count();
    let all_psnr = pairs.iter().filter_map(|p| p.metrics.psnr.or(p.metrics.unregistered.map(|u| u.psnr)));
    let all_ssim = pairs.iter().filter_map(|p| p.metrics.ssim.or(p.metrics.unregistered.and_then(|u| u.ssim)));
    let aggregate = Aggregate {
        pairs: n,
        failed_registrations: failed,
        rsr: rsr(n, failed)?,
        psnr_mean: mean(all_psnr),
        ssim_mean: mean(all_ssim),
        psnr_mean_registered: mean(pairs.iter().filter_map(|p| p.metrics.psnr)),
        ssim_mean_registered: mean(pairs.iter().filter_map(|p| p.metrics.ssim)),
        sampson_mean: mean(pairs.iter().filter_map(|p| p.sampson_mean)),
        lpips: "n/a".into(),
    };
    Ok(EvaluationReport { pairs, aggregate, config_echo })
}

#[derive(Serialize)]
struct CsvRow<'a> {
    item: &'a str,
    registration_ok: bool,
    psnr: Option<f64>,
    ssim: Option<f64>,
    valid_pixel_count: usize,
    unregistered_psnr: Option<f64>,
    unregistered_ssim: Option<f64>,
    sampson_mean: Option<f64>,
    lpips: &'a str,
}

pub fn write_pairs_csv<W: Write>(report: &EvaluationReport, out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for p in &report.pairs {
        w.serialize(CsvRow {
            item: &p.item,
            registration_ok: p.metrics.registration_ok,
            psnr: p.metrics.psnr,
            ssim: p.metrics.ssim,
            valid_pixel_count: p.metrics.valid_pixel_count,
            unregistered_psnr: p.metrics.unregistered.map(|u| u.psnr),
            unregistered_ssim: p.metrics.unregistered.and_then(|u| u.ssim),
            sampson_mean: p.sampson_mean,
            lpips: "n/a",
        })?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rsr_examples() {
        assert_eq!(format_rsr(rsr(682, 0).unwrap()), "100.0%");
        assert_eq!(rsr(7, 7).unwrap(), 0.0);
        assert_eq!(format_rsr(rsr(1000, 43).unwrap()), "95.7%");
        assert!(matches!(rsr(0, 0), Err(MetricsError::InvalidCounts { .. })));
        assert!(rsr(3, 4).is_err());
    }

    fn pair(item: &str, ok: bool, psnr: f64) -> PairReport {
        PairReport {
            item: item.into(),
            metrics: MetricReport {
                psnr: ok.then_some(psnr),
                ssim: ok.then_some(0.5),
                valid_pixel_count: 10,
                registration_ok: ok,
                registration_detail: None,
                unregistered: (!ok).then_some(QualityScores { psnr, ssim: Some(0.1), valid_pixel_count: 5 }),
            },
            sampson_mean: None,
        }
    }

    #[test]
    fn aggregate_dual_columns() {
        let r = aggregate(
            vec![pair("b", true, 30.0), pair("a", false, 10.0), pair("c", true, 40.0)],
            serde_json::Value::Null,
        )
        .unwrap();
        assert_eq!(r.pairs[0].item, "a");
        assert_eq!(r.aggregate.failed_registrations, 1);
        assert_eq!(r.aggregate.psnr_mean_registered, Some(35.0));
        assert_eq!(r.aggregate.psnr_mean, Some(80.0 / 3.0));
        assert_eq!(r.aggregate.lpips, "n/a");
        let mut buf = Vec::new();
        write_pairs_csv(&r, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("item,registration_ok,psnr"));
    }

    #[test]
    fn empty_dataset_is_an_error() {
        assert!(aggregate(vec![], serde_json::Value::Null).is_err());
    }
}
