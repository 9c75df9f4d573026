//! Classical full-reference metrics and their PU-encoded variants.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::encoding::{pu21_encode, pu21_max};
use crate::grid::{Grid, LuminanceImage};
use crate::{Error, Result};

/// PSNR reported for identical inputs, and the ceiling for all others.
pub const PSNR_CAP_DB: f64 = 100.0;

/// Side length of the SSIM Gaussian window.
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

/// PU peak used for sources that stay within the SDR range.
pub const PU_SDR_PEAK: f64 = 256.0;
/// Sources brighter than this (cd/m²) are scored against the full PU range.
pub const PU_SDR_LUMINANCE_LIMIT: f64 = 110.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MetricKind {
    #[serde(rename = "psnr")]
    Psnr,
    #[serde(rename = "ssim")]
    Ssim,
    #[serde(rename = "pu-psnr")]
    PuPsnr,
    #[serde(rename = "pu-ssim")]
    PuSsim,
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MetricKind::Psnr => "psnr",
            MetricKind::Ssim => "ssim",
            MetricKind::PuPsnr => "pu-psnr",
            MetricKind::PuSsim => "pu-ssim",
        })
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "psnr" => Ok(MetricKind::Psnr),
            "ssim" => Ok(MetricKind::Ssim),
            "pu-psnr" => Ok(MetricKind::PuPsnr),
            "pu-ssim" => Ok(MetricKind::PuSsim),
            _ => Err(Error::Config(format!("unknown metric {s:?}"))),
        }
    }
}

/// Base metric applied after PU encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaseMetric {
    Psnr,
    Ssim,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricResult {
    pub score: f64,
    pub metric: MetricKind,
    /// Dynamic-range ceiling the score was computed against.
    pub peak: f64,
}

pub fn mse(reference: &Grid, distorted: &Grid) -> Result<f64> {
    reference.ensure_same_shape(distorted)?;
    let sum: f64 = reference
        .as_slice()
        .iter()
        .zip(distorted.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / reference.len() as f64)
}

pub fn psnr(reference: &Grid, distorted: &Grid, peak: f64) -> Result<MetricResult> {
    if !(peak.is_finite() && peak > 0.0) {
        return Err(Error::Config(format!("PSNR peak must be positive, got {peak}")));
    }
    let mse = mse(reference, distorted)?;
    let score = if mse == 0.0 {
        PSNR_CAP_DB
    } else {
        (10.0 * (peak * peak / mse).log10()).min(PSNR_CAP_DB)
    };
    Ok(MetricResult {
        score,
        metric: MetricKind::Psnr,
        peak,
    })
}

/// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
pub fn gaussian_taps(size: usize, sigma: f64) -> Vec<f64> {
    let half = (size / 2) as f64;
    let taps: Vec<f64> = (0..size)
        .map(|i| {
            let x = i as f64 - half;
            (-(x * x) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / total).collect()
}

/// Mirror index into `[0, n)` without repeating the edge sample.
#[inline]
pub(crate) fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * (n - 1);
    if period == 0 {
        return 0;
    }
    let mut m = i.rem_euclid(period);
    if m >= n {
        m = period - m;
    }
    m as usize
}

/// Separable filtering with reflected borders.
pub(crate) fn filter_separable(src: &Grid, taps: &[f64]) -> Grid {
    let (w, h) = (src.width(), src.height());
    let half = (taps.len() / 2) as isize;
    let mut tmp = vec![0.0; w * h];
    for r in 0..h {
        let row = src.row(r);
        for c in 0..w {
            let mut acc = 0.0;
            for (k, t) in taps.iter().enumerate() {
                acc += t * row[reflect(c as isize + k as isize - half, w)];
            }
            tmp[r * w + c] = acc;
        }
    }
    let mut out = vec![0.0; w * h];
    for r in 0..h {
        for c in 0..w {
            let mut acc = 0.0;
            for (k, t) in taps.iter().enumerate() {
                acc += t * tmp[reflect(r as isize + k as isize - half, h) * w + c];
            }
            out[r * w + c] = acc;
        }
    }
    Grid::new(w, h, out).expect("shape preserved")
}

/// Mean local SSIM with an 11×11 Gaussian window (σ = 1.5).
pub fn ssim(reference: &Grid, distorted: &Grid, peak: f64) -> Result<MetricResult> {
    reference.ensure_same_shape(distorted)?;
    if reference.width() < SSIM_WINDOW || reference.height() < SSIM_WINDOW {
        return Err(Error::Dimension(format!(
            "SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {}x{}",
            reference.width(),
            reference.height()
        )));
    }
    if !(peak.is_finite() && peak > 0.0) {
        return Err(Error::Config(format!("SSIM peak must be positive, got {peak}")));
    }
    let c1 = (SSIM_K1 * peak).powi(2);
    let c2 = (SSIM_K2 * peak).powi(2);
    let taps = gaussian_taps(SSIM_WINDOW, SSIM_SIGMA);

    let x = reference;
    let y = distorted;
    let xx = Grid::new(
        x.width(),
        x.height(),
        x.as_slice().iter().map(|v| v * v).collect(),
    )?;
    let yy = Grid::new(
        y.width(),
        y.height(),
        y.as_slice().iter().map(|v| v * v).collect(),
    )?;
    let xy = Grid::new(
        x.width(),
        x.height(),
        x.as_slice()
            .iter()
            .zip(y.as_slice())
            .map(|(a, b)| a * b)
            .collect(),
    )?;

    let mu_x = filter_separable(x, &taps);
    let mu_y = filter_separable(y, &taps);
    let e_xx = filter_separable(&xx, &taps);
    let e_yy = filter_separable(&yy, &taps);
    let e_xy = filter_separable(&xy, &taps);

    let mut total = 0.0;
    for i in 0..x.len() {
        let mx = mu_x.as_slice()[i];
        let my = mu_y.as_slice()[i];
        let sxx = e_xx.as_slice()[i] - mx * mx;
        let syy = e_yy.as_slice()[i] - my * my;
        let sxy = e_xy.as_slice()[i] - mx * my;
        total += ((2.0 * mx * my + c1) * (2.0 * sxy + c2))
            / ((mx * mx + my * my + c1) * (sxx + syy + c2));
    }
    Ok(MetricResult {
        score: total / x.len() as f64,
        metric: MetricKind::Ssim,
        peak,
    })
}

/// PU peak for a pair of luminance images: 256 for SDR-range sources,
/// otherwise the PU value of 10000 cd/m².
pub fn pu_peak(reference: &LuminanceImage, distorted: &LuminanceImage) -> f64 {
    let brightest = reference.grid().max().max(distorted.grid().max());
    if brightest <= PU_SDR_LUMINANCE_LIMIT {
        PU_SDR_PEAK
    } else {
        pu21_max()
    }
}

/// PU21-encodes both images and applies `base` to the encoded values.
pub fn pu_metric(
    reference: &LuminanceImage,
    distorted: &LuminanceImage,
    base: BaseMetric,
) -> Result<MetricResult> {
    reference.grid().ensure_same_shape(distorted.grid())?;
    let peak = pu_peak(reference, distorted);
    let r = pu21_encode(reference);
    let d = pu21_encode(distorted);
    let result = match base {
        BaseMetric::Psnr => psnr(&r.values, &d.values, peak)?,
        BaseMetric::Ssim => ssim(&r.values, &d.values, peak)?,
    };
    Ok(MetricResult {
        metric: match base {
            BaseMetric::Psnr => MetricKind::PuPsnr,
            BaseMetric::Ssim => MetricKind::PuSsim,
        },
        ..result
    })
}
