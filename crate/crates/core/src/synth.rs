//! Synthetic full-reference IQA datasets.
//!
//! References are procedural 8-bit luma images. Each is degraded by a set of
//! distortion types at increasing levels; the pseudo-label of a record is
//! `-level`, so only the ordering within a ladder carries meaning.
//!
//! SDR datasets store 8-bit PNGs. HDR datasets store the display response of
//! the same luma grids as PFM luminance, with `L_max` drawn per reference.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::display::{display_response, DisplayModel, Domain, PeakSampling};
use crate::grid::{Grid, LuminanceImage};
use crate::io::manifest::{write_manifest, DatasetManifest, DatasetRecord};
use crate::io::png8::quantize_8bit;
use crate::io::{write_pfm, write_png8};
use crate::metrics::{filter_separable, gaussian_taps, pu_metric, BaseMetric};
use crate::rng::{derive_seed, stream, StreamRng};
use crate::{Error, Result};

pub const MIN_SIZE: usize = 64;
pub const MAX_LEVEL: u32 = 5;

/// Stream tags so content never depends on the domain or `L_max` draws.
const CONTENT: u64 = 0x636f_6e74;
const DISTORT: u64 = 0x6469_7374;
const PEAKS: u64 = 0x7065_616b;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReferenceKind {
    Gradient,
    NoiseTexture,
    Checker,
    Blobs,
    Mixed,
}

impl ReferenceKind {
    pub const ALL: [ReferenceKind; 5] = [
        ReferenceKind::Gradient,
        ReferenceKind::NoiseTexture,
        ReferenceKind::Checker,
        ReferenceKind::Blobs,
        ReferenceKind::Mixed,
    ];
}

impl fmt::Display for ReferenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReferenceKind::Gradient => "gradient",
            ReferenceKind::NoiseTexture => "noise-texture",
            ReferenceKind::Checker => "checker",
            ReferenceKind::Blobs => "blobs",
            ReferenceKind::Mixed => "mixed",
        })
    }
}

impl FromStr for ReferenceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ReferenceKind::ALL
            .into_iter()
            .find(|k| k.to_string() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown reference kind {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DistortionType {
    GaussNoise,
    GaussBlur,
    Quantize,
    Contrast,
    Brightness,
}

impl DistortionType {
    pub const ALL: [DistortionType; 5] = [
        DistortionType::GaussNoise,
        DistortionType::GaussBlur,
        DistortionType::Quantize,
        DistortionType::Contrast,
        DistortionType::Brightness,
    ];

    fn tag(self) -> u64 {
        self as u64 + 1
    }
}

impl fmt::Display for DistortionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DistortionType::GaussNoise => "gauss-noise",
            DistortionType::GaussBlur => "gauss-blur",
            DistortionType::Quantize => "quantize",
            DistortionType::Contrast => "contrast",
            DistortionType::Brightness => "brightness",
        })
    }
}

impl FromStr for DistortionType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DistortionType::ALL
            .into_iter()
            .find(|d| d.to_string() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown distortion type {s:?}")))
    }
}

fn quantize_grid(g: &Grid) -> Grid {
    g.map(|v| quantize_8bit(v) as f64 / 255.0)
}

fn min_max_normalize(g: &Grid) -> Grid {
    let (lo, hi) = (g.min(), g.max());
    if hi - lo <= f64::EPSILON {
        return Grid::filled(g.width(), g.height(), 0.5);
    }
    g.map(|v| (v - lo) / (hi - lo))
}

/// Replaces values by their normalized rank, giving a flat histogram.
fn rank_equalize(g: &Grid) -> Grid {
    let n = g.len();
    let mut order: Vec<usize> = (0..n).collect();
    let data = g.as_slice();
    order.sort_by(|&a, &b| data[a].total_cmp(&data[b]).then(a.cmp(&b)));
    let mut out = vec![0.0; n];
    for (rank, &i) in order.iter().enumerate() {
        out[i] = rank as f64 / (n - 1).max(1) as f64;
    }
    Grid::new(g.width(), g.height(), out).expect("shape preserved")
}

fn gradient(h: usize, w: usize, rng: &mut StreamRng) -> Grid {
    let angle = rng.random_range(0.0..std::f64::consts::TAU);
    let (s, c) = angle.sin_cos();
    min_max_normalize(&Grid::from_fn(w, h, |r, col| c * col as f64 + s * r as f64))
}

/// Multi-octave value noise with bilinear interpolation.
fn value_noise(h: usize, w: usize, rng: &mut StreamRng) -> Grid {
    let mut acc = Grid::filled(w, h, 0.0);
    let mut cell = (w.min(h) / 4).max(4) as f64;
    let mut amp = 1.0;
    while cell >= 2.0 {
        let gw = (w as f64 / cell).ceil() as usize + 2;
        let gh = (h as f64 / cell).ceil() as usize + 2;
        let lattice: Vec<f64> = (0..gw * gh).map(|_| rng.random::<f64>()).collect();
        let data = acc.as_mut_slice();
        for r in 0..h {
            let y = r as f64 / cell;
            let (y0, fy) = (y.floor() as usize, y.fract());
            for col in 0..w {
                let x = col as f64 / cell;
                let (x0, fx) = (x.floor() as usize, x.fract());
                let at = |yy: usize, xx: usize| lattice[yy * gw + xx];
                let top = at(y0, x0) * (1.0 - fx) + at(y0, x0 + 1) * fx;
                let bottom = at(y0 + 1, x0) * (1.0 - fx) + at(y0 + 1, x0 + 1) * fx;
                data[r * w + col] += amp * (top * (1.0 - fy) + bottom * fy);
            }
        }
        cell /= 2.0;
        amp *= 0.55;
    }
    rank_equalize(&acc)
}

fn checker(h: usize, w: usize, rng: &mut StreamRng) -> Grid {
    let size = rng.random_range(6..=20usize);
    let (dr, dc) = (rng.random_range(0..size), rng.random_range(0..size));
    let shade = gradient(h, w, rng);
    min_max_normalize(&Grid::from_fn(w, h, |r, c| {
        let on = ((r + dr) / size + (c + dc) / size) % 2 == 0;
        (if on { 0.85 } else { 0.15 }) + 0.15 * (shade.get(r, c) - 0.5)
    }))
}

fn blobs(h: usize, w: usize, rng: &mut StreamRng) -> Grid {
    let count = rng.random_range(6..=14);
    let scale = w.min(h) as f64;
    let params: Vec<(f64, f64, f64, f64)> = (0..count)
        .map(|_| {
            (
                rng.random_range(0.0..h as f64),
                rng.random_range(0.0..w as f64),
                rng.random_range(0.05..0.25) * scale,
                rng.random_range(-1.0..1.0),
            )
        })
        .collect();
    rank_equalize(&Grid::from_fn(w, h, |r, c| {
        params
            .iter()
            .map(|&(cy, cx, rad, amp)| {
                let d2 = (r as f64 - cy).powi(2) + (c as f64 - cx).powi(2);
                amp * (-d2 / (2.0 * rad * rad)).exp()
            })
            .sum()
    }))
}

/// Generates a reference luma image in `[0, 1]`, quantized to 8 bits.
pub fn gen_reference(
    kind: ReferenceKind,
    size: (usize, usize),
    rng: &mut StreamRng,
) -> Result<Grid> {
    let (h, w) = size;
    if h < MIN_SIZE || w < MIN_SIZE {
        return Err(Error::Dimension(format!(
            "reference size {h}x{w} is below the {MIN_SIZE}x{MIN_SIZE} minimum"
        )));
    }
    let image = match kind {
        ReferenceKind::Gradient => gradient(h, w, rng),
        ReferenceKind::NoiseTexture => value_noise(h, w, rng),
        ReferenceKind::Checker => checker(h, w, rng),
        ReferenceKind::Blobs => blobs(h, w, rng),
        ReferenceKind::Mixed => {
            let a = gradient(h, w, rng);
            let b = value_noise(h, w, rng);
            let c = checker(h, w, rng);
            let mix = Grid::from_fn(w, h, |r, col| {
                0.4 * a.get(r, col) + 0.35 * b.get(r, col) + 0.25 * c.get(r, col)
            });
            rank_equalize(&mix)
        }
    };
    Ok(quantize_grid(&image))
}

const NOISE_SIGMA: [f64; 5] = [0.01, 0.025, 0.05, 0.1, 0.2];
const BLUR_SIGMA: [f64; 5] = [0.6, 1.0, 1.6, 2.5, 4.0];
/// Quantizer step in 8-bit code values; codes are truncated to multiples.
const QUANT_STEP: [f64; 5] = [8.0, 16.0, 32.0, 64.0, 128.0];
const CONTRAST_FACTOR: [f64; 5] = [0.85, 0.7, 0.5, 0.3, 0.15];
const BRIGHTNESS_SHIFT: [f64; 5] = [0.04, 0.08, 0.15, 0.25, 0.4];

/// Applies a distortion at `level` (1..=5) and quantizes to 8 bits.
///
/// Gaussian noise draws one unit-variance field from `rng` and scales it per
/// level, so a fixed RNG state yields errors that grow pixel by pixel.
pub fn distort(img: &Grid, dtype: DistortionType, level: u32, rng: &mut StreamRng) -> Result<Grid> {
    if !(1..=MAX_LEVEL).contains(&level) {
        return Err(Error::Config(format!("distortion level {level} outside 1..={MAX_LEVEL}")));
    }
    let k = (level - 1) as usize;
    let out = match dtype {
        DistortionType::GaussNoise => {
            let sigma = NOISE_SIGMA[k];
            let mut out = img.clone();
            for v in out.as_mut_slice() {
                let n: f64 = rng.sample(StandardNormal);
                *v = (*v + sigma * n).clamp(0.0, 1.0);
            }
            out
        }
        DistortionType::GaussBlur => {
            let sigma = BLUR_SIGMA[k];
            let radius = (3.0 * sigma).ceil() as usize;
            let taps = gaussian_taps(2 * radius + 1, sigma);
            filter_separable(img, &taps)
        }
        DistortionType::Quantize => {
            let step = QUANT_STEP[k];
            // Truncation keeps every pixel's error on one side and growing with
            // the step, so the ladder is monotone under any monotone encoding.
            img.map(|v| ((v * 255.0 / step).floor() * step) / 255.0)
        }
        DistortionType::Contrast => {
            let c = CONTRAST_FACTOR[k];
            let mean = img.mean();
            img.map(|v| mean + c * (v - mean))
        }
        DistortionType::Brightness => {
            let delta = BRIGHTNESS_SHIFT[k];
            img.map(|v| (v + delta).min(1.0))
        }
    };
    Ok(quantize_grid(&out))
}

/// Parameters of [`build_manifest`].
#[derive(Debug, Clone)]
pub struct BuildOptions {
    pub refs: usize,
    pub dtypes: Vec<DistortionType>,
    pub levels: u32,
    pub domain: Domain,
    /// `(height, width)` of every image.
    pub size: (usize, usize),
    pub peaks: PeakSampling,
    pub labeled: bool,
    pub seed: u64,
}

impl BuildOptions {
    pub fn new(refs: usize, domain: Domain, seed: u64) -> Self {
        BuildOptions {
            refs,
            dtypes: DistortionType::ALL.to_vec(),
            levels: MAX_LEVEL,
            domain,
            size: (MIN_SIZE, MIN_SIZE),
            peaks: PeakSampling::for_domain(domain),
            labeled: true,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.refs == 0 || self.dtypes.is_empty() {
            return Err(Error::Config("need at least one reference and one distortion type".into()));
        }
        if !(1..=MAX_LEVEL).contains(&self.levels) {
            return Err(Error::Config(format!("levels must lie in 1..={MAX_LEVEL}")));
        }
        let mut seen = self.dtypes.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.dtypes.len() {
            return Err(Error::Config("distortion types must be distinct".into()));
        }
        if !(self.peaks.mean.is_finite() && self.peaks.std_dev.is_finite() && self.peaks.std_dev >= 0.0) {
            return Err(Error::Config("peak sampling needs a finite mean and std_dev >= 0".into()));
        }
        Ok(())
    }

    fn provenance(&self) -> BTreeMap<String, String> {
        let dtypes: Vec<String> = self.dtypes.iter().map(|d| d.to_string()).collect();
        BTreeMap::from([
            ("generator".into(), "puiq-synth/1".into()),
            ("seed".into(), self.seed.to_string()),
            ("domain".into(), self.domain.to_string()),
            ("refs".into(), self.refs.to_string()),
            ("dtypes".into(), dtypes.join(" ")),
            ("levels".into(), self.levels.to_string()),
            ("size".into(), format!("{}x{}", self.size.0, self.size.1)),
            ("l_max_mean".into(), self.peaks.mean.to_string()),
            ("l_max_std".into(), self.peaks.std_dev.to_string()),
            ("labeled".into(), self.labeled.to_string()),
        ])
    }
}

#[derive(Debug, Clone)]
pub struct GeneratedDataset {
    pub manifest: DatasetManifest,
    /// PU-PSNR of every record, computed from the stored pixel values.
    pub generation_scores: Vec<f64>,
    pub manifest_path: PathBuf,
}

/// Luma of reference `index` for `seed`; identical across domains.
pub fn reference_luma(seed: u64, index: usize, size: (usize, usize)) -> Result<Grid> {
    let kind = ReferenceKind::ALL[index % ReferenceKind::ALL.len()];
    gen_reference(kind, size, &mut stream(seed, &[CONTENT, index as u64]))
}

/// Distorted luma for one ladder rung; identical across domains.
pub fn distorted_luma(
    seed: u64,
    index: usize,
    reference: &Grid,
    dtype: DistortionType,
    level: u32,
) -> Result<Grid> {
    let mut rng = stream(seed, &[DISTORT, index as u64, dtype.tag()]);
    distort(reference, dtype, level, &mut rng)
}

/// Per-reference peak luminances, in reference order.
pub fn reference_peaks(options: &BuildOptions) -> Result<Vec<f64>> {
    let mut rng = stream(options.seed, &[PEAKS]);
    let l_blk = DisplayModel::preset(options.domain).l_blk;
    (0..options.refs)
        .map(|_| options.peaks.sample(l_blk, &mut rng))
        .collect()
}

/// What a loader reconstructs from a stored image.
fn stored_luminance(v: &Grid, domain: Domain, l_max: f64) -> Result<LuminanceImage> {
    let lum = display_response(v, &DisplayModel::preset(domain).with_l_max(l_max), false)?;
    Ok(match domain {
        Domain::Sdr => lum,
        // PFM holds 32-bit floats.
        Domain::Hdr => LuminanceImage(lum.grid().map(|x| x as f32 as f64)),
    })
}

fn write_image(path: &Path, v: &Grid, lum: &LuminanceImage, domain: Domain) -> Result<()> {
    match domain {
        Domain::Sdr => write_png8(path, v),
        Domain::Hdr => write_pfm(path, lum.grid()),
    }
}

/// Renders every reference × dtype × level record into `out_dir` and writes
/// `out_dir/manifest.csv`. Image paths in the manifest are relative.
pub fn build_manifest(options: &BuildOptions, out_dir: &Path) -> Result<GeneratedDataset> {
    options.validate()?;
    for sub in ["ref", "dist"] {
        let dir = out_dir.join(sub);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    let peaks = reference_peaks(options)?;
    let ext = match options.domain {
        Domain::Sdr => "png",
        Domain::Hdr => "pfm",
    };

    let per_ref: Vec<Vec<(DatasetRecord, f64)>> = (0..options.refs)
        .into_par_iter()
        .map(|i| -> Result<Vec<(DatasetRecord, f64)>> {
            let l_max = peaks[i];
            let v_ref = reference_luma(options.seed, i, options.size)?;
            let ref_rel = format!("ref/ref_{i:04}.{ext}");
            let ref_lum = stored_luminance(&v_ref, options.domain, l_max)?;
            write_image(&out_dir.join(&ref_rel), &v_ref, &ref_lum, options.domain)?;
            let mut rows = Vec::new();
            for &dtype in &options.dtypes {
                for level in 1..=options.levels {
                    let v_dist = distorted_luma(options.seed, i, &v_ref, dtype, level)?;
                    let dist_rel = format!("dist/ref_{i:04}_{dtype}_{level}.{ext}");
                    let dist_lum = stored_luminance(&v_dist, options.domain, l_max)?;
                    write_image(&out_dir.join(&dist_rel), &v_dist, &dist_lum, options.domain)?;
                    let score = pu_metric(&ref_lum, &dist_lum, BaseMetric::Psnr)?.score;
                    rows.push((
                        DatasetRecord {
                            ref_path: ref_rel.clone(),
                            dist_path: dist_rel,
                            label: options.labeled.then(|| -(level as f64)),
                            domain: options.domain,
                            dtype: Some(dtype.to_string()),
                            level: Some(level),
                            l_max: Some(l_max),
                        },
                        score,
                    ));
                }
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;

    let (records, generation_scores): (Vec<_>, Vec<_>) = per_ref.into_iter().flatten().unzip();
    let mut manifest = DatasetManifest::new(records, out_dir)?;
    manifest.provenance = options.provenance();
    let manifest_path = out_dir.join("manifest.csv");
    write_manifest(&manifest_path, &manifest)?;
    Ok(GeneratedDataset {
        manifest,
        generation_scores,
        manifest_path,
    })
}

/// Shuffles `records` deterministically; used to build unlabeled or mixed subsets.
pub fn shuffled_records(records: &[DatasetRecord], seed: u64) -> Vec<DatasetRecord> {
    let mut out = records.to_vec();
    out.shuffle(&mut stream(derive_seed(seed, &[0x7368_7566]), &[]));
    out
}
