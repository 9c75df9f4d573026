//! Physical display simulation.
//!
//! A display turns encoded luma `V ∈ [0, 1]` into emitted luminance with the
//! gain-offset-gamma model
//!
//! ```text
//! L = (L_max - L_blk) · F(V) + L_blk
//! ```
//!
//! where `F` is the display EOTF. Light reflected off the panel adds a
//! constant `L_amb = k / π · E_amb` on top, with `k` the panel reflectivity
//! and `E_amb` the ambient illuminance in lux.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::grid::{Grid, LuminanceImage};
use crate::{Error, Result};

/// Typical gamma of an SDR display.
pub const DEFAULT_GAMMA: f64 = 2.2;

/// Peak luminance of the reference SDR display (cd/m²).
pub const SDR_PEAK: f64 = 100.0;
/// Black level of the reference SDR display (cd/m²), for a 200:1 contrast.
pub const SDR_BLACK: f64 = 0.5;
/// Nominal peak of the simulated HDR display (cd/m²).
pub const HDR_PEAK: f64 = 5000.0;

/// Rec.709 luma weights, used to collapse RGB input to a single channel.
pub const REC709_LUMA: [f64; 3] = [0.2126, 0.7152, 0.0722];

/// Electro-optical transfer function of a display.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Eotf {
    Gamma(f64),
    /// Two-piece IEC 61966-2-1 curve.
    Srgb,
    Linear,
}

impl Default for Eotf {
    fn default() -> Self {
        Eotf::Gamma(DEFAULT_GAMMA)
    }
}

impl Eotf {
    /// Relative light output for `v`, with no range check.
    #[inline]
    pub fn apply_unchecked(self, v: f64) -> f64 {
        match self {
            Eotf::Gamma(gamma) => v.powf(gamma),
            Eotf::Srgb => {
                if v <= 0.04045 {
                    v / 12.92
                } else {
                    ((v + 0.055) / 1.055).powf(2.4)
                }
            }
            Eotf::Linear => v,
        }
    }

    pub fn apply(self, v: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Domain(format!("luma {v} outside [0, 1]")));
        }
        Ok(self.apply_unchecked(v))
    }

    fn validate(self) -> Result<()> {
        match self {
            Eotf::Gamma(g) if !(g.is_finite() && g > 0.0) => {
                Err(Error::Config(format!("gamma must be positive, got {g}")))
            }
            _ => Ok(()),
        }
    }
}

/// Evaluates the EOTF `kind` at `v`.
pub fn eotf(v: f64, kind: Eotf) -> Result<f64> {
    kind.apply(v)
}

impl fmt::Display for Eotf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Eotf::Gamma(g) => write!(f, "gamma:{g}"),
            Eotf::Srgb => f.write_str("srgb"),
            Eotf::Linear => f.write_str("linear"),
        }
    }
}

impl FromStr for Eotf {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s.to_ascii_lowercase().as_str() {
            "srgb" => Ok(Eotf::Srgb),
            "linear" => Ok(Eotf::Linear),
            "gamma" => Ok(Eotf::Gamma(DEFAULT_GAMMA)),
            other => {
                let gamma = other
                    .strip_prefix("gamma:")
                    .ok_or_else(|| Error::Config(format!("unknown EOTF {s:?}")))?
                    .parse::<f64>()
                    .map_err(|e| Error::Config(format!("bad gamma in {s:?}: {e}")))?;
                let eotf = Eotf::Gamma(gamma);
                eotf.validate()?;
                Ok(eotf)
            }
        }
    }
}

impl Serialize for Eotf {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Eotf {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Dynamic-range class of a display or dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Sdr,
    Hdr,
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Domain::Sdr => "SDR",
            Domain::Hdr => "HDR",
        })
    }
}

impl FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sdr" => Ok(Domain::Sdr),
            "hdr" => Ok(Domain::Hdr),
            _ => Err(Error::Config(format!("unknown domain {s:?}"))),
        }
    }
}

/// Photometric description of a display.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisplayModel {
    /// Peak luminance, cd/m².
    pub l_max: f64,
    /// Black level, cd/m².
    pub l_blk: f64,
    /// Panel reflectivity in `[0, 1)`.
    #[serde(rename = "k", default)]
    pub reflectivity_k: f64,
    /// Ambient illuminance, lux.
    #[serde(default)]
    pub ambient_lux: f64,
    #[serde(default)]
    pub eotf: Eotf,
}

impl DisplayModel {
    /// 100 cd/m² peak, 0.5 cd/m² black, gamma 2.2, no ambient light.
    pub fn sdr() -> Self {
        DisplayModel {
            l_max: SDR_PEAK,
            l_blk: SDR_BLACK,
            reflectivity_k: 0.005,
            ambient_lux: 0.0,
            eotf: Eotf::default(),
        }
    }

    /// The SDR panel driven to `HDR_PEAK`; only the peak differs.
    pub fn hdr() -> Self {
        DisplayModel {
            l_max: HDR_PEAK,
            ..DisplayModel::sdr()
        }
    }

    pub fn preset(domain: Domain) -> Self {
        match domain {
            Domain::Sdr => DisplayModel::sdr(),
            Domain::Hdr => DisplayModel::hdr(),
        }
    }

    pub fn with_l_max(self, l_max: f64) -> Self {
        DisplayModel { l_max, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let DisplayModel {
            l_max,
            l_blk,
            reflectivity_k,
            ambient_lux,
            eotf,
        } = *self;
        if !(l_max.is_finite() && l_blk.is_finite()) {
            return Err(Error::Config("display luminances must be finite".into()));
        }
        if !(0.0 <= l_blk && l_blk < l_max) {
            return Err(Error::Config(format!(
                "display needs 0 <= l_blk < l_max, got l_blk={l_blk}, l_max={l_max}"
            )));
        }
        if !(0.0..1.0).contains(&reflectivity_k) {
            return Err(Error::Config(format!(
                "reflectivity k must lie in [0, 1), got {reflectivity_k}"
            )));
        }
        if !(ambient_lux.is_finite() && ambient_lux >= 0.0) {
            return Err(Error::Config(format!(
                "ambient illuminance must be >= 0, got {ambient_lux}"
            )));
        }
        eotf.validate()
    }

    /// Reflected ambient luminance `k / π · E_amb`.
    pub fn ambient_luminance(&self) -> f64 {
        self.reflectivity_k / PI * self.ambient_lux
    }

    /// Luminance emitted for a single luma value (no checks).
    #[inline]
    pub fn luminance(&self, v: f64, include_ambient: bool) -> f64 {
        let emitted = (self.l_max - self.l_blk) * self.eotf.apply_unchecked(v) + self.l_blk;
        if include_ambient {
            emitted + self.ambient_luminance()
        } else {
            emitted
        }
    }

    /// Loads a named preset (`sdr`, `hdr`) or a JSON file with keys
    /// `l_max`, `l_blk`, `k`, `ambient_lux`, `eotf`.
    pub fn load(spec: &str) -> Result<Self> {
        let model = match spec.to_ascii_lowercase().as_str() {
            "sdr" => DisplayModel::sdr(),
            "hdr" => DisplayModel::hdr(),
            _ => {
                let path = Path::new(spec);
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                DisplayModel::from_json(&text)
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
            }
        };
        model.validate()?;
        Ok(model)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: DisplayModel =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }
}

/// Simulates the display: maps every luma value of `v_image` to luminance.
pub fn display_response(
    v_image: &Grid,
    model: &DisplayModel,
    include_ambient: bool,
) -> Result<LuminanceImage> {
    model.validate()?;
    if let Some(bad) = v_image
        .as_slice()
        .iter()
        .find(|v| !(0.0..=1.0).contains(*v))
    {
        return Err(Error::Domain(format!("luma {bad} outside [0, 1]")));
    }
    Ok(LuminanceImage(
        v_image.map(|v| model.luminance(v, include_ambient)),
    ))
}

/// Peak-luminance distribution used to augment simulated displays.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakSampling {
    pub mean: f64,
    pub std_dev: f64,
}

impl PeakSampling {
    pub fn for_domain(domain: Domain) -> Self {
        match domain {
            Domain::Sdr => PeakSampling {
                mean: 100.0,
                std_dev: 10.0,
            },
            Domain::Hdr => PeakSampling {
                mean: 5000.0,
                std_dev: 500.0,
            },
        }
    }

    /// Draws a peak luminance, floored at `l_blk + 1` cd/m².
    pub fn sample<R: Rng + ?Sized>(&self, l_blk: f64, rng: &mut R) -> Result<f64> {
        let normal = Normal::new(self.mean, self.std_dev)
            .map_err(|e| Error::Config(format!("peak distribution: {e}")))?;
        Ok(normal.sample(rng).max(l_blk + 1.0))
    }
}

/// Draws `L_max` from N(100, 10) for SDR or N(5000, 500) for HDR.
pub fn sample_lmax<R: Rng + ?Sized>(domain: Domain, rng: &mut R) -> f64 {
    PeakSampling::for_domain(domain)
        .sample(DisplayModel::preset(domain).l_blk, rng)
        .expect("built-in peak distributions are valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;

    /// Independent scalar statement of the display equations.
    fn reference_luminance(v: f64, l_max: f64, l_blk: f64, gamma: f64, k: f64, e: f64) -> f64 {
        let f = v.powf(gamma);
        l_max * f - l_blk * f + l_blk + k * e / PI
    }

    #[test]
    fn eotf_boundaries_and_midpoint() {
        assert_eq!(eotf(0.0, Eotf::Gamma(2.2)).unwrap(), 0.0);
        assert_eq!(eotf(1.0, Eotf::Srgb).unwrap(), 1.0);
        assert_eq!(eotf(0.0, Eotf::Srgb).unwrap(), 0.0);
        assert_eq!(eotf(1.0, Eotf::Linear).unwrap(), 1.0);
        let mid = eotf(0.5, Eotf::Gamma(2.2)).unwrap();
        assert!((mid - 0.217_637_640_824_031).abs() < 1e-12, "{mid}");
    }

    #[test]
    fn eotf_rejects_out_of_range() {
        assert!(matches!(eotf(1.01, Eotf::Srgb), Err(Error::Domain(_))));
        assert!(matches!(eotf(-0.1, Eotf::Linear), Err(Error::Domain(_))));
        assert!(eotf(f64::NAN, Eotf::Linear).is_err());
    }

    #[test]
    fn srgb_is_continuous_at_breakpoint() {
        let below = Eotf::Srgb.apply_unchecked(0.04045);
        let above = Eotf::Srgb.apply_unchecked(0.04045 + 1e-12);
        // The standard's two pieces meet to within 2.4e-9.
        assert!((below - above).abs() < 1e-8);
    }

    #[test]
    fn sdr_preset_endpoints() {
        let v = Grid::new(2, 1, vec![0.0, 1.0]).unwrap();
        let l = display_response(&v, &DisplayModel::sdr(), false).unwrap();
        assert_eq!(l.grid().as_slice(), &[0.5, 100.0]);
    }

    #[test]
    fn midpoint_matches_scalar_oracle() {
        let model = DisplayModel::sdr();
        let l = model.luminance(0.5, false);
        let expected = reference_luminance(0.5, 100.0, 0.5, 2.2, 0.0, 0.0);
        assert!((l - expected).abs() < 1e-12);
        assert!((l - 22.155).abs() < 1e-3, "{l}");
    }

    #[test]
    fn ambient_term() {
        let model = DisplayModel {
            reflectivity_k: 0.005,
            ambient_lux: 500.0,
            ..DisplayModel::sdr()
        };
        let amb = model.ambient_luminance();
        assert!((amb - 0.795_774_715_459_476_7).abs() < 1e-12, "{amb}");
        let v = Grid::filled(3, 3, 0.0);
        let l = display_response(&v, &model, true).unwrap();
        assert!(l.grid().as_slice().iter().all(|&x| (x - (0.5 + amb)).abs() < 1e-12));
    }

    #[test]
    fn invalid_models_are_configuration_errors() {
        let v = Grid::filled(1, 1, 0.5);
        for bad in [
            DisplayModel { l_blk: 100.0, ..DisplayModel::sdr() },
            DisplayModel { l_blk: -1.0, ..DisplayModel::sdr() },
            DisplayModel { reflectivity_k: 1.0, ..DisplayModel::sdr() },
            DisplayModel { ambient_lux: -3.0, ..DisplayModel::sdr() },
            DisplayModel { eotf: Eotf::Gamma(0.0), ..DisplayModel::sdr() },
        ] {
            assert!(matches!(display_response(&v, &bad, false), Err(Error::Config(_))));
        }
    }

    #[test]
    fn out_of_range_pixels_rejected() {
        let v = Grid::new(2, 1, vec![0.2, 1.5]).unwrap();
        assert!(matches!(
            display_response(&v, &DisplayModel::sdr(), false),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn presets_keep_reflectivity_small() {
        assert!(DisplayModel::sdr().reflectivity_k < 0.01);
        assert!(DisplayModel::hdr().reflectivity_k < 0.01);
    }

    #[test]
    fn json_presets() {
        let m = DisplayModel::from_json(
            r#"{"l_max": 400, "l_blk": 0.1, "k": 0.004, "ambient_lux": 250, "eotf": "gamma:2.4"}"#,
        )
        .unwrap();
        assert_eq!(m.eotf, Eotf::Gamma(2.4));
        assert_eq!(m.reflectivity_k, 0.004);
        let m = DisplayModel::from_json(r#"{"l_max": 100, "l_blk": 0.5, "eotf": "srgb"}"#).unwrap();
        assert_eq!(m.eotf, Eotf::Srgb);
        assert_eq!(m.ambient_lux, 0.0);
        let round = serde_json::to_string(&m).unwrap();
        assert_eq!(DisplayModel::from_json(&round).unwrap(), m);
        assert!(DisplayModel::from_json(r#"{"l_max": 1, "l_blk": 2, "eotf": "linear"}"#).is_err());
        assert!(DisplayModel::from_json(r#"{"l_max": 10, "l_blk": 0, "eotf": "hlg"}"#).is_err());
    }

    #[test]
    fn lmax_sampling_bounds_and_reproducibility() {
        let mut rng = stream(11, &[]);
        for _ in 0..1000 {
            let s = sample_lmax(Domain::Sdr, &mut rng);
            assert!((60.0..=140.0).contains(&s), "{s}");
            let h = sample_lmax(Domain::Hdr, &mut rng);
            assert!((3000.0..=7000.0).contains(&h), "{h}");
        }
        let a: Vec<f64> = {
            let mut r = stream(3, &[]);
            (0..16).map(|_| sample_lmax(Domain::Hdr, &mut r)).collect()
        };
        let b: Vec<f64> = {
            let mut r = stream(3, &[]);
            (0..16).map(|_| sample_lmax(Domain::Hdr, &mut r)).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn lmax_monte_carlo_mean() {
        let mut rng = stream(2024, &[]);
        let n = 100_000;
        let mean = (0..n).map(|_| sample_lmax(Domain::Sdr, &mut rng)).sum::<f64>() / n as f64;
        assert!((99.8..=100.2).contains(&mean), "{mean}");
    }

    #[test]
    fn lmax_floor_applies() {
        let sampling = PeakSampling {
            mean: -50.0,
            std_dev: 1.0,
        };
        let mut rng = stream(1, &[]);
        assert_eq!(sampling.sample(0.5, &mut rng).unwrap(), 1.5);
    }

    proptest! {
        #[test]
        fn response_is_monotone_and_bounded(
            a in 0.0f64..=1.0,
            b in 0.0f64..=1.0,
            gamma in 0.3f64..4.0,
            srgb in any::<bool>(),
            ambient in any::<bool>(),
        ) {
            let model = DisplayModel {
                eotf: if srgb { Eotf::Srgb } else { Eotf::Gamma(gamma) },
                ambient_lux: 300.0,
                ..DisplayModel::sdr()
            };
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let l_lo = model.luminance(lo, ambient);
            let l_hi = model.luminance(hi, ambient);
            if hi - lo > 1e-6 {
                prop_assert!(l_lo < l_hi);
            }
            let amb = if ambient { model.ambient_luminance() } else { 0.0 };
            prop_assert!(l_lo >= model.l_blk + amb - 1e-12);
            prop_assert!(l_hi <= model.l_max + amb + 1e-12);
        }
    }
}
