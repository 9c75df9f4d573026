//! Perceptually uniform luminance encodings.
//!
//! Two encoders are provided:
//!
//! * **PU21**, banding + glare variant. Maps 0.005–10000 cd/m² onto roughly
//!   0–595 units, with 100 cd/m² landing near 256 so that SDR content keeps
//!   the scale 8-bit metrics were designed for.
//! * **PQ** (SMPTE ST 2084), optionally scaled by 255.
//!
//! Encoded images can then be normalized for network input either by the
//! encoder's maximum (`Pmax`) or by 255 (`Div255`).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::grid::{Grid, LuminanceImage};
use crate::{Error, Result};

/// PU21 banding + glare coefficients `p1..p7`, copied from the reference
/// implementation published with PU21 (Mantiuk & Azimi, "PU21: A novel
/// perceptually uniform encoding for adapting existing quality metrics for
/// HDR", PCS 2021).
pub const PU21_BANDING_GLARE: [f64; 7] = [
    0.353_487_901,
    0.373_465_862_9,
    8.277_049_286e-5,
    0.906_256_262_7,
    0.091_503_031_66,
    0.909_951_720_4,
    596.314_814_2,
];

/// Lowest luminance the PU21 fit is calibrated for (cd/m²).
pub const PU21_L_MIN: f64 = 0.005;
/// Highest luminance the PU21 fit is calibrated for (cd/m²).
pub const PU21_L_MAX: f64 = 10_000.0;

/// Peak luminance of the PQ signal (cd/m²).
pub const PQ_L_MAX: f64 = 10_000.0;

// SMPTE ST 2084 constants.
const PQ_M1: f64 = 2610.0 / 16384.0;
const PQ_M2: f64 = 2523.0 / 4096.0 * 128.0;
const PQ_C1: f64 = 3424.0 / 4096.0;
const PQ_C2: f64 = 2413.0 / 4096.0 * 32.0;
const PQ_C3: f64 = 2392.0 / 4096.0 * 32.0;

/// PU21 of a single luminance value already inside the calibrated range.
#[inline]
fn pu21_unclamped(l: f64) -> f64 {
    let [p1, p2, p3, p4, p5, p6, p7] = PU21_BANDING_GLARE;
    let lp = l.powf(p4);
    p7 * (((p1 + p2 * lp) / (1.0 + p3 * lp)).powf(p5) - p6)
}

/// PU21 of one luminance value; clamps to the calibrated range first.
#[inline]
pub fn pu21(l: f64) -> f64 {
    pu21_unclamped(l.clamp(PU21_L_MIN, PU21_L_MAX))
}

/// `P_max`: PU21 of 10000 cd/m², roughly 595.
pub fn pu21_max() -> f64 {
    pu21_unclamped(PU21_L_MAX)
}

/// Inverse of [`pu21`] by bisection in log-luminance.
pub fn pu21_inverse(p: f64) -> Result<f64> {
    let lo_p = pu21_unclamped(PU21_L_MIN);
    let hi_p = pu21_max();
    if !(p.is_finite() && lo_p <= p && p <= hi_p) {
        return Err(Error::Domain(format!(
            "PU value {p} outside encoder range [{lo_p}, {hi_p}]"
        )));
    }
    let (mut lo, mut hi) = (PU21_L_MIN.ln(), PU21_L_MAX.ln());
    // 60 halvings of a ~15.2-wide log interval leave well under 1e-12.
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if pu21_unclamped(mid.exp()) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

/// SMPTE ST 2084 inverse EOTF, normalized to `[0, 1]`. Input is clamped to
/// `[0, 10000]`.
#[inline]
pub fn pq(l: f64) -> f64 {
    let y = (l.clamp(0.0, PQ_L_MAX) / PQ_L_MAX).powf(PQ_M1);
    ((PQ_C1 + PQ_C2 * y) / (1.0 + PQ_C3 * y)).powf(PQ_M2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Encoder {
    Pu21,
    /// PQ signal in `[0, 1]`.
    Pq,
    /// PQ signal scaled to `[0, 255]`.
    Pq255,
}

impl Encoder {
    /// Encoder output at the top of its range (10000 cd/m²).
    pub fn peak(self) -> f64 {
        match self {
            Encoder::Pu21 => pu21_max(),
            Encoder::Pq => 1.0,
            Encoder::Pq255 => 255.0,
        }
    }

    pub fn encode(self, luminance: &LuminanceImage) -> EncodedImage {
        match self {
            Encoder::Pu21 => pu21_encode(luminance),
            Encoder::Pq => pq_encode(luminance, false),
            Encoder::Pq255 => pq_encode(luminance, true),
        }
    }
}

impl FromStr for Encoder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pu21" => Ok(Encoder::Pu21),
            "pq" => Ok(Encoder::Pq),
            "pq255" => Ok(Encoder::Pq255),
            _ => Err(Error::Config(format!("unknown encoder {s:?}"))),
        }
    }
}

/// How encoded values are rescaled before being fed to a network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Scheme {
    /// Divide by the encoder value at 10000 cd/m².
    #[default]
    #[serde(rename = "pmax")]
    Pmax,
    /// Divide by 255, so 100 cd/m² sits near 1.0.
    #[serde(rename = "255")]
    Div255,
    #[serde(rename = "none")]
    None,
}

impl Scheme {
    /// Divisor applied by this scheme for `encoder`.
    pub fn divisor(self, encoder: Encoder) -> f64 {
        match self {
            Scheme::Pmax => encoder.peak(),
            Scheme::Div255 => 255.0,
            Scheme::None => 1.0,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Pmax => "pmax",
            Scheme::Div255 => "255",
            Scheme::None => "none",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pmax" => Ok(Scheme::Pmax),
            "255" | "div255" => Ok(Scheme::Div255),
            "none" => Ok(Scheme::None),
            _ => Err(Error::Config(format!("unknown normalization scheme {s:?}"))),
        }
    }
}

/// Encoded luminance plus the bookkeeping needed to interpret it.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedImage {
    pub values: Grid,
    pub encoder: Encoder,
    pub scheme: Scheme,
    /// Pixels that fell outside the encoder's input range and were clamped.
    pub clamped: usize,
}

/// PU21-encodes a luminance image, clamping to `[0.005, 10000]` cd/m².
pub fn pu21_encode(l: &LuminanceImage) -> EncodedImage {
    let mut clamped = 0;
    let values = l.grid().map(pu21);
    for &v in l.grid().as_slice() {
        if !(PU21_L_MIN..=PU21_L_MAX).contains(&v) {
            clamped += 1;
        }
    }
    if clamped > 0 {
        log::debug!("pu21_encode clamped {clamped} pixels to the calibrated range");
    }
    EncodedImage {
        values,
        encoder: Encoder::Pu21,
        scheme: Scheme::None,
        clamped,
    }
}

/// Decodes PU21 units back to luminance.
pub fn pu21_decode(p: &Grid) -> Result<LuminanceImage> {
    let data = p
        .as_slice()
        .iter()
        .map(|&v| pu21_inverse(v))
        .collect::<Result<Vec<_>>>()?;
    Ok(LuminanceImage(Grid::new(p.width(), p.height(), data)?))
}

/// PQ-encodes a luminance image; values above 10000 cd/m² are clamped.
pub fn pq_encode(l: &LuminanceImage, scale255: bool) -> EncodedImage {
    let scale = if scale255 { 255.0 } else { 1.0 };
    let clamped = l
        .grid()
        .as_slice()
        .iter()
        .filter(|v| !(0.0..=PQ_L_MAX).contains(*v))
        .count();
    EncodedImage {
        values: l.grid().map(|v| scale * pq(v)),
        encoder: if scale255 { Encoder::Pq255 } else { Encoder::Pq },
        scheme: Scheme::None,
        clamped,
    }
}

/// Rescales raw encoder output according to `scheme`.
pub fn normalize(e: &EncodedImage, scheme: Scheme) -> Result<EncodedImage> {
    if e.scheme != Scheme::None {
        return Err(Error::State(format!(
            "image is already normalized with scheme {}",
            e.scheme
        )));
    }
    let divisor = scheme.divisor(e.encoder);
    Ok(EncodedImage {
        values: e.values.map(|v| v / divisor),
        encoder: e.encoder,
        scheme,
        clamped: e.clamped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lum(values: &[f64]) -> LuminanceImage {
        LuminanceImage(Grid::new(values.len(), 1, values.to_vec()).unwrap())
    }

    fn raw(value: f64, encoder: Encoder) -> EncodedImage {
        EncodedImage {
            values: Grid::filled(1, 1, value),
            encoder,
            scheme: Scheme::None,
            clamped: 0,
        }
    }

    #[test]
    fn pu21_anchor_points() {
        let at_100 = pu21(100.0);
        assert!((256.0 * 0.97..=256.0 * 1.03).contains(&at_100), "{at_100}");
        let at_max = pu21(10_000.0);
        assert!((595.0 * 0.97..=595.0 * 1.03).contains(&at_max), "{at_max}");
        assert!(pu21(0.005).abs() <= 5.0);
        let span = pu21(100.0) - pu21(0.1);
        assert!((230.0..=280.0).contains(&span), "{span}");
    }

    #[test]
    fn pu21_clamps_and_counts() {
        let e = pu21_encode(&lum(&[0.0, -3.0, 1.0, 20_000.0]));
        assert_eq!(e.clamped, 3);
        assert_eq!(e.values.get(0, 0), pu21(PU21_L_MIN));
        assert_eq!(e.values.get(0, 3), pu21_max());
        assert!(e.values.as_slice().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn pu21_decode_round_trips() {
        let one = pu21_inverse(pu21(1.0)).unwrap();
        assert!((one - 1.0).abs() <= 1e-6);
        let five_k = pu21_inverse(pu21(5000.0)).unwrap();
        assert!(((five_k - 5000.0) / 5000.0).abs() <= 0.005);
        for i in 0..=200 {
            let l = 0.01 * (9999.0f64 / 0.01).powf(i as f64 / 200.0);
            let back = pu21_inverse(pu21(l)).unwrap();
            assert!(((back - l) / l).abs() <= 1e-6, "{l} -> {back}");
        }
    }

    #[test]
    fn pu21_decode_rejects_out_of_range() {
        assert!(matches!(pu21_inverse(-10.0), Err(Error::Domain(_))));
        assert!(matches!(pu21_inverse(700.0), Err(Error::Domain(_))));
        let grid = Grid::new(2, 1, vec![100.0, 1e6]).unwrap();
        assert!(pu21_decode(&grid).is_err());
    }

    #[test]
    fn pq_anchor_points() {
        // The closed form gives c1^m2 ≈ 7.3e-7 at zero, below one 12-bit code.
        assert!((pq(0.0) - 7.309_559_025_783_966e-7).abs() < 1e-18);
        assert!(pq(0.0) < 1.0 / 4096.0);
        assert!((pq(10_000.0) - 1.0).abs() < 1e-12);
        let scaled = pq_encode(&lum(&[10_000.0]), true);
        assert!((scaled.values.get(0, 0) - 255.0).abs() < 1e-9);
        // Independent scalar evaluation of the ST 2084 closed form.
        assert!((pq(100.0) - 0.508_078_421_517_399).abs() < 1e-12);
        let over = pq_encode(&lum(&[12_000.0, 50.0]), false);
        assert_eq!(over.clamped, 1);
    }

    #[test]
    fn strict_monotonicity_over_sorted_samples() {
        let n = 10_000;
        let samples: Vec<f64> = (0..n)
            .map(|i| PU21_L_MIN * (PU21_L_MAX / PU21_L_MIN).powf(i as f64 / (n - 1) as f64))
            .collect();
        for w in samples.windows(2) {
            assert!(pu21(w[0]) < pu21(w[1]));
            assert!(pq(w[0]) < pq(w[1]));
        }
    }

    #[test]
    fn normalization_schemes() {
        let div = normalize(&raw(256.0, Encoder::Pu21), Scheme::Div255).unwrap();
        assert!((div.values.get(0, 0) - 256.0 / 255.0).abs() < 1e-15);
        assert_eq!(div.scheme, Scheme::Div255);

        let pmax = normalize(&raw(255.0, Encoder::Pu21), Scheme::Pmax).unwrap();
        assert!((pmax.values.get(0, 0) - 0.43).abs() <= 0.02);

        let top = normalize(&pu21_encode(&lum(&[10_000.0])), Scheme::Div255).unwrap();
        assert!((top.values.get(0, 0) - 2.33).abs() <= 0.12);

        let pq_top = normalize(&pq_encode(&lum(&[10_000.0]), true), Scheme::Pmax).unwrap();
        assert!((pq_top.values.get(0, 0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn double_normalization_is_a_state_error() {
        let once = normalize(&raw(10.0, Encoder::Pu21), Scheme::Pmax).unwrap();
        assert!(matches!(normalize(&once, Scheme::Div255), Err(Error::State(_))));
    }

    #[test]
    fn scheme_parsing() {
        assert_eq!("pmax".parse::<Scheme>().unwrap(), Scheme::Pmax);
        assert_eq!("255".parse::<Scheme>().unwrap(), Scheme::Div255);
        assert_eq!("none".parse::<Scheme>().unwrap(), Scheme::None);
        assert!("max".parse::<Scheme>().is_err());
        assert_eq!(serde_json::to_string(&Scheme::Div255).unwrap(), "\"255\"");
    }

    proptest! {
        #[test]
        fn normalize_is_linear(x in 0.0f64..600.0, a in 0.01f64..10.0, div255 in any::<bool>()) {
            let scheme = if div255 { Scheme::Div255 } else { Scheme::Pmax };
            let lhs = normalize(&raw(a * x, Encoder::Pu21), scheme).unwrap().values.get(0, 0);
            let rhs = a * normalize(&raw(x, Encoder::Pu21), scheme).unwrap().values.get(0, 0);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
        }

        #[test]
        fn encode_decode_identity(l in 0.01f64..9999.0) {
            let back = pu21_inverse(pu21(l)).unwrap();
            prop_assert!(((back - l) / l).abs() <= 1e-6);
        }
    }
}
