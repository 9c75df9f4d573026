//! Image and manifest file formats.
//!
//! * PFM (`Pf`, single channel, 32-bit float): linear luminance.
//! * 8-bit PNG, grayscale or RGB: display-encoded luma `V ∈ [0, 1]`.
//! * Manifest CSV: one row per reference/distorted pair.

pub mod manifest;
pub mod pfm;
pub mod png8;

use std::path::Path;

use crate::display::{display_response, DisplayModel};
use crate::grid::{Grid, LuminanceImage};
use crate::{Error, Result};

pub use pfm::{read_pfm, write_pfm};
pub use png8::{read_png8, write_png8};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColorspaceTag {
    DisplayEncodedSdr,
    LinearLuminance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageFile {
    pub pixels: Grid,
    pub bit_depth: u8,
    pub colorspace: ColorspaceTag,
}

/// Reads a PFM or PNG file, dispatching on the extension.
pub fn read_image(path: &Path) -> Result<ImageFile> {
    match extension(path).as_deref() {
        Some("pfm") => read_pfm(path),
        Some("png") => read_png8(path),
        _ => Err(Error::Unsupported {
            path: path.to_path_buf(),
            message: "expected a .pfm or .png file".into(),
        }),
    }
}

fn extension(path: &Path) -> Option<String> {
    path.extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
}

/// Luminance of an image file: PFM data is taken as-is, PNG luma is shown on
/// `display`.
pub fn to_luminance(image: &ImageFile, display: &DisplayModel) -> Result<LuminanceImage> {
    match image.colorspace {
        ColorspaceTag::LinearLuminance => Ok(LuminanceImage(image.pixels.clone())),
        ColorspaceTag::DisplayEncodedSdr => display_response(&image.pixels, display, false),
    }
}

/// Reads an image file and converts it to luminance.
pub fn load_luminance(path: &Path, display: &DisplayModel) -> Result<LuminanceImage> {
    to_luminance(&read_image(path)?, display)
}

/// Display used for a manifest record: `base` (or the domain preset) driven
/// at the record's `L_max` when one is stored.
pub fn record_display(
    record: &manifest::DatasetRecord,
    base: Option<&DisplayModel>,
) -> DisplayModel {
    let display = base
        .copied()
        .unwrap_or_else(|| DisplayModel::preset(record.domain));
    match record.l_max {
        Some(l_max) if l_max > display.l_blk => display.with_l_max(l_max),
        _ => display,
    }
}

/// Loads the reference and distorted luminance of a manifest record.
pub fn load_pair(
    manifest: &manifest::DatasetManifest,
    record: &manifest::DatasetRecord,
    base: Option<&DisplayModel>,
) -> Result<(LuminanceImage, LuminanceImage)> {
    let display = record_display(record, base);
    let reference = load_luminance(&manifest.resolve(&record.ref_path), &display)?;
    let distorted = load_luminance(&manifest.resolve(&record.dist_path), &display)?;
    reference.grid().ensure_same_shape(distorted.grid())?;
    Ok((reference, distorted))
}
