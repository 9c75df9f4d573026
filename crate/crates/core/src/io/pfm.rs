//! Grayscale Portable Float Map.
//!
//! Header: `Pf\n<width> <height>\n<scale>\n`, then `width × height` 32-bit
//! floats stored bottom row first. A negative scale marks little-endian data.

use std::fs;
use std::path::Path;

use super::{ColorspaceTag, ImageFile};
use crate::grid::Grid;
use crate::{Error, Result};

/// Parses the next whitespace-delimited header token, returning it and the
/// offset just past it.
fn token<'a>(bytes: &'a [u8], mut pos: usize, path: &Path) -> Result<(&'a str, usize)> {
    while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
        pos += 1;
    }
    let start = pos;
    while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
        pos += 1;
    }
    if start == pos {
        return Err(Error::parse(path, format!("byte {start}"), "truncated header"));
    }
    let text = std::str::from_utf8(&bytes[start..pos])
        .map_err(|_| Error::parse(path, format!("byte {start}"), "header is not ASCII"))?;
    Ok((text, pos))
}

pub fn decode_pfm(bytes: &[u8], path: &Path) -> Result<ImageFile> {
    let (magic, pos) = token(bytes, 0, path)?;
    match magic {
        "Pf" => {}
        "PF" => {
            return Err(Error::Unsupported {
                path: path.to_path_buf(),
                message: "3-channel PFM (PF); only grayscale Pf is supported".into(),
            })
        }
        other => {
            return Err(Error::parse(path, "byte 0", format!("bad PFM magic {other:?}")));
        }
    }
    let (w_text, pos_w) = token(bytes, pos, path)?;
    let (h_text, pos_h) = token(bytes, pos_w, path)?;
    let (s_text, pos_s) = token(bytes, pos_h, path)?;
    let dim = |text: &str, at: usize| -> Result<usize> {
        text.parse::<usize>()
            .ok()
            .filter(|&v| v > 0)
            .ok_or_else(|| Error::parse(path, format!("byte {at}"), format!("bad dimension {text:?}")))
    };
    let width = dim(w_text, pos)?;
    let height = dim(h_text, pos_w)?;
    let scale: f32 = s_text
        .parse()
        .ok()
        .filter(|s: &f32| s.is_finite() && *s != 0.0)
        .ok_or_else(|| Error::parse(path, format!("byte {pos_h}"), format!("bad scale {s_text:?}")))?;
    // Exactly one whitespace byte separates the header from the payload.
    if pos_s >= bytes.len() || !bytes[pos_s].is_ascii_whitespace() {
        return Err(Error::parse(path, format!("byte {pos_s}"), "missing header terminator"));
    }
    let data_start = pos_s + 1;
    let count = width
        .checked_mul(height)
        .ok_or_else(|| Error::parse(path, format!("byte {pos}"), "dimensions overflow"))?;
    let needed = count
        .checked_mul(4)
        .ok_or_else(|| Error::parse(path, format!("byte {pos}"), "dimensions overflow"))?;
    let payload = &bytes[data_start..];
    if payload.len() < needed {
        return Err(Error::parse(
            path,
            format!("byte {}", bytes.len()),
            format!(
                "truncated payload: need {needed} bytes after offset {data_start}, found {}",
                payload.len()
            ),
        ));
    }
    let little_endian = scale < 0.0;
    let mut data = vec![0.0f64; count];
    for (i, chunk) in payload[..needed].chunks_exact(4).enumerate() {
        let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little_endian {
            f32::from_le_bytes(raw)
        } else {
            f32::from_be_bytes(raw)
        };
        if !v.is_finite() {
            return Err(Error::parse(
                path,
                format!("byte {}", data_start + 4 * i),
                "non-finite pixel",
            ));
        }
        let (file_row, col) = (i / width, i % width);
        data[(height - 1 - file_row) * width + col] = v as f64;
    }
    Ok(ImageFile {
        pixels: Grid::new(width, height, data)?,
        bit_depth: 32,
        colorspace: ColorspaceTag::LinearLuminance,
    })
}

/// Little-endian `Pf` encoding; pixels are narrowed to `f32`.
pub fn encode_pfm(grid: &Grid) -> Vec<u8> {
    let header = format!("Pf\n{} {}\n-1.0\n", grid.width(), grid.height());
    let mut out = Vec::with_capacity(header.len() + 4 * grid.len());
    out.extend_from_slice(header.as_bytes());
    for row in (0..grid.height()).rev() {
        for &v in grid.row(row) {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

pub fn read_pfm(path: &Path) -> Result<ImageFile> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pfm(&bytes, path)
}

pub fn write_pfm(path: &Path, image: &Grid) -> Result<()> {
    if image.as_slice().iter().any(|v| !(*v as f32).is_finite()) {
        return Err(Error::Data(format!(
            "{}: refusing to write non-finite pixels",
            path.display()
        )));
    }
    fs::write(path, encode_pfm(image)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("test.pfm")
    }

    #[test]
    fn rows_are_stored_bottom_up() {
        let g = Grid::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let bytes = encode_pfm(&g);
        let header_len = b"Pf\n2 2\n-1.0\n".len();
        let first = f32::from_le_bytes(bytes[header_len..header_len + 4].try_into().unwrap());
        assert_eq!(first, 3.0);
        assert_eq!(decode_pfm(&bytes, p()).unwrap().pixels, g);
    }

    #[test]
    fn big_endian_payload() {
        let mut bytes = b"Pf\n2 1\n1.0\n".to_vec();
        bytes.extend_from_slice(&1.5f32.to_be_bytes());
        bytes.extend_from_slice(&(-2.0f32).to_be_bytes());
        let img = decode_pfm(&bytes, p()).unwrap();
        assert_eq!(img.pixels.as_slice(), &[1.5, -2.0]);
        assert_eq!(img.colorspace, ColorspaceTag::LinearLuminance);
        assert_eq!(img.bit_depth, 32);
    }

    #[test]
    fn negative_scale_is_little_endian() {
        let mut bytes = b"Pf\n1 1\n-4.0\n".to_vec();
        bytes.extend_from_slice(&0.25f32.to_le_bytes());
        assert_eq!(decode_pfm(&bytes, p()).unwrap().pixels.as_slice(), &[0.25]);
    }

    #[test]
    fn color_pfm_rejected() {
        let bytes = b"PF\n1 1\n-1.0\n\0\0\0\0\0\0\0\0\0\0\0\0".to_vec();
        assert!(matches!(decode_pfm(&bytes, p()), Err(Error::Unsupported { .. })));
    }

    #[test]
    fn malformed_headers() {
        for bad in [&b"P6\n1 1\n-1.0\n"[..], b"Pf\nx 1\n-1.0\n", b"Pf\n1 1\n0\n", b"Pf\n1"] {
            assert!(matches!(decode_pfm(bad, p()), Err(Error::Parse { .. })), "{bad:?}");
        }
    }

    #[test]
    fn truncated_payload_reports_offset() {
        let mut bytes = b"Pf\n2 2\n-1.0\n".to_vec();
        bytes.extend_from_slice(&[0u8; 7]);
        let err = decode_pfm(&bytes, p()).unwrap_err().to_string();
        assert!(err.contains("byte 19") && err.contains("offset 12"), "{err}");
    }

    #[test]
    fn non_finite_rejected() {
        let mut bytes = b"Pf\n1 1\n-1.0\n".to_vec();
        bytes.extend_from_slice(&f32::NAN.to_le_bytes());
        assert!(decode_pfm(&bytes, p()).is_err());
        let g = Grid::filled(1, 1, f64::INFINITY);
        let dir = tempfile::tempdir().unwrap();
        assert!(write_pfm(&dir.path().join("x.pfm"), &g).is_err());
    }
}
