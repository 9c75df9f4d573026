//! 8-bit PNG holding display-encoded luma.
//!
//! Grayscale files map byte `b` to `V = b / 255`. RGB files are reduced to
//! luma with Rec.709 weights on the encoded values; alpha is ignored.
//! Palette and 16-bit files are rejected.

use std::fs::File;
use std::io::{BufReader, BufWriter, Cursor};
use std::path::Path;

use png::{BitDepth, ColorType, Transformations};

use super::{ColorspaceTag, ImageFile};
use crate::display::REC709_LUMA;
use crate::grid::Grid;
use crate::{Error, Result};

fn unsupported(path: &Path, message: impl Into<String>) -> Error {
    Error::Unsupported {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn decode<R: std::io::BufRead + std::io::Seek>(reader: R, path: &Path) -> Result<ImageFile> {
    let mut decoder = png::Decoder::new(reader);
    decoder.set_transformations(Transformations::IDENTITY);
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::parse(path, "header", e.to_string()))?;
    let info = reader.info();
    if info.bit_depth != BitDepth::Eight {
        return Err(unsupported(
            path,
            format!("{:?}-bit PNG; only 8-bit is supported", info.bit_depth),
        ));
    }
    let channels = match info.color_type {
        ColorType::Grayscale => 1,
        ColorType::GrayscaleAlpha => 2,
        ColorType::Rgb => 3,
        ColorType::Rgba => 4,
        ColorType::Indexed => return Err(unsupported(path, "palette PNG")),
    };
    if info.interlaced {
        return Err(unsupported(path, "interlaced PNG"));
    }
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::parse(path, "header", "image too large"))?;
    let mut buf = vec![0u8; size];
    let frame = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::parse(path, "image data", e.to_string()))?;
    let (width, height) = (frame.width as usize, frame.height as usize);
    let mut data = Vec::with_capacity(width * height);
    for row in 0..height {
        let line = &buf[row * frame.line_size..row * frame.line_size + width * channels];
        for px in line.chunks_exact(channels) {
            let v = if channels >= 3 {
                (REC709_LUMA[0] * px[0] as f64
                    + REC709_LUMA[1] * px[1] as f64
                    + REC709_LUMA[2] * px[2] as f64)
                    / 255.0
            } else {
                px[0] as f64 / 255.0
            };
            data.push(v.clamp(0.0, 1.0));
        }
    }
    Ok(ImageFile {
        pixels: Grid::new(width, height, data)?,
        bit_depth: 8,
        colorspace: ColorspaceTag::DisplayEncodedSdr,
    })
}

pub fn decode_png8(bytes: &[u8], path: &Path) -> Result<ImageFile> {
    decode(Cursor::new(bytes), path)
}

pub fn read_png8(path: &Path) -> Result<ImageFile> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    decode(BufReader::new(file), path)
}

/// Quantizes `V ∈ [0, 1]` to bytes; values outside are clamped.
pub fn quantize_8bit(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn write_png8(path: &Path, image: &Grid) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut encoder = png::Encoder::new(
        BufWriter::new(file),
        image.width() as u32,
        image.height() as u32,
    );
    encoder.set_color(ColorType::Grayscale);
    encoder.set_depth(BitDepth::Eight);
    let bytes: Vec<u8> = image.as_slice().iter().map(|&v| quantize_8bit(v)).collect();
    let mut writer = encoder
        .write_header()
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    writer
        .write_image_data(&bytes)
        .and_then(|_| writer.finish())
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn encode(width: u32, height: u32, color: ColorType, depth: BitDepth, data: &[u8]) -> Vec<u8> {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, width, height);
            enc.set_color(color);
            enc.set_depth(depth);
            if color == ColorType::Indexed {
                enc.set_palette(vec![0u8, 0, 0, 255, 255, 255]);
            }
            let mut w = enc.write_header().unwrap();
            w.write_image_data(data).unwrap();
        }
        out
    }

    #[test]
    fn gray_scaling() {
        let bytes = encode(3, 1, ColorType::Grayscale, BitDepth::Eight, &[0, 128, 255]);
        let img = decode_png8(&bytes, Path::new("g.png")).unwrap();
        assert_eq!(img.pixels.as_slice(), &[0.0, 128.0 / 255.0, 1.0]);
        assert_eq!(img.colorspace, ColorspaceTag::DisplayEncodedSdr);
    }

    #[test]
    fn rgb_reduced_with_rec709() {
        let bytes = encode(2, 1, ColorType::Rgb, BitDepth::Eight, &[255, 0, 0, 255, 255, 255]);
        let img = decode_png8(&bytes, Path::new("c.png")).unwrap();
        assert!((img.pixels.get(0, 0) - 0.2126).abs() < 1e-12);
        assert!((img.pixels.get(0, 1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sixteen_bit_and_palette_rejected() {
        let deep = encode(1, 1, ColorType::Grayscale, BitDepth::Sixteen, &[1, 2]);
        assert!(matches!(
            decode_png8(&deep, Path::new("d.png")),
            Err(Error::Unsupported { .. })
        ));
        let pal = encode(2, 1, ColorType::Indexed, BitDepth::Eight, &[0, 1]);
        assert!(matches!(
            decode_png8(&pal, Path::new("p.png")),
            Err(Error::Unsupported { .. })
        ));
    }

    #[test]
    fn gray_round_trip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let src: Vec<u8> = (0..=255u8).collect();
        let bytes = encode(16, 16, ColorType::Grayscale, BitDepth::Eight, &src);
        let img = decode_png8(&bytes, Path::new("in.png")).unwrap();
        let out = dir.path().join("out.png");
        write_png8(&out, &img.pixels).unwrap();
        let back = read_png8(&out).unwrap();
        assert_eq!(back.pixels, img.pixels);
        let raw: Vec<u8> = back.pixels.as_slice().iter().map(|&v| quantize_8bit(v)).collect();
        assert_eq!(raw, src);
    }
}
