//! Binary parameter checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic     b"PUIQ"
//! version   u32                      (currently 1)
//! repeated until end of file:
//!   name_len  u32
//!   name      name_len bytes, UTF-8
//!   rank      u32
//!   dims      rank × u64
//!   values    product(dims) × f64 LE
//! ```
//!
//! Tensors are `feature.{i}.weight` (`in × out`), `feature.{i}.bias`,
//! `score.weight`, `score.bias`, `weight.weight`, `weight.bias`, and the
//! rank-0 `meta.activation` (0 = tanh, 1 = softplus).

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use super::{Activation, Dense, QualityNetParams};
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"PUIQ";
pub const VERSION: u32 = 1;

struct Tensor {
    dims: Vec<usize>,
    values: Vec<f64>,
}

fn write_tensor<W: Write>(w: &mut W, name: &str, dims: &[usize], values: &[f64]) -> std::io::Result<()> {
    w.write_all(&(name.len() as u32).to_le_bytes())?;
    w.write_all(name.as_bytes())?;
    w.write_all(&(dims.len() as u32).to_le_bytes())?;
    for &d in dims {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_params<W: Write>(w: &mut W, params: &QualityNetParams) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    write_tensor(w, "meta.activation", &[], &[params.activation.code()])?;
    let dense = params
        .feature_layers
        .iter()
        .enumerate()
        .map(|(i, d)| (format!("feature.{i}"), d))
        .chain([
            ("score".to_string(), &params.score_head),
            ("weight".to_string(), &params.weight_head),
        ]);
    for (prefix, d) in dense {
        write_tensor(
            w,
            &format!("{prefix}.weight"),
            &[d.weights.nrows(), d.weights.ncols()],
            d.weights.as_slice().expect("standard layout"),
        )?;
        write_tensor(
            w,
            &format!("{prefix}.bias"),
            &[d.bias.len()],
            d.bias.as_slice().expect("standard layout"),
        )?;
    }
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::parse(
                self.path,
                format!("byte {}", self.pos),
                format!("truncated {what}"),
            ));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::parse(self.path, format!("byte {}", self.pos), message)
    }
}

pub fn read_params_bytes(bytes: &[u8], path: &Path) -> Result<QualityNetParams> {
    let mut cur = Cursor { bytes, pos: 0, path };
    if cur.take(4, "magic")? != MAGIC {
        return Err(Error::parse(path, "byte 0", "missing PUIQ magic"));
    }
    let version = cur.u32("version")?;
    if version != VERSION {
        return Err(cur.err(format!("unsupported checkpoint version {version}")));
    }
    let mut tensors = BTreeMap::new();
    while cur.pos < bytes.len() {
        let name_len = cur.u32("name length")? as usize;
        let name = std::str::from_utf8(cur.take(name_len, "tensor name")?)
            .map_err(|_| cur.err("tensor name is not UTF-8"))?
            .to_string();
        let rank = cur.u32("rank")? as usize;
        if rank > 2 {
            return Err(cur.err(format!("tensor {name} has unsupported rank {rank}")));
        }
        let dims = (0..rank)
            .map(|_| cur.u64("dims").map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let count = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .filter(|c| c.checked_mul(8).is_some_and(|b| b <= bytes.len()))
            .ok_or_else(|| cur.err(format!("tensor {name} is larger than the file")))?;
        let raw = cur.take(count * 8, "tensor values")?;
        let values: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(cur.err(format!("tensor {name} holds non-finite values")));
        }
        if tensors.insert(name.clone(), Tensor { dims, values }).is_some() {
            return Err(cur.err(format!("duplicate tensor {name}")));
        }
    }

    let missing = |name: &str| Error::parse(path, "end of file", format!("missing tensor {name}"));
    let activation = tensors
        .remove("meta.activation")
        .and_then(|t| t.values.first().copied())
        .and_then(Activation::from_code)
        .ok_or_else(|| missing("meta.activation"))?;

    let take_dense = |tensors: &mut BTreeMap<String, Tensor>, prefix: &str| -> Result<Dense> {
        let w = tensors
            .remove(&format!("{prefix}.weight"))
            .ok_or_else(|| missing(&format!("{prefix}.weight")))?;
        let b = tensors
            .remove(&format!("{prefix}.bias"))
            .ok_or_else(|| missing(&format!("{prefix}.bias")))?;
        if w.dims.len() != 2 || b.dims.len() != 1 {
            return Err(Error::parse(path, prefix, "bad tensor rank"));
        }
        Ok(Dense {
            weights: Array2::from_shape_vec((w.dims[0], w.dims[1]), w.values)
                .map_err(|e| Error::parse(path, prefix, e.to_string()))?,
            bias: Array1::from(b.values),
        })
    };
    let mut layers = Vec::new();
    while tensors.contains_key(&format!("feature.{}.weight", layers.len())) {
        layers.push(take_dense(&mut tensors, &format!("feature.{}", layers.len()))?);
    }
    let score = take_dense(&mut tensors, "score")?;
    let weight = take_dense(&mut tensors, "weight")?;
    if let Some(extra) = tensors.keys().next() {
        return Err(Error::parse(path, "end of file", format!("unexpected tensor {extra}")));
    }
    let params = QualityNetParams::from_parts(layers, score, weight, activation);
    params
        .validate()
        .map_err(|e| Error::parse(path, "end of file", e.to_string()))?;
    Ok(params)
}

pub fn save(path: &Path, params: &QualityNetParams) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_params(&mut w, params)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<QualityNetParams> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?)
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    read_params_bytes(&bytes, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::ModelConfig;
    use crate::rng::stream;

    fn params() -> QualityNetParams {
        let cfg = ModelConfig::preset("desk-tanh").unwrap();
        QualityNetParams::init(&cfg, &mut stream(3, &[])).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let p = params();
        let mut bytes = Vec::new();
        write_params(&mut bytes, &p).unwrap();
        assert_eq!(&bytes[..4], b"PUIQ");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        let back = read_params_bytes(&bytes, Path::new("mem")).unwrap();
        assert_eq!(back, p);
        for ((_, a), (_, b)) in back.tensors().iter().zip(p.tensors()) {
            assert!(a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn truncation_reports_offset() {
        let mut bytes = Vec::new();
        write_params(&mut bytes, &params()).unwrap();
        bytes.truncate(bytes.len() - 3);
        let err = read_params_bytes(&bytes, Path::new("ckpt")).unwrap_err();
        assert!(err.to_string().contains("byte"), "{err}");
    }

    #[test]
    fn bad_magic() {
        assert!(read_params_bytes(b"NOPE\x01\0\0\0", Path::new("x")).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.puiq");
        let p = params();
        save(&path, &p).unwrap();
        assert_eq!(load(&path).unwrap(), p);
    }
}
