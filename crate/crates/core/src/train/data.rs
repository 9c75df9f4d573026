//! Encoded in-memory datasets and per-epoch batch pairing.

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::display::DisplayModel;
use crate::encoding::{normalize, Encoder, Scheme};
use crate::grid::Grid;
use crate::io::load_pair;
use crate::io::manifest::DatasetManifest;
use crate::patches::{sample_patches, PatchBatch};
use crate::rng::{derive_seed, StreamRng};
use crate::{Error, Result};

/// A record loaded, encoded and normalized, ready for patch sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedPair {
    pub reference: Grid,
    pub distorted: Grid,
    pub label: Option<f64>,
}

impl EncodedPair {
    pub fn patches(&self, count: usize, size: usize, seed: u64) -> Result<PatchBatch> {
        sample_patches(&self.reference, &self.distorted, count, size, seed)
    }
}

/// Encoding applied before patches are sampled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preprocess {
    pub encoder: Encoder,
    pub scheme: Scheme,
    /// Display for PNG records; `None` picks the record's domain preset.
    pub display: Option<DisplayModel>,
}

impl Default for Preprocess {
    fn default() -> Self {
        Preprocess {
            encoder: Encoder::Pu21,
            scheme: Scheme::Pmax,
            display: None,
        }
    }
}

/// Loads every record of `manifest` (in parallel, order preserved).
pub fn prepare(manifest: &DatasetManifest, pre: &Preprocess) -> Result<Vec<EncodedPair>> {
    manifest
        .records
        .par_iter()
        .map(|record| {
            let (r, d) = load_pair(manifest, record, pre.display.as_ref()).map_err(|e| match e {
                Error::Data(_) | Error::Parse { .. } | Error::Io { .. } | Error::Unsupported { .. } => e,
                other => Error::Data(format!("{}: {other}", record.dist_path)),
            })?;
            let encode = |lum| normalize(&pre.encoder.encode(lum), pre.scheme).map(|e| e.values);
            Ok(EncodedPair {
                reference: encode(&r)?,
                distorted: encode(&d)?,
                label: record.label,
            })
        })
        .collect()
}

/// Index pairs for one epoch: source and target image indices per batch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchPlan {
    pub source: Vec<usize>,
    pub target: Vec<usize>,
}

/// Shuffles both index sets and pairs them batch by batch.
///
/// The epoch covers the longer of the two sets (only the source when
/// `target_len` is zero); the shorter one cycles through its shuffled order.
/// The two generators are independent, so the source order never depends on
/// the target.
pub fn make_da_batches(
    source_len: usize,
    target_len: usize,
    batch_images: usize,
    source_rng: &mut StreamRng,
    target_rng: &mut StreamRng,
) -> Result<Vec<BatchPlan>> {
    if source_len == 0 {
        return Err(Error::Data("source manifest is empty".into()));
    }
    if batch_images == 0 {
        return Err(Error::Config("batch_images must be at least 1".into()));
    }
    let mut source: Vec<usize> = (0..source_len).collect();
    source.shuffle(source_rng);
    let mut target: Vec<usize> = (0..target_len).collect();
    if target_len > 0 {
        target.shuffle(target_rng);
    }
    let batches = source_len.max(target_len).div_ceil(batch_images);
    Ok((0..batches)
        .map(|b| {
            let slots = b * batch_images..(b + 1) * batch_images;
            let pick = |order: &[usize]| -> Vec<usize> {
                if order.is_empty() {
                    return Vec::new();
                }
                let longest = source_len.max(target_len);
                slots
                    .clone()
                    .filter(|&s| s < longest)
                    .map(|s| order[s % order.len()])
                    .collect()
            };
            BatchPlan {
                source: pick(&source),
                target: pick(&target),
            }
        })
        .collect())
}

/// Seed for the patches of one image slot in one iteration.
pub(crate) fn patch_seed(base: u64, tag: u64, epoch: usize, iteration: usize, slot: usize) -> u64 {
    derive_seed(base, &[tag, epoch as u64, iteration as u64, slot as u64])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn cycling_arithmetic() {
        let plan = make_da_batches(10, 4, 2, &mut stream(1, &[1]), &mut stream(1, &[2])).unwrap();
        assert_eq!(plan.len(), 5);
        let mut src: Vec<usize> = plan.iter().flat_map(|b| b.source.clone()).collect();
        src.sort();
        assert_eq!(src, (0..10).collect::<Vec<_>>());
        let tgt: Vec<usize> = plan.iter().flat_map(|b| b.target.clone()).collect();
        assert_eq!(tgt.len(), 10);
        assert_eq!(tgt[..4], tgt[4..8]);
        assert_eq!(tgt[..2], tgt[8..]);
    }

    #[test]
    fn source_order_independent_of_target() {
        let a = make_da_batches(9, 0, 4, &mut stream(3, &[1]), &mut stream(3, &[2])).unwrap();
        let b = make_da_batches(9, 7, 4, &mut stream(3, &[1]), &mut stream(3, &[2])).unwrap();
        let src = |p: &[BatchPlan]| p.iter().flat_map(|b| b.source.clone()).collect::<Vec<_>>();
        assert_eq!(src(&a), src(&b));
        assert_eq!(a.last().unwrap().source.len(), 1);
    }

    #[test]
    fn longer_target_cycles_source() {
        let plan = make_da_batches(3, 8, 4, &mut stream(0, &[1]), &mut stream(0, &[2])).unwrap();
        assert_eq!(plan.len(), 2);
        assert!(plan.iter().all(|b| b.source.len() == 4 && b.target.len() == 4));
    }

    #[test]
    fn empty_source_rejected() {
        assert!(make_da_batches(0, 3, 2, &mut stream(0, &[]), &mut stream(0, &[])).is_err());
    }
}
