//! Aligned patch sampling for full-reference pairs.
//!
//! A `g × g` grid of cells (`g = ⌈√n⌉`) is laid over the image. Cells are
//! visited in a seeded random order, cycling until `n` patches exist. Each
//! patch origin is drawn uniformly from the slack between patch and cell:
//! inside the cell when the cell is larger than the patch, around it
//! otherwise. Origins are finally clamped to the image.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::grid::Grid;
use crate::rng::{stream, StreamRng};
use crate::{Error, Result};

pub const DEFAULT_PATCH_SIZE: usize = 64;
pub const TRAIN_PATCHES: usize = 128;
pub const TEST_PATCHES: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Jitter {
    /// Uniform over the free slack of each cell.
    Uniform,
    /// Deterministic lower end of the slack; used for exact tilings.
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchBatch {
    /// `n × p²`, row-major patch pixels.
    pub ref_patches: Array2<f64>,
    pub dist_patches: Array2<f64>,
    /// `(row, col)` origin of each patch.
    pub coords: Vec<(usize, usize)>,
    pub patch_size: usize,
    pub seed: u64,
}

impl PatchBatch {
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }
}

/// Samples `count` aligned `size × size` patches with uniform jitter.
pub fn sample_patches(
    reference: &Grid,
    distorted: &Grid,
    count: usize,
    size: usize,
    seed: u64,
) -> Result<PatchBatch> {
    sample_patches_with(reference, distorted, count, size, Jitter::Uniform, seed)
}

pub fn sample_patches_with(
    reference: &Grid,
    distorted: &Grid,
    count: usize,
    size: usize,
    jitter: Jitter,
    seed: u64,
) -> Result<PatchBatch> {
    reference.ensure_same_shape(distorted)?;
    if count == 0 {
        return Err(Error::Config("patch count must be at least 1".into()));
    }
    if size == 0 || reference.width() < size || reference.height() < size {
        return Err(Error::Dimension(format!(
            "{}x{} image cannot hold a {size}x{size} patch",
            reference.width(),
            reference.height()
        )));
    }
    let mut rng = stream(seed, &[]);
    let coords = patch_origins(
        reference.height(),
        reference.width(),
        count,
        size,
        jitter,
        &mut rng,
    );
    let ref_patches = extract(reference, &coords, size);
    let dist_patches = extract(distorted, &coords, size);
    Ok(PatchBatch {
        ref_patches,
        dist_patches,
        coords,
        patch_size: size,
        seed,
    })
}

fn cell_span(index: usize, cells: usize, extent: usize) -> (usize, usize) {
    let start = index * extent / cells;
    let end = (index + 1) * extent / cells;
    (start, end - start)
}

fn jittered_origin(
    start: usize,
    len: usize,
    size: usize,
    extent: usize,
    jitter: Jitter,
    rng: &mut StreamRng,
) -> usize {
    let (lo, hi) = if len >= size {
        (start as i64, (start + len - size) as i64)
    } else {
        (start as i64 + len as i64 - size as i64, start as i64)
    };
    let origin = match jitter {
        Jitter::Uniform => rng.random_range(lo..=hi),
        Jitter::None => lo,
    };
    origin.clamp(0, (extent - size) as i64) as usize
}

fn patch_origins(
    height: usize,
    width: usize,
    count: usize,
    size: usize,
    jitter: Jitter,
    rng: &mut StreamRng,
) -> Vec<(usize, usize)> {
    let cells = (count as f64).sqrt().ceil() as usize;
    let mut order: Vec<(usize, usize)> = (0..cells)
        .flat_map(|r| (0..cells).map(move |c| (r, c)))
        .collect();
    order.shuffle(rng);
    order
        .iter()
        .cycle()
        .take(count)
        .map(|&(cr, cc)| {
            let (r0, rh) = cell_span(cr, cells, height);
            let (c0, cw) = cell_span(cc, cells, width);
            let row = jittered_origin(r0, rh, size, height, jitter, rng);
            let col = jittered_origin(c0, cw, size, width, jitter, rng);
            (row, col)
        })
        .collect()
}

fn extract(image: &Grid, coords: &[(usize, usize)], size: usize) -> Array2<f64> {
    let mut out = Array2::zeros((coords.len(), size * size));
    for (mut dst, &(row, col)) in out.rows_mut().into_iter().zip(coords) {
        for dr in 0..size {
            let src = &image.row(row + dr)[col..col + size];
            for (dc, &v) in src.iter().enumerate() {
                dst[dr * size + dc] = v;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(w: usize, h: usize) -> Grid {
        Grid::from_fn(w, h, |r, c| (r * w + c) as f64)
    }

    #[test]
    fn zero_jitter_quadrants() {
        let img = ramp(128, 128);
        let b = sample_patches_with(&img, &img, 4, 64, Jitter::None, 1).unwrap();
        let mut coords = b.coords.clone();
        coords.sort();
        assert_eq!(coords, vec![(0, 0), (0, 64), (64, 0), (64, 64)]);
    }

    #[test]
    fn origins_in_bounds() {
        let img = ramp(512, 384);
        for seed in 0..20 {
            let b = sample_patches(&img, &img, 128, 64, seed).unwrap();
            assert_eq!(b.len(), 128);
            for &(r, c) in &b.coords {
                assert!(r <= 320 && c <= 448, "({r}, {c})");
            }
        }
    }

    #[test]
    fn patches_match_source_pixels() {
        let reference = ramp(100, 90);
        let distorted = reference.map(|v| -v);
        let b = sample_patches(&reference, &distorted, 9, 16, 5).unwrap();
        for (i, &(r, c)) in b.coords.iter().enumerate() {
            for dr in 0..16 {
                for dc in 0..16 {
                    assert_eq!(b.ref_patches[[i, dr * 16 + dc]], reference.get(r + dr, c + dc));
                    assert_eq!(b.dist_patches[[i, dr * 16 + dc]], distorted.get(r + dr, c + dc));
                }
            }
        }
    }

    #[test]
    fn exact_count_for_any_n() {
        let img = ramp(70, 70);
        for n in [1, 2, 3, 5, 17, 100, 300] {
            assert_eq!(sample_patches(&img, &img, n, 32, 0).unwrap().len(), n);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let img = ramp(128, 96);
        let a = sample_patches(&img, &img, 50, 16, 42).unwrap();
        let b = sample_patches(&img, &img, 50, 16, 42).unwrap();
        let c = sample_patches(&img, &img, 50, 16, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.coords, c.coords);
    }

    #[test]
    fn too_small_image() {
        let img = ramp(32, 32);
        assert!(matches!(
            sample_patches(&img, &img, 4, 64, 0),
            Err(Error::Dimension(_))
        ));
        let other = ramp(32, 33);
        assert!(sample_patches(&img, &other, 4, 16, 0).is_err());
    }

    #[test]
    fn coverage_over_seeds() {
        // Monte-Carlo measurement of pixel coverage for the training setup.
        let (h, w) = (384, 512);
        let img = Grid::filled(w, h, 0.0);
        let mut worst: f64 = 1.0;
        for seed in 0..100 {
            let b = sample_patches(&img, &img, 128, 64, seed).unwrap();
            let mut covered = vec![false; w * h];
            for &(r, c) in &b.coords {
                for rr in r..r + 64 {
                    covered[rr * w + c..rr * w + c + 64].fill(true);
                }
            }
            let frac = covered.iter().filter(|&&x| x).count() as f64 / (w * h) as f64;
            worst = worst.min(frac);
        }
        assert!(worst >= 0.95, "worst coverage {worst}");
    }
}
