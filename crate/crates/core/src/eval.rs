//! Correlation-based evaluation and reference-grouped cross-validation.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::display::Domain;
use crate::io::manifest::{DatasetManifest, DatasetRecord};
use crate::io::read_image;
use crate::nn::{forward, QualityNetParams};
use crate::patches::TEST_PATCHES;
use crate::rng::{derive_seed, stream};
use crate::train::data::{prepare, Preprocess};
use crate::{Error, Result};

/// Mean ranks (1-based); ties share the average of their positions.
pub fn ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut out = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}

fn check_lengths(a: &[f64], b: &[f64], min: usize) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!(
            "prediction and label lengths differ ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    if a.len() < min {
        return Err(Error::UndefinedCorrelation(format!(
            "need at least {min} samples, got {}",
            a.len()
        )));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite value in correlation input".into()));
    }
    Ok(())
}

/// Pearson correlation; constant inputs have no defined correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_lengths(x, y, 2)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("constant input vector".into()));
    }
    // One square root makes identical inputs give exactly 1.
    let norm = match sxx * syy {
        p if p.is_finite() => p.sqrt(),
        _ => sxx.sqrt() * syy.sqrt(),
    };
    Ok((sxy / norm).clamp(-1.0, 1.0))
}

/// Spearman rank-order correlation with mean ranks for ties.
pub fn srocc(pred: &[f64], label: &[f64]) -> Result<f64> {
    check_lengths(pred, label, 3)?;
    pearson(&ranks(pred), &ranks(label))
}

/// `q(x) = β1·(1/2 − 1/(1 + exp(β2·(x − β3)))) + β4`, stored with `β1 ≥ 0`
/// so the sign of `β2` gives the direction of the mapping. In the affine
/// limit `β2 → 0`, `β1` is infinite and `slope` carries the map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticFit {
    pub beta: [f64; 4],
    /// `dq/dx` at `x = β3`.
    pub slope: f64,
    /// False when the fit did not converge and PLCC fell back to raw Pearson.
    pub converged: bool,
}

impl LogisticFit {
    pub fn predict(&self, x: f64) -> f64 {
        let [b1, b2, b3, b4] = self.beta;
        if !b1.is_finite() || b2 == 0.0 {
            return b4 + self.slope * (x - b3);
        }
        // Same curve as the docstring form, without the cancellation near β2 = 0.
        0.5 * b1 * (0.5 * b2 * (x - b3)).tanh() + b4
    }
}

/// `tanh(b·u/2) / (2b)`, continuous at `b = 0` where it equals `u/4`.
fn shape(b: f64, u: f64) -> (f64, f64, f64) {
    // Returns (h, ∂h/∂b, ∂h/∂u).
    let s = b * u / 2.0;
    if s.abs() < 1e-4 {
        let h = u / 4.0 - b * b * u.powi(3) / 48.0;
        let dh_db = -b * u.powi(3) / 24.0;
        let dh_du = 0.25 - b * b * u * u / 16.0;
        (h, dh_db, dh_du)
    } else {
        let t = s.tanh();
        let sech2 = 1.0 - t * t;
        let h = t / (2.0 * b);
        let dh_db = u * sech2 / (4.0 * b) - t / (2.0 * b * b);
        (h, dh_db, sech2 / 4.0)
    }
}

/// Levenberg-Marquardt on standardized data, parameters `(a, b, c, d)` with
/// `q̃(z) = d + a·h(b, z − c)`.
fn levenberg_marquardt(z: &[f64], y: &[f64], start: [f64; 4]) -> ([f64; 4], f64, bool) {
    let sse_of = |p: &[f64; 4]| -> f64 {
        z.iter()
            .zip(y)
            .map(|(&zi, &yi)| {
                let r = p[3] + p[0] * shape(p[1], zi - p[2]).0 - yi;
                r * r
            })
            .sum()
    };
    let mut p = start;
    let mut sse = sse_of(&p);
    let mut damping = 1e-3;
    for _ in 0..500 {
        let mut jtj = [[0.0f64; 4]; 4];
        let mut jtr = [0.0f64; 4];
        for (&zi, &yi) in z.iter().zip(y) {
            let u = zi - p[2];
            let (h, dh_db, dh_du) = shape(p[1], u);
            let r = p[3] + p[0] * h - yi;
            let j = [h, p[0] * dh_db, -p[0] * dh_du, 1.0];
            for a in 0..4 {
                jtr[a] += j[a] * r;
                for b in 0..4 {
                    jtj[a][b] += j[a] * j[b];
                }
            }
        }
        let grad_norm = jtr.iter().map(|g| g.abs()).fold(0.0, f64::max);
        if grad_norm < 1e-13 || sse < 1e-28 {
            return (p, sse, true);
        }
        loop {
            let mut m = jtj;
            for (a, row) in m.iter_mut().enumerate() {
                row[a] += damping * jtj[a][a].max(1e-12);
            }
            let Some(step) = solve4(m, jtr.map(|g| -g)) else {
                damping *= 10.0;
                if damping > 1e16 {
                    return (p, sse, true);
                }
                continue;
            };
            let trial = [p[0] + step[0], p[1] + step[1], p[2] + step[2], p[3] + step[3]];
            let trial_sse = sse_of(&trial);
            if trial_sse.is_finite() && trial_sse <= sse {
                let improvement = sse - trial_sse;
                p = trial;
                sse = trial_sse;
                damping = (damping / 10.0).max(1e-12);
                if improvement <= 1e-15 * sse.max(1e-300) && step.iter().all(|s| s.abs() < 1e-10) {
                    return (p, sse, true);
                }
                break;
            }
            damping *= 10.0;
            if damping > 1e16 {
                // No descent direction left: a (local) minimum.
                return (p, sse, true);
            }
        }
    }
    (p, sse, false)
}

/// Gaussian elimination with partial pivoting for a 4×4 system.
fn solve4(mut m: [[f64; 4]; 4], mut rhs: [f64; 4]) -> Option<[f64; 4]> {
    for col in 0..4 {
        let pivot = (col..4).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[pivot][col].abs() < 1e-300 || !m[pivot][col].is_finite() {
            return None;
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..4 {
            let f = m[row][col] / m[col][col];
            let top = m[col];
            for (v, t) in m[row].iter_mut().zip(top).skip(col) {
                *v -= f * t;
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = [0.0; 4];
    for row in (0..4).rev() {
        let mut acc = rhs[row];
        for k in row + 1..4 {
            acc -= m[row][k] * x[k];
        }
        x[row] = acc / m[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let s = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt();
    (m, s)
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    }
}

/// Fits the logistic map from `pred` to `label` and returns the Pearson
/// correlation of the fitted values with the labels.
///
/// The result carries the direction of the fitted map: it is negative when
/// the map is decreasing. A non-converged fit falls back to raw Pearson.
pub fn plcc_logistic(pred: &[f64], label: &[f64]) -> Result<(f64, LogisticFit)> {
    check_lengths(pred, label, 5)?;
    let raw = pearson(pred, label)?;
    let (mx, sx) = mean_std(pred);
    let (my, sy) = mean_std(label);
    let z: Vec<f64> = pred.iter().map(|x| (x - mx) / sx).collect();
    let y: Vec<f64> = label.iter().map(|v| (v - my) / sy).collect();
    let c0 = median(&z);

    let a0 = 4.0 * if raw.abs() > 1e-3 { raw } else { 1.0 };
    let mut best: Option<([f64; 4], f64, bool)> = None;
    for b0 in [0.0, 1.0, 3.0] {
        let run = levenberg_marquardt(&z, &y, [a0, b0, c0, 0.0]);
        if best.as_ref().is_none_or(|(_, sse, _)| run.1 < *sse) {
            best = Some(run);
        }
    }
    let (p, _, converged) = best.expect("at least one start");
    let [a, b, c, d] = p;

    let fitted: Vec<f64> = z.iter().map(|&zi| d + a * shape(b, zi - c).0).collect();
    // A fit that collapsed to a constant has no usable correlation; its
    // residual spread is rounding noise.
    let spread = fitted.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v))
        - fitted.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    let fitted_corr = if spread > 1e-6 { pearson(&fitted, &y).ok() } else { None };
    let (converged, plcc) = match fitted_corr {
        Some(r) if converged && a != 0.0 => (true, a.signum() * r.abs()),
        _ => (false, raw),
    };

    // Back to original units, with β1 ≥ 0.
    let (mut b1, mut b2) = (sy * a / b, b / sx);
    if b == 0.0 {
        b1 = f64::INFINITY;
        b2 = 0.0;
    } else if b1 < 0.0 {
        b1 = -b1;
        b2 = -b2;
    }
    let fit = LogisticFit {
        beta: [b1, b2, mx + c * sx, my + sy * d],
        slope: sy * a / (4.0 * sx),
        converged,
    };
    Ok((plcc, fit))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Subset {
    Full,
    Sdr,
    Hdr,
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Subset::Full => "full",
            Subset::Sdr => "sdr",
            Subset::Hdr => "hdr",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub subset: Subset,
    pub fold_id: Option<usize>,
    pub n: usize,
    pub srocc: f64,
    pub plcc: f64,
    pub fit_converged: bool,
}

impl EvalReport {
    pub const CSV_HEADER: [&'static str; 6] = ["subset", "fold", "n", "srocc", "plcc", "fit_flag"];

    pub fn csv_row(&self) -> [String; 6] {
        [
            self.subset.to_string(),
            self.fold_id.map(|f| f.to_string()).unwrap_or_default(),
            self.n.to_string(),
            self.srocc.to_string(),
            self.plcc.to_string(),
            if self.fit_converged { "ok" } else { "fallback" }.to_string(),
        ]
    }
}

/// SROCC and logistic PLCC of `pred` against `label`, overall and per domain.
pub fn report_scores(
    pred: &[f64],
    label: &[f64],
    domains: &[Domain],
    fold_id: Option<usize>,
) -> Result<Vec<EvalReport>> {
    check_lengths(pred, label, 3)?;
    let mut reports = Vec::new();
    let subsets = [
        (Subset::Full, None),
        (Subset::Sdr, Some(Domain::Sdr)),
        (Subset::Hdr, Some(Domain::Hdr)),
    ];
    for (subset, domain) in subsets {
        let idx: Vec<usize> = (0..pred.len())
            .filter(|&i| domain.is_none_or(|d| domains[i] == d))
            .collect();
        if idx.len() < 3 {
            continue;
        }
        let p: Vec<f64> = idx.iter().map(|&i| pred[i]).collect();
        let l: Vec<f64> = idx.iter().map(|&i| label[i]).collect();
        let s = srocc(&p, &l)?;
        let (plcc, fit) = if p.len() >= 5 {
            plcc_logistic(&p, &l)?
        } else {
            (
                pearson(&p, &l)?,
                LogisticFit {
                    beta: [f64::NAN; 4],
                    slope: f64::NAN,
                    converged: false,
                },
            )
        };
        reports.push(EvalReport {
            subset,
            fold_id,
            n: p.len(),
            srocc: s,
            plcc,
            fit_converged: fit.converged,
        });
    }
    Ok(reports)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    pub patches_per_image: usize,
    pub preprocess: Preprocess,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            patches_per_image: TEST_PATCHES,
            preprocess: Preprocess::default(),
            seed: 0,
        }
    }
}

const EVAL_PATCHES: u64 = 0x6576_616c;

/// Learned-metric quality of every record, in manifest order.
pub fn predict(
    params: &QualityNetParams,
    manifest: &DatasetManifest,
    config: &EvalConfig,
) -> Result<Vec<f64>> {
    params.validate()?;
    let pairs = prepare(manifest, &config.preprocess)?;
    pairs
        .par_iter()
        .enumerate()
        .map(|(i, pair)| {
            let seed = derive_seed(config.seed, &[EVAL_PATCHES, i as u64]);
            let batch = pair.patches(config.patches_per_image, params.patch_size(), seed)?;
            Ok(forward(params, &batch)?.quality)
        })
        .collect()
}

/// Scores every labeled record with the learned metric and reports
/// correlations for the full set and each domain present.
pub fn evaluate(
    params: &QualityNetParams,
    manifest: &DatasetManifest,
    config: &EvalConfig,
) -> Result<Vec<EvalReport>> {
    let labeled: Vec<DatasetRecord> = manifest
        .records
        .iter()
        .filter(|r| r.is_labeled())
        .cloned()
        .collect();
    if labeled.len() < 3 {
        return Err(Error::Data(format!(
            "evaluation needs at least 3 labeled records, found {}",
            labeled.len()
        )));
    }
    let subset = manifest.with_records(labeled);
    let labels: Vec<f64> = subset.records.iter().map(|r| r.label.expect("filtered")).collect();
    if labels.iter().all(|&l| l == labels[0]) {
        return Err(Error::UndefinedCorrelation("all labels are equal".into()));
    }
    let domains: Vec<Domain> = subset.records.iter().map(|r| r.domain).collect();
    let pred = predict(params, &subset, config)?;
    report_scores(&pred, &labels, &domains, None)
}

/// Train / validation / test reference sets of one fold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldSplit {
    pub fold: usize,
    pub train: BTreeSet<String>,
    pub val: BTreeSet<String>,
    pub test: BTreeSet<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl FoldSplit {
    pub fn split_of(&self, ref_path: &str) -> Option<Split> {
        if self.train.contains(ref_path) {
            Some(Split::Train)
        } else if self.val.contains(ref_path) {
            Some(Split::Val)
        } else if self.test.contains(ref_path) {
            Some(Split::Test)
        } else {
            None
        }
    }

    /// The records of `manifest` whose reference falls in `split`.
    pub fn subset(&self, manifest: &DatasetManifest, split: Split) -> DatasetManifest {
        manifest.with_records(
            manifest
                .records
                .iter()
                .filter(|r| self.split_of(&r.ref_path) == Some(split))
                .cloned()
                .collect(),
        )
    }
}

/// FNV-1a over the decoded pixels of each reference image, keyed by path.
pub fn content_hashes(manifest: &DatasetManifest) -> Result<HashMap<String, u64>> {
    let refs: BTreeSet<&str> = manifest.records.iter().map(|r| r.ref_path.as_str()).collect();
    refs.into_par_iter()
        .map(|path| {
            let image = read_image(&manifest.resolve(path))?;
            let mut h: u64 = 0xcbf2_9ce4_8422_2325;
            let dims = [image.pixels.width() as u64, image.pixels.height() as u64];
            let bytes = dims
                .iter()
                .flat_map(|d| d.to_le_bytes())
                .chain(image.pixels.as_slice().iter().flat_map(|v| v.to_bits().to_le_bytes()));
            for b in bytes {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
            Ok((path.to_string(), h))
        })
        .collect()
}

/// Reference-grouped, domain-stratified k-fold splits.
///
/// References (merged by `content` hash when given) are shuffled within each
/// domain, laid out domain by domain, and dealt round-robin into `k` folds.
/// Fold `f` tests on chunk `f` and validates on the following chunks, sized
/// from the train/val ratio. Dealing keeps every domain's per-chunk count
/// within one reference of its share.
pub fn split_folds(
    manifest: &DatasetManifest,
    k: usize,
    ratios: (f64, f64, f64),
    seed: u64,
    content: Option<&HashMap<String, u64>>,
) -> Result<Vec<FoldSplit>> {
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {k}")));
    }
    let (r_train, r_val, r_test) = ratios;
    if [r_train, r_val, r_test].iter().any(|r| !(r.is_finite() && *r >= 0.0)) || r_train + r_val <= 0.0 {
        return Err(Error::Config(format!("bad split ratios {ratios:?}")));
    }

    // Group references; each group takes the domain of its first record.
    let mut groups: BTreeMap<String, (Domain, BTreeSet<String>)> = BTreeMap::new();
    for r in &manifest.records {
        let key = match content {
            Some(hashes) => format!(
                "{:016x}",
                hashes.get(&r.ref_path).copied().ok_or_else(|| {
                    Error::Data(format!("no content hash for {}", r.ref_path))
                })?
            ),
            None => r.ref_path.clone(),
        };
        groups
            .entry(key)
            .or_insert_with(|| (r.domain, BTreeSet::new()))
            .1
            .insert(r.ref_path.clone());
    }
    if groups.len() < k {
        return Err(Error::Data(format!(
            "{} distinct references cannot fill {k} folds",
            groups.len()
        )));
    }

    let mut rng = stream(seed, &[0x666f_6c64]);
    let mut ordered: Vec<&BTreeSet<String>> = Vec::new();
    for domain in [Domain::Sdr, Domain::Hdr] {
        let mut members: Vec<&BTreeSet<String>> = groups
            .values()
            .filter(|(d, _)| *d == domain)
            .map(|(_, refs)| refs)
            .collect();
        members.shuffle(&mut rng);
        ordered.extend(members);
    }
    let mut chunks: Vec<Vec<&BTreeSet<String>>> = vec![Vec::new(); k];
    for (i, g) in ordered.into_iter().enumerate() {
        chunks[i % k].push(g);
    }

    let total = groups.len();
    Ok((0..k)
        .map(|f| {
            let rest = total - chunks[f].len();
            let val_target = (rest as f64 * r_val / (r_train + r_val)).round() as usize;
            let mut split = FoldSplit {
                fold: f,
                train: BTreeSet::new(),
                val: BTreeSet::new(),
                test: chunks[f].iter().flat_map(|g| g.iter().cloned()).collect(),
            };
            let mut taken = 0;
            for step in 1..k {
                for g in &chunks[(f + step) % k] {
                    let dest = if taken < val_target {
                        taken += 1;
                        &mut split.val
                    } else {
                        &mut split.train
                    };
                    dest.extend(g.iter().cloned());
                }
            }
            split
        })
        .collect())
}

/// Distinct reference paths of a manifest.
pub fn reference_paths(manifest: &DatasetManifest) -> BTreeSet<String> {
    manifest.records.iter().map(|r| r.ref_path.clone()).collect()
}
