//! SDR→HDR domain-adaptation training.
//!
//! Each iteration draws a source (SDR) batch and, when the mode uses one, a
//! target (HDR) batch; both go through the shared network and the step
//! minimizes
//!
//! ```text
//! L = α·L_SDR + β·L_HDR + λ·L_CORAL
//! ```
//!
//! Terms whose weight is zero contribute no gradient at all, so a run with
//! `β = 0, λ = 0` updates parameters exactly like a source-only run.

pub mod adamw;
pub mod data;

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use ndarray::{s, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize};

use crate::display::Domain;
use crate::encoding::{Encoder, Scheme};
use crate::eval::{split_folds, Split};
use crate::io::manifest::DatasetManifest;
use crate::nn::{
    backward, coral_loss, covariance, forward_with, mae_loss, CoralRows, FeatureBatch,
    FeatureDomain, ForwardResult, ModelConfig, OutputGrads, ParamGrads, QualityNetParams,
};
use crate::patches::{TEST_PATCHES, TRAIN_PATCHES};
use crate::rng::{derive_seed, stream};
use crate::{Error, Result};

use adamw::AdamW;
use data::{make_da_batches, patch_seed, prepare, EncodedPair, Preprocess};

/// Stream tags.
const INIT: u64 = 1;
const SOURCE_ORDER: u64 = 2;
const TARGET_ORDER: u64 = 3;
const SOURCE_PATCHES: u64 = 4;
const TARGET_PATCHES: u64 = 5;
const PROBE: u64 = 6;

/// Images per domain used to measure the inter-domain covariance distance.
const PROBE_IMAGES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DaMode {
    /// Source-only training; the target manifest is never read.
    #[default]
    None,
    /// Unlabeled target; `β` is forced to zero.
    SToHu,
    /// Labeled simulated-HDR target.
    SToHs,
    /// Labeled HDR target under k-fold cross-validation.
    SToHl,
}

impl fmt::Display for DaMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DaMode::None => "none",
            DaMode::SToHu => "s_to_hu",
            DaMode::SToHs => "s_to_hs",
            DaMode::SToHl => "s_to_hl",
        })
    }
}

impl FromStr for DaMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" => Ok(DaMode::None),
            "s_to_hu" | "hu" => Ok(DaMode::SToHu),
            "s_to_hs" | "hs" => Ok(DaMode::SToHs),
            "s_to_hl" | "hl" => Ok(DaMode::SToHl),
            _ => Err(Error::Config(format!("unknown DA mode {s:?}"))),
        }
    }
}

impl DaMode {
    pub fn uses_target(self) -> bool {
        self != DaMode::None
    }

    pub fn needs_target_labels(self) -> bool {
        matches!(self, DaMode::SToHs | DaMode::SToHl)
    }
}

fn model_or_preset<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<ModelConfig, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Spec {
        Preset(String),
        Config(ModelConfig),
    }
    match Spec::deserialize(d)? {
        Spec::Preset(name) => ModelConfig::preset(&name).map_err(serde::de::Error::custom),
        Spec::Config(c) => Ok(c),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub da_mode: DaMode,
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
    /// Re-estimate `λ` after every epoch so the CORAL term matches the task loss.
    pub lambda_auto: bool,
    pub epochs: usize,
    pub batch_images: usize,
    pub patches_per_image: usize,
    pub eval_patches_per_image: usize,
    pub lr_initial: f64,
    pub lr_final: f64,
    pub weight_decay: f64,
    pub seed: u64,
    /// Architecture, either a preset name or a full config object.
    #[serde(deserialize_with = "model_or_preset")]
    pub model: ModelConfig,
    pub encoder: Encoder,
    pub scheme: Scheme,
    pub coral_rows: CoralRows,
    /// Cross-validation fold for `s_to_hl`; the target is cut to its train split.
    pub fold: Option<usize>,
    pub folds: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            da_mode: DaMode::None,
            alpha: 1.0,
            beta: 1.0,
            lambda: 1.0,
            lambda_auto: true,
            epochs: 30,
            batch_images: 4,
            patches_per_image: TRAIN_PATCHES,
            eval_patches_per_image: TEST_PATCHES,
            lr_initial: 1e-4,
            lr_final: 1e-6,
            weight_decay: 0.01,
            seed: 0,
            model: ModelConfig::default(),
            encoder: Encoder::Pu21,
            scheme: Scheme::Pmax,
            coral_rows: CoralRows::RefAndDist,
            fold: None,
            folds: 5,
        }
    }
}

impl TrainConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: TrainConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, w) in [("alpha", self.alpha), ("beta", self.beta), ("lambda", self.lambda)] {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::Config(format!("{name} must be finite and >= 0, got {w}")));
            }
        }
        if self.epochs == 0 || self.batch_images == 0 || self.patches_per_image == 0 {
            return Err(Error::Config(
                "epochs, batch_images and patches_per_image must be at least 1".into(),
            ));
        }
        if !(self.lr_initial > 0.0 && self.lr_final > 0.0 && self.lr_initial.is_finite() && self.lr_final.is_finite()) {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::Config("weight_decay must be >= 0".into()));
        }
        if let Some(f) = self.fold {
            if f >= self.folds {
                return Err(Error::Config(format!("fold {f} outside 0..{}", self.folds)));
            }
        }
        self.model.validate()
    }

    /// `β` after the mode's constraints: zero without labeled target data.
    pub fn effective_beta(&self) -> f64 {
        if self.da_mode.needs_target_labels() {
            self.beta
        } else {
            0.0
        }
    }

    pub fn effective_lambda(&self) -> f64 {
        if self.da_mode.uses_target() {
            self.lambda
        } else {
            0.0
        }
    }

    /// Whether target batches feed the gradient (and so set the epoch length).
    fn target_in_gradient(&self) -> bool {
        self.da_mode.uses_target()
            && (self.effective_beta() > 0.0 || self.lambda > 0.0 || self.lambda_auto)
    }

    pub fn preprocess(&self) -> Preprocess {
        Preprocess {
            encoder: self.encoder,
            scheme: self.scheme,
            display: None,
        }
    }
}

/// Learning rate during (0-based) epoch `e`; after the last epoch it reaches `lr_final`.
pub fn lr_at(config: &TrainConfig, epoch: usize) -> f64 {
    let t = epoch as f64 / config.epochs as f64;
    config.lr_initial * (config.lr_final / config.lr_initial).powf(t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSample {
    /// `α·L_SDR + β·L_HDR`.
    pub task: f64,
    pub coral: f64,
}

fn median(values: impl Iterator<Item = f64>) -> Option<f64> {
    let mut v: Vec<f64> = values.collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 })
}

/// `median(task) / median(coral)` clamped to `[1e-6, 1e6]`; `None` when the
/// window is empty or holds no CORAL signal.
pub fn lambda_autoscale(window: &[LossSample]) -> Option<f64> {
    if window.iter().all(|s| s.coral <= 0.0) {
        return None;
    }
    let task = median(window.iter().map(|s| s.task))?;
    let coral = median(window.iter().map(|s| s.coral))?;
    if coral <= 0.0 {
        return None;
    }
    Some((task / coral).clamp(1e-6, 1e6))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub l_sdr: f64,
    pub l_hdr: f64,
    pub l_coral: f64,
    pub total: f64,
    /// Learning rate used during the epoch.
    pub lr: f64,
    /// `λ` used during the epoch.
    pub lambda: f64,
    /// `‖C_S − C_T‖_F` on a fixed probe set after the epoch; NaN without a target.
    pub cov_distance: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
}

impl TrainHistory {
    pub const CSV_HEADER: &'static str = "epoch,l_sdr,l_hdr,l_coral,total,lr,lambda,cov_distance";

    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                r.epoch, r.l_sdr, r.l_hdr, r.l_coral, r.total, r.lr, r.lambda, r.cov_distance
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = Vec::new();
        self.write_csv(&mut out).expect("writing to memory");
        String::from_utf8(out).expect("ASCII output")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }

    /// Bitwise comparison (NaN-aware).
    pub fn bitwise_eq(&self, other: &TrainHistory) -> bool {
        self.to_csv_string() == other.to_csv_string()
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: QualityNetParams,
    pub history: TrainHistory,
}

/// Fresh parameters from the config's init stream.
pub fn init_params(config: &TrainConfig) -> Result<QualityNetParams> {
    QualityNetParams::init(&config.model, &mut stream(config.seed, &[INIT]))
}

fn check_source(source: &DatasetManifest) -> Result<()> {
    if source.is_empty() {
        return Err(Error::Data("source manifest is empty".into()));
    }
    if let Some(r) = source.records.iter().find(|r| r.domain != Domain::Sdr) {
        return Err(Error::Data(format!("source record {} is not SDR", r.dist_path)));
    }
    if let Some(r) = source.records.iter().find(|r| !r.is_labeled()) {
        return Err(Error::Data(format!("source record {} has no label", r.dist_path)));
    }
    Ok(())
}

fn check_target(config: &TrainConfig, target: &DatasetManifest) -> Result<()> {
    if target.is_empty() {
        return Err(Error::Data("target manifest is empty".into()));
    }
    if let Some(r) = target.records.iter().find(|r| r.domain != Domain::Hdr) {
        return Err(Error::Data(format!(
            "target record {} is not HDR-tagged",
            r.dist_path
        )));
    }
    if config.da_mode.needs_target_labels() {
        if let Some(r) = target.records.iter().find(|r| !r.is_labeled()) {
            return Err(Error::Data(format!(
                "{} needs labeled targets; {} has no label",
                config.da_mode, r.dist_path
            )));
        }
    }
    Ok(())
}

/// The target records a run trains on: the fold's train split for `s_to_hl`.
pub fn training_target(config: &TrainConfig, target: &DatasetManifest) -> Result<DatasetManifest> {
    match (config.da_mode, config.fold) {
        (DaMode::SToHl, Some(fold)) => {
            let splits = split_folds(target, config.folds, (0.6, 0.2, 0.2), config.seed, None)?;
            Ok(splits[fold].subset(target, Split::Train))
        }
        _ => Ok(target.clone()),
    }
}

/// Loads and encodes both manifests, then trains.
pub fn train(
    config: &TrainConfig,
    source: &DatasetManifest,
    target: Option<&DatasetManifest>,
    init: QualityNetParams,
) -> Result<TrainOutcome> {
    config.validate()?;
    check_source(source)?;
    let pre = config.preprocess();
    let source_pairs = prepare(source, &pre)?;
    let target_pairs = match (config.da_mode.uses_target(), target) {
        (false, _) => Vec::new(),
        (true, None) => {
            return Err(Error::Data(format!("{} needs a target manifest", config.da_mode)))
        }
        (true, Some(t)) => {
            let t = training_target(config, t)?;
            check_target(config, &t)?;
            prepare(&t, &pre)?
        }
    };
    train_prepared(config, &source_pairs, &target_pairs, init)
}

fn stack_features(results: &[ForwardResult], domain: FeatureDomain) -> Result<FeatureBatch> {
    let parts: Vec<&FeatureBatch> = results.iter().map(|r| &r.features).collect();
    let mut stacked = FeatureBatch::stack(&parts)?;
    stacked.domain = domain;
    Ok(stacked)
}

fn forward_batch(
    params: &QualityNetParams,
    pairs: &[EncodedPair],
    indices: &[usize],
    config: &TrainConfig,
    seeds: impl Fn(usize) -> u64 + Sync,
    domain: FeatureDomain,
    patches: usize,
) -> Result<Vec<ForwardResult>> {
    indices
        .par_iter()
        .enumerate()
        .map(|(slot, &i)| {
            let batch = pairs[i].patches(patches, params.patch_size(), seeds(slot))?;
            forward_with(params, &batch, config.coral_rows, domain)
        })
        .collect()
}

/// Backpropagates per-image output gradients and sums them in order.
fn accumulate(
    params: &QualityNetParams,
    results: &[ForwardResult],
    upstream: Vec<OutputGrads>,
    total: &mut ParamGrads,
) -> Result<()> {
    let grads: Vec<ParamGrads> = results
        .par_iter()
        .zip(upstream.into_par_iter())
        .map(|(r, g)| backward(params, &r.cache, &g))
        .collect::<Result<_>>()?;
    for g in &grads {
        total.add_assign(g);
    }
    Ok(())
}

/// Splits a stacked feature gradient back into per-image blocks.
fn feature_blocks(grad: &Array2<f64>, results: &[ForwardResult], scale: f64) -> Vec<Array2<f64>> {
    let mut start = 0;
    results
        .iter()
        .map(|r| {
            let rows = r.features.rows();
            let block = grad.slice(s![start..start + rows, ..]).mapv(|g| g * scale);
            start += rows;
            block
        })
        .collect()
}

/// Frobenius distance between source and target feature covariances on a
/// fixed probe set.
fn probe_distance(
    params: &QualityNetParams,
    config: &TrainConfig,
    source: &[EncodedPair],
    target: &[EncodedPair],
) -> Result<f64> {
    if target.is_empty() {
        return Ok(f64::NAN);
    }
    let feats = |pairs: &[EncodedPair], tag: u64, domain| -> Result<FeatureBatch> {
        let idx: Vec<usize> = (0..pairs.len().min(PROBE_IMAGES)).collect();
        let results = forward_batch(
            params,
            pairs,
            &idx,
            config,
            |slot| derive_seed(config.seed, &[PROBE, tag, slot as u64]),
            domain,
            config.patches_per_image,
        )?;
        stack_features(&results, domain)
    };
    let cs = covariance(&feats(source, 0, FeatureDomain::Source)?)?;
    let ct = covariance(&feats(target, 1, FeatureDomain::Target)?)?;
    Ok((&cs - &ct).mapv(|v| v * v).sum().sqrt())
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Trains on already encoded data. `target` is ignored in mode `none`.
pub fn train_prepared(
    config: &TrainConfig,
    source: &[EncodedPair],
    target: &[EncodedPair],
    mut params: QualityNetParams,
) -> Result<TrainOutcome> {
    config.validate()?;
    if source.is_empty() {
        return Err(Error::Data("source manifest is empty".into()));
    }
    if source.iter().any(|p| p.label.is_none()) {
        return Err(Error::Data("every source record needs a label".into()));
    }
    if params.config() != config.model {
        return Err(Error::Config(
            "initial parameters do not match the configured model".into(),
        ));
    }
    let target: &[EncodedPair] = if config.da_mode.uses_target() {
        if target.is_empty() {
            return Err(Error::Data(format!("{} needs a non-empty target", config.da_mode)));
        }
        if config.da_mode.needs_target_labels() && target.iter().any(|p| p.label.is_none()) {
            return Err(Error::Data(format!("{} needs labeled targets", config.da_mode)));
        }
        target
    } else {
        &[]
    };

    let alpha = config.alpha;
    let beta = config.effective_beta();
    let mut lambda = config.effective_lambda();
    let epoch_target_len = if config.target_in_gradient() { target.len() } else { 0 };
    let mut source_rng = stream(config.seed, &[SOURCE_ORDER]);
    let mut target_rng = stream(config.seed, &[TARGET_ORDER]);
    let mut optimizer = AdamW::new(&params, config.weight_decay);
    let mut history = TrainHistory::default();
    let ppi = config.patches_per_image;

    for epoch in 0..config.epochs {
        let lr = lr_at(config, epoch);
        let plan = make_da_batches(
            source.len(),
            epoch_target_len,
            config.batch_images,
            &mut source_rng,
            &mut target_rng,
        )?;
        // Monitoring-only targets cycle along the source-driven epoch.
        let monitor_order: Vec<usize> = (0..target.len()).collect();
        let mut window = Vec::with_capacity(plan.len());
        let (mut sums_sdr, mut sums_hdr, mut sums_coral, mut sums_total) =
            (Vec::new(), Vec::new(), Vec::new(), Vec::new());

        for (it, batch) in plan.iter().enumerate() {
            let src = forward_batch(
                &params,
                source,
                &batch.source,
                config,
                |slot| patch_seed(config.seed, SOURCE_PATCHES, epoch, it, slot),
                FeatureDomain::Source,
                ppi,
            )?;
            let preds: Vec<f64> = src.iter().map(|r| r.quality).collect();
            let labels: Vec<f64> = batch
                .source
                .iter()
                .map(|&i| source[i].label.expect("checked above"))
                .collect();
            let (l_sdr, g_sdr) = mae_loss(&preds, &labels)?;

            let target_idx: Vec<usize> = if !target.is_empty() && batch.target.is_empty() {
                (0..batch.source.len())
                    .map(|k| monitor_order[(it * config.batch_images + k) % target.len()])
                    .collect()
            } else {
                batch.target.clone()
            };
            let tgt = if target_idx.is_empty() {
                Vec::new()
            } else {
                forward_batch(
                    &params,
                    target,
                    &target_idx,
                    config,
                    |slot| patch_seed(config.seed, TARGET_PATCHES, epoch, it, slot),
                    FeatureDomain::Target,
                    ppi,
                )?
            };

            let (l_hdr, g_hdr) = if beta > 0.0 && !tgt.is_empty() {
                let preds: Vec<f64> = tgt.iter().map(|r| r.quality).collect();
                let labels: Vec<f64> = target_idx
                    .iter()
                    .map(|&i| target[i].label.expect("checked above"))
                    .collect();
                let (l, g) = mae_loss(&preds, &labels)?;
                (l, Some(g))
            } else {
                (0.0, None)
            };

            let coral = if tgt.is_empty() {
                None
            } else {
                let fs = stack_features(&src, FeatureDomain::Source)?;
                let ft = stack_features(&tgt, FeatureDomain::Target)?;
                Some(coral_loss(&fs, &ft)?)
            };
            let l_coral = coral.as_ref().map_or(0.0, |c| c.loss);
            let total = alpha * l_sdr + beta * l_hdr + lambda * l_coral;
            if !total.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    iteration: it,
                    message: format!("non-finite loss (L_SDR={l_sdr}, L_HDR={l_hdr}, L_CORAL={l_coral})"),
                });
            }

            let mut grads = ParamGrads::zeros_like(&params);
            let coral_grads = coral.as_ref().filter(|_| lambda > 0.0);
            let src_blocks = coral_grads.map(|c| feature_blocks(&c.grad_source, &src, lambda));
            let upstream: Vec<OutputGrads> = (0..src.len())
                .map(|j| OutputGrads {
                    quality: alpha * g_sdr[j],
                    features: src_blocks.as_ref().map(|b| b[j].clone()),
                })
                .collect();
            accumulate(&params, &src, upstream, &mut grads)?;
            if g_hdr.is_some() || coral_grads.is_some() {
                let tgt_blocks = coral_grads.map(|c| feature_blocks(&c.grad_target, &tgt, lambda));
                let upstream: Vec<OutputGrads> = (0..tgt.len())
                    .map(|j| OutputGrads {
                        quality: g_hdr.as_ref().map_or(0.0, |g| beta * g[j]),
                        features: tgt_blocks.as_ref().map(|b| b[j].clone()),
                    })
                    .collect();
                accumulate(&params, &tgt, upstream, &mut grads)?;
            }
            if !grads.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    iteration: it,
                    message: "non-finite gradient".into(),
                });
            }
            optimizer.step(&mut params, &grads, lr);

            window.push(LossSample {
                task: alpha * l_sdr + beta * l_hdr,
                coral: l_coral,
            });
            sums_sdr.push(l_sdr);
            sums_hdr.push(l_hdr);
            sums_coral.push(l_coral);
            sums_total.push(total);
        }

        history.records.push(EpochRecord {
            epoch,
            l_sdr: mean(&sums_sdr),
            l_hdr: mean(&sums_hdr),
            l_coral: mean(&sums_coral),
            total: mean(&sums_total),
            lr,
            lambda,
            cov_distance: probe_distance(&params, config, source, target)?,
        });
        log::debug!(
            "epoch {epoch}: total {:.5} lr {lr:.3e} lambda {lambda:.3e}",
            mean(&sums_total)
        );
        if config.lambda_auto && config.da_mode.uses_target() {
            if let Some(l) = lambda_autoscale(&window) {
                lambda = l;
            }
        }
    }
    Ok(TrainOutcome { params, history })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn autoscale_ratio() {
        let w = [LossSample { task: 0.4, coral: 0.1 }];
        assert!((lambda_autoscale(&w).unwrap() - 4.0).abs() < 1e-12);
        let w = [LossSample { task: 0.3, coral: 0.3 }];
        assert_eq!(lambda_autoscale(&w), Some(1.0));
        let w = [LossSample { task: 0.3, coral: 0.0 }];
        assert_eq!(lambda_autoscale(&w), None);
        assert_eq!(lambda_autoscale(&[]), None);
        let w = [LossSample { task: 1e9, coral: 1e-9 }];
        assert_eq!(lambda_autoscale(&w), Some(1e6));
    }

    #[test]
    fn lr_schedule_endpoints() {
        let c = TrainConfig::default();
        assert_eq!(lr_at(&c, 0), 1e-4);
        let end = lr_at(&c, c.epochs);
        assert!((end - 1e-6).abs() / 1e-6 < 1e-12);
        let mid = lr_at(&c, 15);
        assert!((mid - 1e-5).abs() / 1e-5 < 1e-12);
    }

    #[test]
    fn hu_forces_beta_zero() {
        let c = TrainConfig {
            da_mode: DaMode::SToHu,
            beta: 3.0,
            ..TrainConfig::default()
        };
        assert_eq!(c.effective_beta(), 0.0);
        let c = TrainConfig { da_mode: DaMode::SToHs, beta: 3.0, ..c };
        assert_eq!(c.effective_beta(), 3.0);
    }

    #[test]
    fn config_json() {
        let c = TrainConfig::from_json(r#"{"da_mode": "s_to_hs", "model": "desk", "scheme": "255", "lambda": 0.5}"#).unwrap();
        assert_eq!(c.da_mode, DaMode::SToHs);
        assert_eq!(c.model, ModelConfig::preset("desk").unwrap());
        assert_eq!(c.scheme, Scheme::Div255);
        assert!(TrainConfig::from_json(r#"{"alpha": -1}"#).is_err());
        assert!(TrainConfig::from_json(r#"{"unknown": 1}"#).is_err());
        let round = serde_json::to_string(&c).unwrap();
        assert_eq!(TrainConfig::from_json(&round).unwrap(), c);
    }
}
