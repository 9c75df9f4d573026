//! A small patch-wise full-reference quality network.
//!
//! Layout, per patch `i`:
//!
//! ```text
//! f_ref,i  = extractor(ref patch i)        f_dist,i = extractor(dist patch i)
//! Δ_i      = f_ref,i - f_dist,i
//! s_i      = score_head(Δ_i)               (linear)
//! w_i      = softplus(weight_head(Δ_i)) + ε
//! quality  = Σ w_i s_i / Σ w_i
//! ```
//!
//! The extractor is a stack of fully connected layers, each followed by the
//! configured activation, and is shared between the reference and distorted
//! branches. The final extractor activations double as the feature batch for
//! CORAL. Gradients are derived by hand in [`backward`].

pub mod checkpoint;
pub mod coral;
pub mod loss;

use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::patches::PatchBatch;
use crate::rng::StreamRng;
use crate::{Error, Result};

pub use coral::{coral_loss, covariance, CoralLoss, FeatureBatch, FeatureDomain};
pub use loss::{mae_loss, total_loss, LossWeights};

/// Added to every patch weight so pooling never divides by zero.
pub const WEIGHT_EPSILON: f64 = 1e-6;

static NEXT_PARAMS_ID: AtomicU64 = AtomicU64::new(1);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Softplus,
}

impl Activation {
    pub(crate) fn code(self) -> f64 {
        match self {
            Activation::Tanh => 0.0,
            Activation::Softplus => 1.0,
        }
    }

    pub(crate) fn from_code(code: f64) -> Option<Self> {
        match code as i64 {
            0 => Some(Activation::Tanh),
            1 => Some(Activation::Softplus),
            _ => None,
        }
    }

    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Softplus => softplus(z),
        }
    }

    /// Derivative given the pre-activation `z` and activation `a`.
    #[inline]
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Softplus => sigmoid(z),
        }
    }
}

#[inline]
pub(crate) fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

#[inline]
pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Which extractor rows feed the CORAL feature batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoralRows {
    /// Reference rows followed by distorted rows (`2n × d`).
    #[default]
    RefAndDist,
    /// Reference rows only (`n × d`).
    RefOnly,
}

/// Architecture of a [`QualityNetParams`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub patch_size: usize,
    /// Widths of the hidden extractor layers.
    pub hidden: Vec<usize>,
    pub feature_dim: usize,
    pub activation: Activation,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            patch_size: 64,
            hidden: vec![128],
            feature_dim: 64,
            activation: Activation::Softplus,
        }
    }
}

impl ModelConfig {
    /// Named architectures: `pieapp-toy` (64×64 patches, the default),
    /// `desk` (16×16 patches, minutes-scale training), `desk-tanh`.
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "pieapp-toy" => Ok(ModelConfig::default()),
            "desk" => Ok(ModelConfig {
                patch_size: 16,
                hidden: vec![32],
                feature_dim: 16,
                activation: Activation::Softplus,
            }),
            "desk-tanh" => Ok(ModelConfig {
                patch_size: 16,
                hidden: vec![32, 24],
                feature_dim: 16,
                activation: Activation::Tanh,
            }),
            _ => Err(Error::Config(format!("unknown model preset {name:?}"))),
        }
    }

    pub const PRESETS: [&'static str; 3] = ["pieapp-toy", "desk", "desk-tanh"];

    pub fn validate(&self) -> Result<()> {
        if self.patch_size == 0 {
            return Err(Error::Config("patch_size must be positive".into()));
        }
        if self.feature_dim < 2 {
            return Err(Error::Config("feature_dim must be at least 2".into()));
        }
        if self.hidden.len() > 3 {
            return Err(Error::Config(
                "the extractor supports 1 to 4 fully connected layers".into(),
            ));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Config("hidden layer widths must be positive".into()));
        }
        Ok(())
    }

    pub fn input_width(&self) -> usize {
        self.patch_size * self.patch_size
    }
}

/// A fully connected layer, `y = x · W + b` with `W` of shape `in × out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    fn xavier(inputs: usize, outputs: usize, rng: &mut StreamRng) -> Self {
        let bound = (6.0 / (inputs + outputs) as f64).sqrt();
        Dense {
            weights: Array2::from_shape_fn((inputs, outputs), |_| rng.random_range(-bound..bound)),
            bias: Array1::zeros(outputs),
        }
    }

    fn zeros_like(other: &Dense) -> Self {
        Dense {
            weights: Array2::zeros(other.weights.raw_dim()),
            bias: Array1::zeros(other.bias.raw_dim()),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.weights.ncols()
    }

    fn apply(&self, x: ArrayView2<f64>) -> Array2<f64> {
        x.dot(&self.weights) + &self.bias
    }
}

/// Parameters of the quality network.
#[derive(Debug, Clone)]
pub struct QualityNetParams {
    pub feature_layers: Vec<Dense>,
    pub score_head: Dense,
    pub weight_head: Dense,
    pub activation: Activation,
    id: u64,
    generation: u64,
}

impl PartialEq for QualityNetParams {
    fn eq(&self, other: &Self) -> bool {
        self.feature_layers == other.feature_layers
            && self.score_head == other.score_head
            && self.weight_head == other.weight_head
            && self.activation == other.activation
    }
}

impl QualityNetParams {
    /// Xavier-uniform weights, zero biases.
    pub fn init(config: &ModelConfig, rng: &mut StreamRng) -> Result<Self> {
        config.validate()?;
        let mut widths = vec![config.input_width()];
        widths.extend(&config.hidden);
        widths.push(config.feature_dim);
        let feature_layers = widths
            .windows(2)
            .map(|w| Dense::xavier(w[0], w[1], rng))
            .collect();
        let score_head = Dense::xavier(config.feature_dim, 1, rng);
        let weight_head = Dense::xavier(config.feature_dim, 1, rng);
        Ok(Self::from_parts(
            feature_layers,
            score_head,
            weight_head,
            config.activation,
        ))
    }

    pub fn from_parts(
        feature_layers: Vec<Dense>,
        score_head: Dense,
        weight_head: Dense,
        activation: Activation,
    ) -> Self {
        QualityNetParams {
            feature_layers,
            score_head,
            weight_head,
            activation,
            id: NEXT_PARAMS_ID.fetch_add(1, Ordering::Relaxed),
            generation: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let first = self
            .feature_layers
            .first()
            .ok_or_else(|| Error::Config("extractor needs at least one layer".into()))?;
        let side = (first.inputs() as f64).sqrt().round() as usize;
        if side * side != first.inputs() {
            return Err(Error::Config(format!(
                "extractor input width {} is not a square patch",
                first.inputs()
            )));
        }
        for pair in self.feature_layers.windows(2) {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(Error::Config("extractor layer widths do not chain".into()));
            }
        }
        for layer in &self.feature_layers {
            if layer.bias.len() != layer.outputs() {
                return Err(Error::Config("bias width mismatch".into()));
            }
        }
        let d = self.feature_dim();
        if d < 2 {
            return Err(Error::Config("feature_dim must be at least 2".into()));
        }
        for head in [&self.score_head, &self.weight_head] {
            if head.inputs() != d || head.outputs() != 1 || head.bias.len() != 1 {
                return Err(Error::Config(format!("heads must map {d} features to 1")));
            }
        }
        if !self.tensors().iter().all(|(_, t)| t.iter().all(|v| v.is_finite())) {
            return Err(Error::Config("parameters contain non-finite values".into()));
        }
        Ok(())
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_layers.last().map_or(0, Dense::outputs)
    }

    pub fn input_width(&self) -> usize {
        self.feature_layers.first().map_or(0, Dense::inputs)
    }

    pub fn patch_size(&self) -> usize {
        (self.input_width() as f64).sqrt().round() as usize
    }

    pub fn config(&self) -> ModelConfig {
        ModelConfig {
            patch_size: self.patch_size(),
            hidden: self.feature_layers[..self.feature_layers.len() - 1]
                .iter()
                .map(Dense::outputs)
                .collect(),
            feature_dim: self.feature_dim(),
            activation: self.activation,
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    /// Named parameter tensors in canonical order.
    pub fn tensors(&self) -> Vec<(String, &[f64])> {
        dense_tensors(&self.feature_layers, &self.score_head, &self.weight_head)
    }

    /// Mutable view of every parameter tensor in canonical order. Marks the
    /// parameters as modified, invalidating outstanding forward caches.
    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.generation += 1;
        let mut out = Vec::new();
        for layer in &mut self.feature_layers {
            out.push(layer.weights.as_slice_mut().expect("standard layout"));
            out.push(layer.bias.as_slice_mut().expect("standard layout"));
        }
        for head in [&mut self.score_head, &mut self.weight_head] {
            out.push(head.weights.as_slice_mut().expect("standard layout"));
            out.push(head.bias.as_slice_mut().expect("standard layout"));
        }
        out
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }
}

fn dense_tensors<'a>(
    layers: &'a [Dense],
    score: &'a Dense,
    weight: &'a Dense,
) -> Vec<(String, &'a [f64])> {
    let mut out = Vec::new();
    for (i, layer) in layers.iter().enumerate() {
        out.push((
            format!("feature.{i}.weight"),
            layer.weights.as_slice().expect("standard layout"),
        ));
        out.push((
            format!("feature.{i}.bias"),
            layer.bias.as_slice().expect("standard layout"),
        ));
    }
    for (name, head) in [("score", score), ("weight", weight)] {
        out.push((
            format!("{name}.weight"),
            head.weights.as_slice().expect("standard layout"),
        ));
        out.push((
            format!("{name}.bias"),
            head.bias.as_slice().expect("standard layout"),
        ));
    }
    out
}

/// Gradients with the same layout as [`QualityNetParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    pub feature_layers: Vec<Dense>,
    pub score_head: Dense,
    pub weight_head: Dense,
}

impl ParamGrads {
    pub fn zeros_like(params: &QualityNetParams) -> Self {
        ParamGrads {
            feature_layers: params.feature_layers.iter().map(Dense::zeros_like).collect(),
            score_head: Dense::zeros_like(&params.score_head),
            weight_head: Dense::zeros_like(&params.weight_head),
        }
    }

    pub fn tensors(&self) -> Vec<(String, &[f64])> {
        dense_tensors(&self.feature_layers, &self.score_head, &self.weight_head)
    }

    pub fn add_assign(&mut self, other: &ParamGrads) {
        let pairs = self
            .feature_layers
            .iter_mut()
            .chain([&mut self.score_head, &mut self.weight_head])
            .zip(
                other
                    .feature_layers
                    .iter()
                    .chain([&other.score_head, &other.weight_head]),
            );
        for (a, b) in pairs {
            a.weights += &b.weights;
            a.bias += &b.bias;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for d in self
            .feature_layers
            .iter_mut()
            .chain([&mut self.score_head, &mut self.weight_head])
        {
            d.weights *= factor;
            d.bias *= factor;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|(_, t)| t.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }
}

/// Activations recorded by [`forward`] for one branch of the extractor.
#[derive(Debug, Clone)]
struct BranchCache {
    /// `acts[0]` is the input; `acts[l + 1]` is the output of layer `l`.
    acts: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
}

/// Everything [`backward`] needs from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    params_id: u64,
    generation: u64,
    reference: BranchCache,
    distorted: BranchCache,
    delta: Array2<f64>,
    scores: Array1<f64>,
    weights: Array1<f64>,
    weight_pre: Array1<f64>,
    quality: f64,
    coral_rows: CoralRows,
}

#[derive(Debug, Clone)]
pub struct ForwardResult {
    pub quality: f64,
    pub patch_scores: Vec<f64>,
    pub patch_weights: Vec<f64>,
    pub features: FeatureBatch,
    pub cache: ForwardCache,
}

fn run_extractor(params: &QualityNetParams, input: &Array2<f64>) -> BranchCache {
    let mut acts = Vec::with_capacity(params.feature_layers.len() + 1);
    let mut pre = Vec::with_capacity(params.feature_layers.len());
    acts.push(input.clone());
    for layer in &params.feature_layers {
        let z = layer.apply(acts.last().expect("input pushed").view());
        let a = z.mapv(|v| params.activation.apply(v));
        pre.push(z);
        acts.push(a);
    }
    BranchCache { acts, pre }
}

/// Scores a patch batch; features are tagged as source-domain, ref and dist rows.
pub fn forward(params: &QualityNetParams, batch: &PatchBatch) -> Result<ForwardResult> {
    forward_with(params, batch, CoralRows::RefAndDist, FeatureDomain::Source)
}

pub fn forward_with(
    params: &QualityNetParams,
    batch: &PatchBatch,
    coral_rows: CoralRows,
    domain: FeatureDomain,
) -> Result<ForwardResult> {
    if batch.ref_patches.ncols() != params.input_width() {
        return Err(Error::Config(format!(
            "patch width {} does not match the extractor input width {}",
            batch.ref_patches.ncols(),
            params.input_width()
        )));
    }
    if batch.is_empty() {
        return Err(Error::Config("empty patch batch".into()));
    }
    let reference = run_extractor(params, &batch.ref_patches);
    let distorted = run_extractor(params, &batch.dist_patches);
    let f_ref = reference.acts.last().expect("at least one layer");
    let f_dist = distorted.acts.last().expect("at least one layer");
    let delta = f_ref - f_dist;

    let scores = params.score_head.apply(delta.view()).column(0).to_owned();
    let weight_pre = params.weight_head.apply(delta.view()).column(0).to_owned();
    let weights = weight_pre.mapv(|u| softplus(u) + WEIGHT_EPSILON);
    let quality = (&weights * &scores).sum() / weights.sum();

    let features = match coral_rows {
        CoralRows::RefAndDist => {
            ndarray::concatenate(Axis(0), &[f_ref.view(), f_dist.view()]).expect("same width")
        }
        CoralRows::RefOnly => f_ref.clone(),
    };

    Ok(ForwardResult {
        quality,
        patch_scores: scores.to_vec(),
        patch_weights: weights.to_vec(),
        features: FeatureBatch {
            features,
            domain,
        },
        cache: ForwardCache {
            params_id: params.id,
            generation: params.generation,
            reference,
            distorted,
            delta,
            scores,
            weights,
            weight_pre,
            quality,
            coral_rows,
        },
    })
}

/// Upstream gradients of a scalar loss with respect to the forward outputs.
#[derive(Debug, Clone, Default)]
pub struct OutputGrads {
    /// `∂loss/∂quality`.
    pub quality: f64,
    /// `∂loss/∂features`, same shape as `ForwardResult::features`.
    pub features: Option<Array2<f64>>,
}

fn backprop_branch(
    params: &QualityNetParams,
    cache: &BranchCache,
    mut upstream: Array2<f64>,
    grads: &mut ParamGrads,
) {
    for l in (0..params.feature_layers.len()).rev() {
        let mut dz = upstream;
        Zip::from(&mut dz)
            .and(&cache.pre[l])
            .and(&cache.acts[l + 1])
            .for_each(|g, &z, &a| *g *= params.activation.derivative(z, a));
        grads.feature_layers[l].weights += &cache.acts[l].t().dot(&dz);
        grads.feature_layers[l].bias += &dz.sum_axis(Axis(0));
        upstream = if l > 0 {
            dz.dot(&params.feature_layers[l].weights.t())
        } else {
            Array2::zeros((0, 0))
        };
    }
}

/// Reverse-mode gradients of a scalar loss with respect to every parameter.
pub fn backward(
    params: &QualityNetParams,
    cache: &ForwardCache,
    upstream: &OutputGrads,
) -> Result<ParamGrads> {
    if cache.params_id != params.id || cache.generation != params.generation {
        return Err(Error::State(
            "forward cache was produced by different or since-modified parameters".into(),
        ));
    }
    let n = cache.scores.len();
    let total_weight = cache.weights.sum();
    let mut grads = ParamGrads::zeros_like(params);

    // Weighted-mean pooling.
    let d_scores = cache.weights.mapv(|w| upstream.quality * w / total_weight);
    let d_weights = cache
        .scores
        .mapv(|s| upstream.quality * (s - cache.quality) / total_weight);
    let d_weight_pre = Zip::from(&d_weights)
        .and(&cache.weight_pre)
        .map_collect(|&g, &u| g * sigmoid(u));

    let delta_t = cache.delta.t();
    grads.score_head.weights = delta_t.dot(&d_scores).insert_axis(Axis(1));
    grads.score_head.bias[0] = d_scores.sum();
    grads.weight_head.weights = delta_t.dot(&d_weight_pre).insert_axis(Axis(1));
    grads.weight_head.bias[0] = d_weight_pre.sum();

    let score_w = params.score_head.weights.column(0);
    let weight_w = params.weight_head.weights.column(0);
    let d_delta = d_scores.view().insert_axis(Axis(1)).dot(&score_w.insert_axis(Axis(0)))
        + d_weight_pre
            .view()
            .insert_axis(Axis(1))
            .dot(&weight_w.insert_axis(Axis(0)));

    let mut d_ref = d_delta.clone();
    let mut d_dist = -d_delta;
    if let Some(df) = &upstream.features {
        let expected_rows = match cache.coral_rows {
            CoralRows::RefAndDist => 2 * n,
            CoralRows::RefOnly => n,
        };
        if df.nrows() != expected_rows || df.ncols() != params.feature_dim() {
            return Err(Error::Dimension(format!(
                "feature gradient is {}x{}, expected {}x{}",
                df.nrows(),
                df.ncols(),
                expected_rows,
                params.feature_dim()
            )));
        }
        d_ref += &df.slice(ndarray::s![..n, ..]);
        if cache.coral_rows == CoralRows::RefAndDist {
            d_dist += &df.slice(ndarray::s![n.., ..]);
        }
    }

    backprop_branch(params, &cache.reference, d_ref, &mut grads);
    backprop_branch(params, &cache.distorted, d_dist, &mut grads);
    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::patches::sample_patches;
    use crate::rng::stream;

    fn tiny_config() -> ModelConfig {
        ModelConfig {
            patch_size: 4,
            hidden: vec![6],
            feature_dim: 3,
            activation: Activation::Softplus,
        }
    }

    fn batch(seed: u64, patch: usize, n: usize, same: bool) -> PatchBatch {
        let mut rng = stream(seed, &[]);
        let a = Grid::from_fn(24, 24, |_, _| rng.random::<f64>());
        let b = if same {
            a.clone()
        } else {
            Grid::from_fn(24, 24, |_, _| rng.random::<f64>())
        };
        sample_patches(&a, &b, n, patch, seed).unwrap()
    }

    #[test]
    fn identical_inputs_give_constant_quality() {
        let params = QualityNetParams::init(&tiny_config(), &mut stream(1, &[])).unwrap();
        let q1 = forward(&params, &batch(1, 4, 8, true)).unwrap();
        let q2 = forward(&params, &batch(2, 4, 8, true)).unwrap();
        let bias = params.score_head.bias[0];
        assert!(q1.patch_scores.iter().all(|&s| s == bias));
        assert_eq!(q1.quality, q2.quality);
    }

    #[test]
    fn pooling_degeneracies() {
        let mut params = QualityNetParams::init(&tiny_config(), &mut stream(2, &[])).unwrap();
        // Zero weight-head weights make every patch weight equal.
        params.weight_head.weights.fill(0.0);
        let r = forward(&params, &batch(3, 4, 8, false)).unwrap();
        let mean = r.patch_scores.iter().sum::<f64>() / 8.0;
        assert!((r.quality - mean).abs() < 1e-12);

        let single = forward(&params, &batch(4, 4, 1, false)).unwrap();
        assert!((single.quality - single.patch_scores[0]).abs() < 1e-12);
    }

    #[test]
    fn weights_positive_and_features_stacked() {
        let params = QualityNetParams::init(&tiny_config(), &mut stream(5, &[])).unwrap();
        let b = batch(5, 4, 7, false);
        let r = forward(&params, &b).unwrap();
        assert!(r.patch_weights.iter().all(|&w| w > 0.0));
        assert_eq!(r.features.features.dim(), (14, 3));
        let ref_only = forward_with(&params, &b, CoralRows::RefOnly, FeatureDomain::Target).unwrap();
        assert_eq!(ref_only.features.features.dim(), (7, 3));
        assert_eq!(ref_only.features.domain, FeatureDomain::Target);
    }

    #[test]
    fn width_mismatch_is_config_error() {
        let params = QualityNetParams::init(&tiny_config(), &mut stream(6, &[])).unwrap();
        assert!(matches!(
            forward(&params, &batch(6, 5, 4, false)),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn stale_cache_rejected() {
        let mut params = QualityNetParams::init(&tiny_config(), &mut stream(7, &[])).unwrap();
        let r = forward(&params, &batch(7, 4, 4, false)).unwrap();
        let up = OutputGrads {
            quality: 1.0,
            features: None,
        };
        assert!(backward(&params, &r.cache, &up).is_ok());
        let other = QualityNetParams::init(&tiny_config(), &mut stream(7, &[])).unwrap();
        assert!(matches!(backward(&other, &r.cache, &up), Err(Error::State(_))));
        params.tensors_mut()[0][0] += 1.0;
        assert!(matches!(backward(&params, &r.cache, &up), Err(Error::State(_))));
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let params = QualityNetParams::init(&tiny_config(), &mut stream(8, &[])).unwrap();
        let r = forward(&params, &batch(8, 4, 6, false)).unwrap();
        let g = backward(
            &params,
            &r.cache,
            &OutputGrads {
                quality: 0.0,
                features: Some(Array2::zeros((12, 3))),
            },
        )
        .unwrap();
        assert_eq!(g.max_abs(), 0.0);
    }

    #[test]
    fn forward_backward_bit_stable() {
        let params = QualityNetParams::init(&tiny_config(), &mut stream(9, &[])).unwrap();
        let b = batch(9, 4, 6, false);
        let r1 = forward(&params, &b).unwrap();
        let r2 = forward(&params, &b).unwrap();
        assert_eq!(r1.quality.to_bits(), r2.quality.to_bits());
        let up = OutputGrads {
            quality: 0.7,
            features: Some(Array2::from_elem((12, 3), 0.1)),
        };
        let g1 = backward(&params, &r1.cache, &up).unwrap();
        let g2 = backward(&params, &r2.cache, &up).unwrap();
        assert_eq!(g1, g2);
    }

    #[test]
    fn preset_configs_validate() {
        for name in ModelConfig::PRESETS {
            let cfg = ModelConfig::preset(name).unwrap();
            let p = QualityNetParams::init(&cfg, &mut stream(0, &[])).unwrap();
            p.validate().unwrap();
            assert_eq!(p.config(), cfg);
        }
        assert!(ModelConfig::preset("vgg16").is_err());
        let bad = ModelConfig {
            feature_dim: 1,
            ..tiny_config()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn softplus_is_stable() {
        assert_eq!(softplus(1000.0), 1000.0);
        assert!(softplus(-1000.0) >= 0.0);
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
    }
}
