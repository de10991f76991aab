//! Feed-forward embedding network with an L2-normalized output and a
//! row-normalized classifier head that produces cosine logits.
//!
//! ```text
//! x ─► [W₁x + b₁, ReLU] ─► … ─► W_Lh + b_L = e ─► x̂ = e/‖e‖ ─► cos_ik = ŵ_k·x̂_i
//! ```
//!
//! Backpropagation is written out by hand, including the Jacobian of
//! `v ↦ v/max(‖v‖, ε)` for both normalizations.

use rand_distr::{Distribution, Normal};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::numerics::{dot, l2_norm, DenseMatrix, RngStream, NORM_EPSILON};

/// One affine layer; `weights` is `out × in`.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub weights: DenseMatrix,
    pub bias: Vec<f64>,
}

impl Layer {
    fn zeros_like(&self) -> Layer {
        Layer {
            weights: DenseMatrix::zeros(self.weights.rows(), self.weights.cols()),
            bias: vec![0.0; self.bias.len()],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.rows()
    }
}

/// The backbone. ReLU follows every layer except the last, whose output is the
/// (unnormalized) embedding.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingModel {
    pub layers: Vec<Layer>,
}

impl EmbeddingModel {
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::contract("model needs at least one layer"));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.output_dim() {
                return Err(Error::contract(format!(
                    "layer {i}: bias length {} for {} outputs",
                    l.bias.len(),
                    l.output_dim()
                )));
            }
            if i > 0 && layers[i - 1].output_dim() != l.input_dim() {
                return Err(Error::contract(format!(
                    "layer {i} expects {} inputs, previous layer gives {}",
                    l.input_dim(),
                    layers[i - 1].output_dim()
                )));
            }
        }
        Ok(EmbeddingModel { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn embedding_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    /// `[d₀, hidden…, d]`.
    pub fn layer_dims(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(Layer::output_dim))
            .collect()
    }

    /// L2-normalized embeddings for every row of `batch`.
    pub fn embed(&self, batch: &DenseMatrix) -> Result<DenseMatrix> {
        let (_, _, raw) = self.backbone(batch)?;
        let mut out = raw;
        for i in 0..out.rows() {
            let row = out.row_mut(i);
            let n = l2_norm(row).max(NORM_EPSILON);
            row.iter_mut().for_each(|x| *x /= n);
        }
        Ok(out)
    }

    /// Returns (pre-activations, hidden activations, raw embedding).
    fn backbone(&self, batch: &DenseMatrix) -> Result<(Vec<DenseMatrix>, Vec<DenseMatrix>, DenseMatrix)> {
        if batch.cols() != self.input_dim() {
            return Err(Error::contract(format!(
                "batch has {} features, model expects {}",
                batch.cols(),
                self.input_dim()
            )));
        }
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut acts = Vec::with_capacity(self.layers.len());
        let last = self.layers.len() - 1;
        let mut current: Option<DenseMatrix> = None;
        for (i, layer) in self.layers.iter().enumerate() {
            let input = current.as_ref().unwrap_or(batch);
            let mut z = input.matmul_transpose(&layer.weights)?;
            for r in 0..z.rows() {
                for (v, b) in z.row_mut(r).iter_mut().zip(&layer.bias) {
                    *v += b;
                }
            }
            if i == last {
                pre.push(z.clone());
                return Ok((pre, acts, z));
            }
            let mut h = z.clone();
            h.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
            pre.push(z);
            acts.push(h.clone());
            current = Some(h);
        }
        unreachable!("loop returns at the last layer")
    }
}

/// Class weights (`K × d`, rows are `w_k`) and the logit scale `s`.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierHead {
    pub class_weights: DenseMatrix,
    pub scale: f64,
}

impl ClassifierHead {
    pub fn new(class_weights: DenseMatrix, scale: f64) -> Result<Self> {
        if class_weights.rows() < 2 {
            return Err(Error::contract("classifier head needs at least 2 classes"));
        }
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::contract(format!("scale must be > 0, got {scale}")));
        }
        Ok(ClassifierHead {
            class_weights,
            scale,
        })
    }

    pub fn classes(&self) -> usize {
        self.class_weights.rows()
    }

    /// Row-normalized class weights and the norms they were divided by.
    fn normalized(&self) -> (DenseMatrix, Vec<f64>) {
        let mut w = self.class_weights.clone();
        let mut norms = Vec::with_capacity(w.rows());
        for k in 0..w.rows() {
            let row = w.row_mut(k);
            let n = l2_norm(row);
            norms.push(n);
            let d = n.max(NORM_EPSILON);
            row.iter_mut().for_each(|x| *x /= d);
        }
        (w, norms)
    }
}

/// Everything the backward pass needs from the forward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    pub inputs: DenseMatrix,
    pub pre_activations: Vec<DenseMatrix>,
    pub activations: Vec<DenseMatrix>,
    pub embedding_norms: Vec<f64>,
    pub embeddings: DenseMatrix,
    pub weight_norms: Vec<f64>,
    pub normalized_weights: DenseMatrix,
    pub cosines: DenseMatrix,
}

/// Gradients with the same shapes as the parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamGrads {
    pub layers: Vec<Layer>,
    pub class_weights: DenseMatrix,
}

impl ParamGrads {
    pub fn zeros_like(model: &EmbeddingModel, head: &ClassifierHead) -> Self {
        ParamGrads {
            layers: model.layers.iter().map(Layer::zeros_like).collect(),
            class_weights: DenseMatrix::zeros(head.class_weights.rows(), head.class_weights.cols()),
        }
    }

    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::with_capacity(2 * self.layers.len() + 1);
        for l in &self.layers {
            out.push(l.weights.as_slice());
            out.push(&l.bias);
        }
        out.push(self.class_weights.as_slice());
        out
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::with_capacity(2 * self.layers.len() + 1);
        for l in &mut self.layers {
            out.push(l.weights.as_mut_slice());
            out.push(&mut l.bias);
        }
        out.push(self.class_weights.as_mut_slice());
        out
    }
}

/// All parameters in a fixed order: per layer weights then bias, then class weights.
pub fn parameter_slices<'a>(model: &'a EmbeddingModel, head: &'a ClassifierHead) -> Vec<&'a [f64]> {
    let mut out: Vec<&[f64]> = Vec::with_capacity(2 * model.layers.len() + 1);
    for l in &model.layers {
        out.push(l.weights.as_slice());
        out.push(&l.bias);
    }
    out.push(head.class_weights.as_slice());
    out
}

pub fn parameter_slices_mut<'a>(
    model: &'a mut EmbeddingModel,
    head: &'a mut ClassifierHead,
) -> Vec<&'a mut [f64]> {
    let mut out: Vec<&mut [f64]> = Vec::with_capacity(2 * model.layers.len() + 1);
    for l in &mut model.layers {
        out.push(l.weights.as_mut_slice());
        out.push(&mut l.bias);
    }
    out.push(head.class_weights.as_mut_slice());
    out
}

/// SHA-256 over the little-endian bytes of every parameter and the scale.
pub fn parameter_digest(model: &EmbeddingModel, head: &ClassifierHead) -> String {
    let mut hasher = Sha256::new();
    for s in parameter_slices(model, head) {
        for v in s {
            hasher.update(v.to_le_bytes());
        }
    }
    hasher.update(head.scale.to_le_bytes());
    hex::encode(hasher.finalize())
}

/// He-initialized backbone (`N(0, 2/fan_in)`, zero biases) and a head with
/// `N(0, 1/d)` class weights.
///
/// `layer_dims` is `[d₀, hidden…, d]`.
pub fn init_model(
    layer_dims: &[usize],
    classes: usize,
    scale: f64,
    stream: &RngStream,
) -> Result<(EmbeddingModel, ClassifierHead)> {
    if layer_dims.len() < 2 || layer_dims.contains(&0) {
        return Err(Error::contract(format!(
            "layer dims {layer_dims:?} need an input and an embedding size, all > 0"
        )));
    }
    if classes < 2 {
        return Err(Error::contract("need at least 2 classes"));
    }
    let mut layers = Vec::with_capacity(layer_dims.len() - 1);
    for (i, pair) in layer_dims.windows(2).enumerate() {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
        let mut rng = stream.child(format!("layer{i}")).rng();
        let data = (0..fan_in * fan_out).map(|_| normal.sample(&mut rng)).collect();
        layers.push(Layer {
            weights: DenseMatrix::from_vec(fan_out, fan_in, data)?,
            bias: vec![0.0; fan_out],
        });
    }
    let d = layer_dims[layer_dims.len() - 1];
    let normal = Normal::new(0.0, (1.0 / d as f64).sqrt()).expect("positive std");
    let mut rng = stream.child("head").rng();
    let data = (0..classes * d).map(|_| normal.sample(&mut rng)).collect();
    let head = ClassifierHead::new(DenseMatrix::from_vec(classes, d, data)?, scale)?;
    Ok((EmbeddingModel::from_layers(layers)?, head))
}

/// Cosine logits (`N × K`) for a batch, plus the cache for [`backward`].
pub fn forward(
    model: &EmbeddingModel,
    head: &ClassifierHead,
    batch: &DenseMatrix,
) -> Result<(DenseMatrix, ForwardCache)> {
    if head.class_weights.cols() != model.embedding_dim() {
        return Err(Error::contract(format!(
            "head expects {}-d embeddings, model produces {}",
            head.class_weights.cols(),
            model.embedding_dim()
        )));
    }
    let (pre_activations, activations, raw) = model.backbone(batch)?;
    let mut embeddings = raw;
    let mut embedding_norms = Vec::with_capacity(embeddings.rows());
    for i in 0..embeddings.rows() {
        let row = embeddings.row_mut(i);
        let n = l2_norm(row);
        embedding_norms.push(n);
        let d = n.max(NORM_EPSILON);
        row.iter_mut().for_each(|x| *x /= d);
    }
    let (normalized_weights, weight_norms) = head.normalized();
    let mut cosines = embeddings.matmul_transpose(&normalized_weights)?;
    // Rounding can push |cos| a hair past one.
    cosines
        .as_mut_slice()
        .iter_mut()
        .for_each(|c| *c = c.clamp(-1.0, 1.0));
    let cache = ForwardCache {
        inputs: batch.clone(),
        pre_activations,
        activations,
        embedding_norms,
        embeddings,
        weight_norms,
        normalized_weights,
        cosines: cosines.clone(),
    };
    Ok((cosines, cache))
}

/// Backpropagates `g` through `v ↦ v/max(‖v‖, ε)` given the normalized `u`.
fn normalize_backward(g: &[f64], u: &[f64], norm: f64, out: &mut [f64]) {
    if norm >= NORM_EPSILON {
        let proj = dot(g, u);
        for ((o, gi), ui) in out.iter_mut().zip(g).zip(u) {
            *o = (gi - proj * ui) / norm;
        }
    } else {
        for (o, gi) in out.iter_mut().zip(g) {
            *o = gi / NORM_EPSILON;
        }
    }
}

/// Exact parameter gradients given `∂L/∂cos` for the batch in `cache`.
pub fn backward(
    model: &EmbeddingModel,
    cache: &ForwardCache,
    grad_cosines: &DenseMatrix,
) -> Result<ParamGrads> {
    if grad_cosines.shape() != cache.cosines.shape() {
        return Err(Error::contract(format!(
            "upstream gradient {:?} does not match cosines {:?}",
            grad_cosines.shape(),
            cache.cosines.shape()
        )));
    }
    let n = cache.embeddings.rows();
    let d = cache.embeddings.cols();

    // cos = X̂ Ŵᵀ
    let grad_xhat = grad_cosines.matmul(&cache.normalized_weights)?;
    let grad_what = grad_cosines.transpose_matmul(&cache.embeddings)?;

    let mut class_weights = DenseMatrix::zeros(grad_what.rows(), d);
    for k in 0..grad_what.rows() {
        normalize_backward(
            grad_what.row(k),
            cache.normalized_weights.row(k),
            cache.weight_norms[k],
            class_weights.row_mut(k),
        );
    }

    let mut upstream = DenseMatrix::zeros(n, d);
    for i in 0..n {
        normalize_backward(
            grad_xhat.row(i),
            cache.embeddings.row(i),
            cache.embedding_norms[i],
            upstream.row_mut(i),
        );
    }

    let mut layers: Vec<Layer> = Vec::with_capacity(model.layers.len());
    for (l, layer) in model.layers.iter().enumerate().rev() {
        let grad_z = if l == model.layers.len() - 1 {
            upstream
        } else {
            let mut gz = upstream;
            for (g, z) in gz
                .as_mut_slice()
                .iter_mut()
                .zip(cache.pre_activations[l].as_slice())
            {
                if *z <= 0.0 {
                    *g = 0.0;
                }
            }
            gz
        };
        let input = if l == 0 {
            &cache.inputs
        } else {
            &cache.activations[l - 1]
        };
        let weights = grad_z.transpose_matmul(input)?;
        let mut bias = vec![0.0; layer.output_dim()];
        for r in 0..grad_z.rows() {
            for (b, g) in bias.iter_mut().zip(grad_z.row(r)) {
                *b += g;
            }
        }
        upstream = if l > 0 {
            grad_z.matmul(&layer.weights)?
        } else {
            DenseMatrix::zeros(0, 0)
        };
        layers.push(Layer { weights, bias });
    }
    layers.reverse();
    Ok(ParamGrads {
        layers,
        class_weights,
    })
}
