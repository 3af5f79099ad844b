//! One-hidden-layer MLP binary classifier with hand-written backprop.
//!
//! Architecture: `d -> hidden (ReLU) -> dropout -> 1 (sigmoid)`. Parameters
//! live in a single flat [`ParamVector`] laid out as `W1 (h x d, row-major)`,
//! `b1 (h)`, `W2 (1 x h)`, `b2 (1)`, which is the unit exchanged between sites
//! and the server.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, purpose};
use crate::scalar::Scalar;

pub const DEFAULT_HIDDEN: usize = 16;
pub const DEFAULT_DROPOUT: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub dropout_p: f64,
}

impl ModelSpec {
    pub fn new(input_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_dim: DEFAULT_HIDDEN,
            dropout_p: DEFAULT_DROPOUT,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::InvalidArgument("input_dim must be >= 1".into()));
        }
        if self.hidden_dim == 0 {
            return Err(Error::InvalidArgument("hidden_dim must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::InvalidArgument(format!(
                "dropout_p must be in [0, 1), got {}",
                self.dropout_p
            )));
        }
        Ok(())
    }

    pub fn layer_shapes(&self) -> Vec<LayerShape> {
        vec![
            LayerShape {
                rows: self.hidden_dim,
                cols: self.input_dim,
            },
            LayerShape {
                rows: 1,
                cols: self.hidden_dim,
            },
        ]
    }

    pub fn param_count(&self) -> usize {
        LayerShape::total(&self.layer_shapes())
    }
}

/// Weight matrix shape of one dense layer; the layer also owns `rows` biases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LayerShape {
    pub rows: usize,
    pub cols: usize,
}

impl LayerShape {
    pub fn len(&self) -> usize {
        self.rows * self.cols + self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn total(shapes: &[LayerShape]) -> usize {
        shapes.iter().map(LayerShape::len).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector<T> {
    values: Vec<T>,
    shapes: Vec<LayerShape>,
}

impl<T: Scalar> ParamVector<T> {
    pub fn new(values: Vec<T>, shapes: Vec<LayerShape>) -> Result<Self> {
        let expected = LayerShape::total(&shapes);
        if values.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("parameters must be finite".into()));
        }
        Ok(Self { values, shapes })
    }

    pub fn zeros(shapes: Vec<LayerShape>) -> Self {
        let n = LayerShape::total(&shapes);
        Self {
            values: vec![T::zero(); n],
            shapes,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            values: vec![T::zero(); self.values.len()],
            shapes: self.shapes.clone(),
        }
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn shapes(&self) -> &[LayerShape] {
        &self.shapes
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.shapes != other.shapes || self.values.len() != other.values.len() {
            return Err(Error::ShapeMismatch(format!(
                "{:?} vs {:?}",
                self.shapes, other.shapes
            )));
        }
        Ok(())
    }

    pub fn norm_sq(&self) -> T {
        self.values.iter().fold(T::zero(), |acc, &v| acc + v * v)
    }

    pub fn norm_l2(&self) -> T {
        self.norm_sq().sqrt()
    }

    pub fn scale(&mut self, factor: T) {
        self.values.iter_mut().for_each(|v| *v = *v * factor);
    }

    /// `self += alpha * other`
    pub fn add_scaled(&mut self, other: &Self, alpha: T) -> Result<()> {
        self.check_compatible(other)?;
        for (a, &b) in self.values.iter_mut().zip(&other.values) {
            *a = *a + alpha * b;
        }
        Ok(())
    }

    /// `self - other`
    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| a - b)
            .collect();
        Ok(Self {
            values,
            shapes: self.shapes.clone(),
        })
    }

    pub fn distance_l2(&self, other: &Self) -> Result<T> {
        self.check_compatible(other)?;
        let sq = self
            .values
            .iter()
            .zip(&other.values)
            .fold(T::zero(), |acc, (&a, &b)| acc + (a - b) * (a - b));
        Ok(sq.sqrt())
    }

    /// Converts to another scalar width, element by element.
    pub fn cast<U: Scalar>(&self) -> ParamVector<U> {
        ParamVector {
            values: self.values.iter().map(|v| U::of(v.as_f64())).collect(),
            shapes: self.shapes.clone(),
        }
    }
}

/// Row-major feature matrix plus binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch<T> {
    features: Vec<T>,
    dim: usize,
    labels: Vec<u8>,
}

impl<T: Scalar> Batch<T> {
    pub fn new(features: Vec<T>, dim: usize, labels: Vec<u8>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Empty("batch has no samples"));
        }
        if dim == 0 {
            return Err(Error::InvalidArgument("feature dimension must be >= 1".into()));
        }
        if features.len() != dim * labels.len() {
            return Err(Error::DimensionMismatch {
                expected: dim * labels.len(),
                got: features.len(),
            });
        }
        if let Some(bad) = labels.iter().find(|&&y| y > 1) {
            return Err(Error::InvalidArgument(format!("label {bad} is not 0/1")));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("features must be finite".into()));
        }
        Ok(Self {
            features,
            dim,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn features(&self) -> &[T] {
        &self.features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&y| y == 1).count()
    }

    /// Copies the rows at `indices`, in that order.
    pub fn gather(&self, indices: &[usize]) -> Result<Self> {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(Error::IndexOutOfBounds {
                    index: i,
                    len: self.len(),
                });
            }
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Self::new(features, self.dim, labels)
    }

    /// Stacks `other` below `self`.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        let mut features = self.features.clone();
        features.extend_from_slice(&other.features);
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        Self::new(features, self.dim, labels)
    }

    pub fn cast<U: Scalar>(&self) -> Batch<U> {
        Batch {
            features: self.features.iter().map(|v| U::of(v.as_f64())).collect(),
            dim: self.dim,
            labels: self.labels.clone(),
        }
    }
}

/// Per-sample, per-hidden-unit multipliers: `0` for dropped units and
/// `1/(1-p)` for kept ones (inverted dropout).
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask<T> {
    hidden: usize,
    scales: Vec<T>,
}

impl<T: Scalar> DropoutMask<T> {
    pub fn sample<R: Rng + ?Sized>(spec: &ModelSpec, n: usize, rng: &mut R) -> Self {
        let keep = 1.0 - spec.dropout_p;
        let kept = T::of(1.0 / keep);
        let scales = (0..n * spec.hidden_dim)
            .map(|_| {
                if rng.random::<f64>() < keep {
                    kept
                } else {
                    T::zero()
                }
            })
            .collect();
        Self {
            hidden: spec.hidden_dim,
            scales,
        }
    }

    pub fn all_keep(spec: &ModelSpec, n: usize) -> Self {
        let kept = T::of(1.0 / (1.0 - spec.dropout_p));
        Self {
            hidden: spec.hidden_dim,
            scales: vec![kept; n * spec.hidden_dim],
        }
    }

    pub fn from_scales(hidden: usize, scales: Vec<T>) -> Self {
        Self { hidden, scales }
    }

    pub fn samples(&self) -> usize {
        if self.hidden == 0 {
            0
        } else {
            self.scales.len() / self.hidden
        }
    }

    fn row(&self, i: usize) -> &[T] {
        &self.scales[i * self.hidden..(i + 1) * self.hidden]
    }
}

struct Layers<'a, T> {
    w1: &'a [T],
    b1: &'a [T],
    w2: &'a [T],
    b2: T,
    d: usize,
    h: usize,
}

impl<'a, T: Scalar> Layers<'a, T> {
    fn split(spec: &ModelSpec, params: &'a ParamVector<T>) -> Result<Self> {
        if params.shapes() != spec.layer_shapes().as_slice() {
            return Err(Error::ShapeMismatch(format!(
                "parameters {:?} do not match model {:?}",
                params.shapes(),
                spec.layer_shapes()
            )));
        }
        let (d, h) = (spec.input_dim, spec.hidden_dim);
        let v = params.values();
        let (w1, rest) = v.split_at(h * d);
        let (b1, rest) = rest.split_at(h);
        let (w2, rest) = rest.split_at(h);
        Ok(Self {
            w1,
            b1,
            w2,
            b2: rest[0],
            d,
            h,
        })
    }

    /// Returns (pre-activations, post-dropout activations, logit) for one row.
    fn forward_row(&self, x: &[T], mask: Option<&[T]>, z1: &mut [T], a: &mut [T]) -> T {
        let mut z2 = self.b2;
        for j in 0..self.h {
            let w = &self.w1[j * self.d..(j + 1) * self.d];
            let pre = w.iter().zip(x).fold(self.b1[j], |acc, (&wi, &xi)| acc + wi * xi);
            z1[j] = pre;
            let mut act = if pre > T::zero() { pre } else { T::zero() };
            if let Some(m) = mask {
                act = act * m[j];
            }
            a[j] = act;
            z2 = z2 + self.w2[j] * act;
        }
        z2
    }
}

fn check_mask<T: Scalar>(spec: &ModelSpec, mask: Option<&DropoutMask<T>>, n: usize) -> Result<()> {
    if let Some(m) = mask {
        if m.hidden != spec.hidden_dim || m.samples() != n {
            return Err(Error::DimensionMismatch {
                expected: n * spec.hidden_dim,
                got: m.scales.len(),
            });
        }
    }
    Ok(())
}

/// Probability clamp used by both the forward pass and the loss. For `f32`
/// the `1e-12` floor is lifted to machine epsilon so `1 - eps < 1`.
fn prob_eps<T: Scalar>() -> T {
    T::of(1e-12).max(T::epsilon())
}

pub fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

fn clamp_prob<T: Scalar>(p: T) -> T {
    let eps = prob_eps::<T>();
    p.max(eps).min(T::one() - eps)
}

pub fn init_params<T: Scalar>(spec: &ModelSpec, seed: u64) -> Result<ParamVector<T>> {
    spec.validate()?;
    let mut rng = rng::derived_stream(seed, &[purpose::INIT]);
    let mut values = Vec::with_capacity(spec.param_count());
    for shape in spec.layer_shapes() {
        let bound = 1.0 / (shape.cols as f64).sqrt();
        for _ in 0..shape.rows * shape.cols {
            values.push(T::of(rng::uniform(&mut rng, -bound, bound)));
        }
        values.extend(std::iter::repeat_n(T::zero(), shape.rows));
    }
    ParamVector::new(values, spec.layer_shapes())
}

/// Forward pass over a row-major `features` matrix with `spec.input_dim` columns.
///
/// `mask` is the training-time dropout mask; pass `None` for inference.
pub fn forward<T: Scalar>(
    spec: &ModelSpec,
    params: &ParamVector<T>,
    features: &[T],
    mask: Option<&DropoutMask<T>>,
) -> Result<Vec<T>> {
    let layers = Layers::split(spec, params)?;
    if features.len() % spec.input_dim != 0 {
        return Err(Error::DimensionMismatch {
            expected: spec.input_dim,
            got: features.len() % spec.input_dim,
        });
    }
    let n = features.len() / spec.input_dim;
    check_mask(spec, mask, n)?;
    let mut z1 = vec![T::zero(); spec.hidden_dim];
    let mut a = vec![T::zero(); spec.hidden_dim];
    Ok(features
        .chunks_exact(spec.input_dim)
        .enumerate()
        .map(|(i, x)| {
            let z2 = layers.forward_row(x, mask.map(|m| m.row(i)), &mut z1, &mut a);
            clamp_prob(sigmoid(z2))
        })
        .collect())
}

/// Mean binary cross-entropy with probabilities clamped away from 0 and 1.
pub fn bce_loss<T: Scalar>(probs: &[T], labels: &[u8]) -> Result<T> {
    if probs.is_empty() {
        return Err(Error::Empty("loss over zero samples"));
    }
    if probs.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: probs.len(),
            got: labels.len(),
        });
    }
    let total = probs.iter().zip(labels).fold(T::zero(), |acc, (&p, &y)| {
        let p = clamp_prob(p);
        let term = if y == 1 { p.ln() } else { (T::one() - p).ln() };
        acc - term
    });
    Ok(total / T::of(probs.len() as f64))
}

pub fn batch_loss<T: Scalar>(
    spec: &ModelSpec,
    params: &ParamVector<T>,
    batch: &Batch<T>,
    mask: Option<&DropoutMask<T>>,
) -> Result<T> {
    check_dim(spec, batch)?;
    let probs = forward(spec, params, batch.features(), mask)?;
    bce_loss(&probs, batch.labels())
}

fn check_dim<T: Scalar>(spec: &ModelSpec, batch: &Batch<T>) -> Result<()> {
    if batch.dim() != spec.input_dim {
        return Err(Error::DimensionMismatch {
            expected: spec.input_dim,
            got: batch.dim(),
        });
    }
    Ok(())
}

/// Accumulates the gradient of one sample's BCE into `out`.
fn accumulate_sample_grad<T: Scalar>(
    layers: &Layers<'_, T>,
    x: &[T],
    y: u8,
    mask: Option<&[T]>,
    z1: &mut [T],
    a: &mut [T],
    out: &mut [T],
) {
    let (d, h) = (layers.d, layers.h);
    let z2 = layers.forward_row(x, mask, z1, a);
    let p = sigmoid(z2);
    let dz2 = p - if y == 1 { T::one() } else { T::zero() };

    let (gw1, rest) = out.split_at_mut(h * d);
    let (gb1, rest) = rest.split_at_mut(h);
    let (gw2, gb2) = rest.split_at_mut(h);
    gb2[0] = gb2[0] + dz2;
    for j in 0..h {
        gw2[j] = gw2[j] + dz2 * a[j];
        if z1[j] <= T::zero() {
            continue;
        }
        let mut dh = dz2 * layers.w2[j];
        if let Some(m) = mask {
            dh = dh * m[j];
        }
        gb1[j] = gb1[j] + dh;
        let row = &mut gw1[j * d..(j + 1) * d];
        for (g, &xi) in row.iter_mut().zip(x) {
            *g = *g + dh * xi;
        }
    }
}

/// Gradient of each sample's own BCE loss, in batch order.
pub fn backward_per_sample<T: Scalar>(
    spec: &ModelSpec,
    params: &ParamVector<T>,
    batch: &Batch<T>,
    mask: Option<&DropoutMask<T>>,
) -> Result<Vec<ParamVector<T>>> {
    check_dim(spec, batch)?;
    check_mask(spec, mask, batch.len())?;
    let layers = Layers::split(spec, params)?;
    let mut z1 = vec![T::zero(); spec.hidden_dim];
    let mut a = vec![T::zero(); spec.hidden_dim];
    Ok((0..batch.len())
        .map(|i| {
            let mut g = params.zeros_like();
            accumulate_sample_grad(
                &layers,
                batch.row(i),
                batch.labels()[i],
                mask.map(|m| m.row(i)),
                &mut z1,
                &mut a,
                g.values_mut(),
            );
            g
        })
        .collect())
}

/// Gradient of the mean batch loss, accumulated in place without
/// materializing per-sample vectors.
pub fn backward_batch<T: Scalar>(
    spec: &ModelSpec,
    params: &ParamVector<T>,
    batch: &Batch<T>,
    mask: Option<&DropoutMask<T>>,
) -> Result<ParamVector<T>> {
    check_dim(spec, batch)?;
    check_mask(spec, mask, batch.len())?;
    let layers = Layers::split(spec, params)?;
    let mut z1 = vec![T::zero(); spec.hidden_dim];
    let mut a = vec![T::zero(); spec.hidden_dim];
    let mut sum = params.zeros_like();
    for i in 0..batch.len() {
        accumulate_sample_grad(
            &layers,
            batch.row(i),
            batch.labels()[i],
            mask.map(|m| m.row(i)),
            &mut z1,
            &mut a,
            sum.values_mut(),
        );
    }
    let n = T::of(batch.len() as f64);
    sum.values_mut().iter_mut().for_each(|v| *v = *v / n);
    Ok(sum)
}

/// Coordinate-wise mean of equally shaped vectors, summed in list order.
pub fn mean_of<T: Scalar>(grads: &[ParamVector<T>]) -> Result<ParamVector<T>> {
    let first = grads.first().ok_or(Error::Empty("no gradients to average"))?;
    let mut sum = first.zeros_like();
    for g in grads {
        sum.add_scaled(g, T::one())?;
    }
    let n = T::of(grads.len() as f64);
    sum.values_mut().iter_mut().for_each(|v| *v = *v / n);
    Ok(sum)
}

pub fn sgd_step<T: Scalar>(params: &ParamVector<T>, grad: &ParamVector<T>, lr: T) -> Result<ParamVector<T>> {
    let mut out = params.clone();
    out.add_scaled(grad, -lr)?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

/// Serializable optimizer hyperparameters; [`OptimizerConfig::build`] makes
/// the stateful optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    #[serde(default = "OptimizerConfig::default_lr")]
    pub learning_rate: f64,
    #[serde(default = "OptimizerConfig::default_beta1")]
    pub beta1: f64,
    #[serde(default = "OptimizerConfig::default_beta2")]
    pub beta2: f64,
    #[serde(default = "OptimizerConfig::default_eps")]
    pub eps: f64,
}

impl OptimizerConfig {
    fn default_lr() -> f64 {
        0.001
    }
    fn default_beta1() -> f64 {
        0.9
    }
    fn default_beta2() -> f64 {
        0.999
    }
    fn default_eps() -> f64 {
        1e-8
    }

    pub fn adam(learning_rate: f64) -> Self {
        Self {
            kind: OptimizerKind::Adam,
            learning_rate,
            ..Self::default()
        }
    }

    pub fn sgd(learning_rate: f64) -> Self {
        Self {
            kind: OptimizerKind::Sgd,
            learning_rate,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument("learning_rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::InvalidArgument("Adam betas must be in [0, 1)".into()));
        }
        if self.eps.is_nan() || self.eps < 0.0 {
            return Err(Error::InvalidArgument("Adam eps must be non-negative".into()));
        }
        Ok(())
    }

    pub fn build<T: Scalar>(&self, param_len: usize) -> OptimizerState<T> {
        let moments = match self.kind {
            OptimizerKind::Adam => vec![T::zero(); param_len],
            OptimizerKind::Sgd => Vec::new(),
        };
        OptimizerState {
            kind: self.kind,
            learning_rate: T::of(self.learning_rate),
            beta1: T::of(self.beta1),
            beta2: T::of(self.beta2),
            eps: T::of(self.eps),
            adam_m: moments.clone(),
            adam_v: moments,
            step_count: 0,
        }
    }
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            kind: OptimizerKind::Adam,
            learning_rate: Self::default_lr(),
            beta1: Self::default_beta1(),
            beta2: Self::default_beta2(),
            eps: Self::default_eps(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<T> {
    pub kind: OptimizerKind,
    pub learning_rate: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    adam_m: Vec<T>,
    adam_v: Vec<T>,
    step_count: u64,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn moments(&self) -> (&[T], &[T]) {
        (&self.adam_m, &self.adam_v)
    }

    /// Applies one update to `params` in place.
    pub fn step(&mut self, params: &mut ParamVector<T>, grad: &ParamVector<T>) -> Result<()> {
        params.check_compatible(grad)?;
        match self.kind {
            OptimizerKind::Sgd => params.add_scaled(grad, -self.learning_rate)?,
            OptimizerKind::Adam => {
                if self.adam_m.len() != params.len() {
                    return Err(Error::DimensionMismatch {
                        expected: self.adam_m.len(),
                        got: params.len(),
                    });
                }
                let t = (self.step_count + 1) as i32;
                let one = T::one();
                let c1 = one - self.beta1.powi(t);
                let c2 = one - self.beta2.powi(t);
                let values = params.values_mut();
                for k in 0..values.len() {
                    let g = grad.values()[k];
                    let m = self.beta1 * self.adam_m[k] + (one - self.beta1) * g;
                    let v = self.beta2 * self.adam_v[k] + (one - self.beta2) * g * g;
                    self.adam_m[k] = m;
                    self.adam_v[k] = v;
                    let m_hat = m / c1;
                    let v_hat = v / c2;
                    values[k] = values[k] - self.learning_rate * m_hat / (v_hat.sqrt() + self.eps);
                }
            }
        }
        self.step_count += 1;
        Ok(())
    }
}

/// Functional Adam update: returns the new parameters and advanced state.
pub fn adam_step<T: Scalar>(
    state: &OptimizerState<T>,
    params: &ParamVector<T>,
    grad: &ParamVector<T>,
) -> Result<(ParamVector<T>, OptimizerState<T>)> {
    if state.kind != OptimizerKind::Adam {
        return Err(Error::InvalidArgument("adam_step called with a non-Adam state".into()));
    }
    let mut next = state.clone();
    let mut out = params.clone();
    next.step(&mut out, grad)?;
    Ok((out, next))
}
