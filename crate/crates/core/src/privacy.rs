//! Local differential-privacy mechanisms and their epsilon accounting.
//!
//! * DP-SGD: per-sample clipping plus Gaussian noise on every batch gradient.
//! * DP-SVT: once per round, a site releases only a noisy, thresholded subset
//!   of its (epoch-normalized) weight deltas.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::ParamVector;
use crate::rng;
use crate::scalar::Scalar;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DpSgdConfig {
    pub noise_multiplier: f64,
    pub max_grad_norm: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
}

fn default_delta() -> f64 {
    1e-5
}

impl DpSgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.noise_multiplier >= 0.0 && self.noise_multiplier.is_finite()) {
            return Err(Error::InvalidArgument("noise_multiplier must be >= 0".into()));
        }
        if !(self.max_grad_norm > 0.0) {
            return Err(Error::InvalidArgument("max_grad_norm must be > 0".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidArgument("delta must be in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Threshold budget: explicit, or derived from the query budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ThresholdBudget {
    Value(f64),
    Auto(AutoTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoTag {
    Auto,
}

impl ThresholdBudget {
    pub const AUTO: Self = ThresholdBudget::Auto(AutoTag::Auto);
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvtConfig {
    pub eps1: f64,
    #[serde(default = "auto_budget")]
    pub eps2: ThresholdBudget,
    /// Answer budget; defaults to `eps1`.
    #[serde(default)]
    pub eps3: Option<f64>,
    pub clip: f64,
    pub portion: f64,
    #[serde(default = "yes")]
    pub clipping_enabled: bool,
}

fn auto_budget() -> ThresholdBudget {
    ThresholdBudget::AUTO
}

fn yes() -> bool {
    true
}

impl SvtConfig {
    pub fn new(eps1: f64, clip: f64, portion: f64) -> Self {
        Self {
            eps1,
            eps2: ThresholdBudget::AUTO,
            eps3: None,
            clip,
            portion,
            clipping_enabled: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.eps1) {
            return Err(Error::InvalidArgument("eps1 must be > 0".into()));
        }
        if let ThresholdBudget::Value(v) = self.eps2 {
            if !positive(v) {
                return Err(Error::InvalidArgument("eps2 must be > 0".into()));
            }
        }
        if let Some(v) = self.eps3 {
            if !positive(v) {
                return Err(Error::InvalidArgument("eps3 must be > 0".into()));
            }
        }
        if !positive(self.clip) {
            return Err(Error::InvalidArgument("clip must be > 0".into()));
        }
        if !(self.portion > 0.0 && self.portion <= 1.0) {
            return Err(Error::InvalidArgument("portion must be in (0, 1]".into()));
        }
        Ok(())
    }

    pub fn sensitivity(&self) -> f64 {
        2.0 * self.clip
    }

    pub fn eps3(&self) -> f64 {
        self.eps3.unwrap_or(self.eps1)
    }

    /// Threshold budget for a release quota of `q` weights.
    pub fn eps2(&self, q: usize) -> f64 {
        match self.eps2 {
            ThresholdBudget::Value(v) => v,
            ThresholdBudget::Auto(_) => {
                (2.0 * q as f64 * self.sensitivity()).powf(2.0 / 3.0) * self.eps1
            }
        }
    }
}

/// Number of weights released out of `size`: `ceil(size * portion)`.
pub fn release_quota(size: usize, portion: f64) -> usize {
    // guard against 0.2 * 100 = 20.000000000000004 style round-up
    let raw = size as f64 * portion;
    let q = (raw - 1e-9 * raw.abs().max(1.0)).ceil();
    q.max(0.0) as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DpConfig {
    #[default]
    None,
    DpSgd(DpSgdConfig),
    DpSvt(SvtConfig),
}

impl DpConfig {
    pub fn validate(&self) -> Result<()> {
        match self {
            DpConfig::None => Ok(()),
            DpConfig::DpSgd(c) => c.validate(),
            DpConfig::DpSvt(c) => c.validate(),
        }
    }

    pub fn mechanism(&self) -> Mechanism {
        match self {
            DpConfig::None => Mechanism::None,
            DpConfig::DpSgd(_) => Mechanism::DpSgd,
            DpConfig::DpSvt(_) => Mechanism::DpSvt,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    None,
    DpSgd,
    DpSvt,
}

impl std::fmt::Display for Mechanism {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mechanism::None => "none",
            Mechanism::DpSgd => "dp_sgd",
            Mechanism::DpSvt => "dp_svt",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacySpend {
    pub epsilon: f64,
    pub delta: f64,
    pub mechanism: Mechanism,
    pub steps_or_rounds: u64,
}

impl PrivacySpend {
    pub fn none() -> Self {
        Self {
            epsilon: 0.0,
            delta: 0.0,
            mechanism: Mechanism::None,
            steps_or_rounds: 0,
        }
    }

    /// Spend after `steps` noisy steps (DP-SGD) or `rounds` releases (DP-SVT).
    pub fn for_config(dp: &DpConfig, param_count: usize, steps: u64, rounds: u64) -> Self {
        match dp {
            DpConfig::None => Self::none(),
            DpConfig::DpSgd(c) => Self {
                epsilon: dp_sgd_epsilon(c.noise_multiplier, steps, c.delta),
                delta: c.delta,
                mechanism: Mechanism::DpSgd,
                steps_or_rounds: steps,
            },
            DpConfig::DpSvt(c) => Self {
                epsilon: svt_epsilon(c, param_count, rounds),
                delta: 0.0,
                mechanism: Mechanism::DpSvt,
                steps_or_rounds: rounds,
            },
        }
    }
}

/// Scales `g` onto the L2 ball of radius `gamma`; vectors inside are returned as-is.
pub fn clip_l2<T: Scalar>(g: &ParamVector<T>, gamma: T) -> ParamVector<T> {
    let norm = g.norm_l2();
    if norm <= gamma {
        return g.clone();
    }
    let mut out = g.clone();
    out.scale(gamma / norm);
    out
}

/// Noisy batch gradient: `(sum_i clip(g_i) + N(0, sigma^2 gamma^2 I)) / n`.
pub fn dp_sgd_batch_grad<T: Scalar, R: Rng + ?Sized>(
    per_sample: &[ParamVector<T>],
    cfg: &DpSgdConfig,
    rng: &mut R,
) -> Result<ParamVector<T>> {
    let first = per_sample
        .first()
        .ok_or(Error::Empty("no per-sample gradients"))?;
    let gamma = T::of(cfg.max_grad_norm);
    let mut sum = first.zeros_like();
    for g in per_sample {
        sum.add_scaled(&clip_l2(g, gamma), T::one())?;
    }
    let std = cfg.noise_multiplier * cfg.max_grad_norm;
    let n = T::of(per_sample.len() as f64);
    for v in sum.values_mut() {
        let noise = T::of(std * rng::standard_normal(rng));
        *v = (*v + noise) / n;
    }
    Ok(sum)
}

/// Upper bound on epsilon after `steps` Gaussian-mechanism steps.
///
/// Composes Rényi DP of order `alpha` linearly (no subsampling amplification)
/// and converts to `(eps, delta)`:
/// `eps = T*alpha/(2 sigma^2) + ln(1/delta)/(alpha - 1)`, minimized in closed
/// form at `alpha* = 1 + sigma * sqrt(2 ln(1/delta) / T)`.
pub fn dp_sgd_epsilon(sigma: f64, steps: u64, delta: f64) -> f64 {
    if steps == 0 {
        return 0.0;
    }
    if sigma <= 0.0 {
        return f64::INFINITY;
    }
    let t = steps as f64;
    let log_inv_delta = (1.0 / delta).ln();
    let alpha = 1.0 + sigma * (2.0 * log_inv_delta / t).sqrt();
    t * alpha / (2.0 * sigma * sigma) + log_inv_delta / (alpha - 1.0)
}

/// Per-round budget `eps1 + eps2 + eps3`, composed linearly over `rounds`.
pub fn svt_epsilon(cfg: &SvtConfig, param_count: usize, rounds: u64) -> f64 {
    let q = release_quota(param_count, cfg.portion);
    rounds as f64 * (cfg.eps1 + cfg.eps2(q) + cfg.eps3())
}

/// Sparse set of released weight deltas, indices strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseUpdate<T> {
    pub indices: Vec<usize>,
    pub deltas: Vec<T>,
}

impl<T: Scalar> SparseUpdate<T> {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Dense update releasing every coordinate of `delta`.
    pub fn dense(delta: &ParamVector<T>) -> Self {
        Self {
            indices: (0..delta.len()).collect(),
            deltas: delta.values().to_vec(),
        }
    }
}

/// Selective release of a site's round update with the sparse vector technique.
///
/// `delta_w` is `w_local - w_fed` after `local_epochs` epochs. Candidates are
/// visited in a random order without replacement; the loop stops when `q`
/// answers are released or every coordinate has been queried.
pub fn svt_release<T: Scalar, R: Rng + ?Sized>(
    delta_w: &ParamVector<T>,
    cfg: &SvtConfig,
    local_epochs: usize,
    rng: &mut R,
) -> Result<SparseUpdate<T>> {
    svt_release_traced(delta_w, cfg, local_epochs, rng).map(|(update, _)| update)
}

/// Bookkeeping of one [`svt_release`] call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvtTrace {
    pub quota: usize,
    /// Candidates queried before the quota filled or the pool ran out.
    pub queried: usize,
    pub threshold: f64,
    pub noisy_threshold: f64,
}

/// [`svt_release`] that also reports how far the candidate loop got.
pub fn svt_release_traced<T: Scalar, R: Rng + ?Sized>(
    delta_w: &ParamVector<T>,
    cfg: &SvtConfig,
    local_epochs: usize,
    rng: &mut R,
) -> Result<(SparseUpdate<T>, SvtTrace)> {
    cfg.validate()?;
    if local_epochs == 0 {
        return Err(Error::InvalidArgument("local_epochs must be >= 1".into()));
    }
    let epochs = local_epochs as f64;
    let normalized: Vec<f64> = delta_w.values().iter().map(|v| v.as_f64() / epochs).collect();
    let q = release_quota(normalized.len(), cfg.portion);
    if q == 0 {
        return Err(Error::EmptyReleaseQuota);
    }
    let s = cfg.sensitivity();
    let gamma = cfg.clip;
    let eps2 = cfg.eps2(q);
    let eps3 = cfg.eps3();

    let magnitudes: Vec<f64> = normalized.iter().map(|v| v.abs()).collect();
    let tau = stats::percentile(&magnitudes, cfg.portion);
    let noisy_tau = tau + rng::laplace(rng, s / eps2);
    let query_scale = q as f64 * s / cfg.eps1;
    let answer_scale = q as f64 * s / eps3;

    let mut released: Vec<(usize, f64)> = Vec::with_capacity(q);
    let mut queried = 0;
    for i in rng::permutation(rng, normalized.len()) {
        if released.len() == q {
            break;
        }
        queried += 1;
        let query = magnitudes[i].min(gamma) + rng::laplace(rng, query_scale);
        if query >= noisy_tau {
            let mut answer = normalized[i] + rng::laplace(rng, answer_scale);
            if cfg.clipping_enabled {
                answer = answer.clamp(-gamma, gamma);
            }
            released.push((i, answer * epochs));
        }
    }
    released.sort_by_key(|&(i, _)| i);
    let update = SparseUpdate {
        indices: released.iter().map(|&(i, _)| i).collect(),
        deltas: released.iter().map(|&(_, d)| T::of(d)).collect(),
    };
    let trace = SvtTrace {
        quota: q,
        queried,
        threshold: tau,
        noisy_threshold: noisy_tau,
    };
    Ok((update, trace))
}

/// Server-side merge of sparse site updates.
///
/// Each coordinate moves by the sample-count-weighted mean of the deltas of
/// the sites that released it; coordinates nobody released are untouched.
pub fn apply_sparse_updates<T: Scalar>(
    w_fed: &ParamVector<T>,
    updates: &[(SparseUpdate<T>, usize)],
) -> Result<ParamVector<T>> {
    let len = w_fed.len();
    let mut weighted = vec![T::zero(); len];
    let mut weight = vec![T::zero(); len];
    for (update, count) in updates {
        if update.indices.len() != update.deltas.len() {
            return Err(Error::DimensionMismatch {
                expected: update.indices.len(),
                got: update.deltas.len(),
            });
        }
        let n = T::of(*count as f64);
        for (&k, &d) in update.indices.iter().zip(&update.deltas) {
            if k >= len {
                return Err(Error::IndexOutOfBounds { index: k, len });
            }
            weighted[k] = weighted[k] + n * d;
            weight[k] = weight[k] + n;
        }
    }
    let mut out = w_fed.clone();
    for (k, v) in out.values_mut().iter_mut().enumerate() {
        if weight[k] > T::zero() {
            *v = *v + weighted[k] / weight[k];
        }
    }
    Ok(out)
}
