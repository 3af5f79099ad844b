//! Simulated server plus K sites: FedAvg aggregation, FedProx local
//! regularization, the round/epoch schedule and client-drift logging.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics;
use crate::nn::{self, Batch, DropoutMask, ModelSpec, OptimizerConfig, OptimizerState, ParamVector};
use crate::privacy::{self, DpConfig, PrivacySpend, SparseUpdate};
use crate::rng::{self, purpose};
use crate::scalar::Scalar;

pub const DEFAULT_BATCH_SIZE: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Strategy {
    FedAvg,
    FedProx { mu: f64 },
}

impl Strategy {
    pub fn mu(&self) -> f64 {
        match self {
            Strategy::FedAvg => 0.0,
            Strategy::FedProx { mu } => *mu,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::FedAvg => "fedavg",
            Strategy::FedProx { .. } => "fedprox",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FederationConfig {
    pub rounds: usize,
    pub local_epochs: usize,
    pub strategy: Strategy,
    pub batch_size: usize,
    pub optimizer: OptimizerConfig,
    pub dp: DpConfig,
}

impl FederationConfig {
    pub fn new(rounds: usize, local_epochs: usize) -> Self {
        Self {
            rounds,
            local_epochs,
            strategy: Strategy::FedAvg,
            batch_size: DEFAULT_BATCH_SIZE,
            optimizer: OptimizerConfig::default(),
            dp: DpConfig::None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::InvalidArgument("rounds must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be >= 1".into()));
        }
        let mu = self.strategy.mu();
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(Error::InvalidArgument(format!("mu must be >= 0, got {mu}")));
        }
        self.optimizer.validate()?;
        self.dp.validate()
    }
}

/// One simulated hospital.
#[derive(Debug, Clone)]
pub struct SiteState<T> {
    pub site_id: usize,
    pub data: Batch<T>,
    pub params: ParamVector<T>,
    pub sample_count: usize,
    /// Root of this site's random streams; per-round streams derive from it.
    pub rng_seed: u64,
    /// Local optimizer; created on first use and kept across rounds.
    pub optimizer: Option<OptimizerState<T>>,
}

impl<T: Scalar> SiteState<T> {
    pub fn new(site_id: usize, data: Batch<T>, spec: &ModelSpec, master_seed: u64) -> Self {
        Self {
            site_id,
            sample_count: data.len(),
            data,
            params: ParamVector::zeros(spec.layer_shapes()),
            rng_seed: rng::derive_seed(master_seed, &[site_id as u64]),
            optimizer: None,
        }
    }
}

/// Drift trace of one site in one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteRoundLog {
    pub site_id: usize,
    /// `||w_site - w_fed||_2` at epoch 0 (always 0) and after each epoch.
    pub l2_drift: Vec<f64>,
    pub steps: u64,
    /// Number of coordinates released under DP-SVT, if used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub released: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundLog {
    pub round: usize,
    pub sites: Vec<SiteRoundLog>,
    pub auroc: f64,
    pub auprc: f64,
    pub privacy: PrivacySpend,
}

#[derive(Debug, Clone)]
pub struct FederationOutcome<T> {
    pub params: ParamVector<T>,
    pub rounds: Vec<RoundLog>,
    pub privacy: PrivacySpend,
}

/// Sample-count-weighted mean of site parameters, summed in list order.
pub fn fed_avg<T: Scalar>(site_params: &[ParamVector<T>], sample_counts: &[usize]) -> Result<ParamVector<T>> {
    let first = site_params.first().ok_or(Error::Empty("no site parameters"))?;
    if site_params.len() != sample_counts.len() {
        return Err(Error::DimensionMismatch {
            expected: site_params.len(),
            got: sample_counts.len(),
        });
    }
    if sample_counts.contains(&0) {
        return Err(Error::InvalidArgument("sample counts must be >= 1".into()));
    }
    let total: usize = sample_counts.iter().sum();
    let total = T::of(total as f64);
    let mut out = first.zeros_like();
    for (w, &n) in site_params.iter().zip(sample_counts) {
        out.add_scaled(w, T::of(n as f64) / total)?;
    }
    Ok(out)
}

/// `(mu / 2) * ||w_site - w_fed||^2`
pub fn fedprox_penalty<T: Scalar>(w_site: &ParamVector<T>, w_fed: &ParamVector<T>, mu: T) -> Result<T> {
    let d = w_site.distance_l2(w_fed)?;
    Ok(mu / T::of(2.0) * d * d)
}

/// Gradient of [`fedprox_penalty`] with respect to `w_site`.
pub fn fedprox_grad_term<T: Scalar>(
    w_site: &ParamVector<T>,
    w_fed: &ParamVector<T>,
    mu: T,
) -> Result<ParamVector<T>> {
    let mut diff = w_site.sub(w_fed)?;
    diff.scale(mu);
    Ok(diff)
}

/// Trains `site` for `cfg.local_epochs` epochs starting from `w_fed`.
///
/// The FedProx anchor is `w_fed` for the whole round. Returns the trained
/// weights (also stored in `site.params`) and the drift trace.
pub fn local_train<T: Scalar>(
    site: &mut SiteState<T>,
    w_fed: &ParamVector<T>,
    cfg: &FederationConfig,
    spec: &ModelSpec,
    round: usize,
) -> Result<(ParamVector<T>, SiteRoundLog)> {
    if site.data.is_empty() {
        return Err(Error::Empty("site has no data"));
    }
    let mut params = w_fed.clone();
    let optimizer = site
        .optimizer
        .get_or_insert_with(|| cfg.optimizer.build(params.len()));
    let mut train_rng = rng::derived_stream(site.rng_seed, &[purpose::TRAIN, round as u64]);
    let mut noise_rng = rng::derived_stream(site.rng_seed, &[purpose::DP_NOISE, round as u64]);
    let prox_mu = match cfg.strategy {
        Strategy::FedProx { mu } => Some(T::of(mu)),
        Strategy::FedAvg => None,
    };

    let mut drift = Vec::with_capacity(cfg.local_epochs + 1);
    drift.push(0.0);
    let mut steps = 0u64;
    for _ in 0..cfg.local_epochs {
        let order = rng::permutation(&mut train_rng, site.data.len());
        for chunk in order.chunks(cfg.batch_size) {
            let batch = site.data.gather(chunk)?;
            let mask = (spec.dropout_p > 0.0)
                .then(|| DropoutMask::sample(spec, batch.len(), &mut train_rng));
            let mut grad = match &cfg.dp {
                DpConfig::DpSgd(dp) => {
                    let per_sample = nn::backward_per_sample(spec, &params, &batch, mask.as_ref())?;
                    privacy::dp_sgd_batch_grad(&per_sample, dp, &mut noise_rng)?
                }
                _ => nn::backward_batch(spec, &params, &batch, mask.as_ref())?,
            };
            if let Some(mu) = prox_mu {
                grad.add_scaled(&fedprox_grad_term(&params, w_fed, mu)?, T::one())?;
            }
            optimizer.step(&mut params, &grad)?;
            steps += 1;
        }
        drift.push(params.distance_l2(w_fed)?.as_f64());
    }
    site.params = params.clone();
    Ok((
        params,
        SiteRoundLog {
            site_id: site.site_id,
            l2_drift: drift,
            steps,
            released: None,
        },
    ))
}

fn evaluate<T: Scalar>(spec: &ModelSpec, params: &ParamVector<T>, holdout: &Batch<T>) -> Result<(f64, f64)> {
    let probs = nn::forward(spec, params, holdout.features(), None)?;
    Ok((
        metrics::auroc(&probs, holdout.labels())?,
        metrics::auprc(&probs, holdout.labels())?,
    ))
}

/// Runs `cfg.rounds` rounds of broadcast, local training, optional DP-SVT
/// release and aggregation. Initial weights come from `master_seed`.
pub fn run_federation<T: Scalar>(
    sites: &mut [SiteState<T>],
    cfg: &FederationConfig,
    holdout: &Batch<T>,
    spec: &ModelSpec,
    master_seed: u64,
) -> Result<FederationOutcome<T>> {
    cfg.validate()?;
    spec.validate()?;
    if sites.is_empty() {
        return Err(Error::Empty("federation needs at least one site"));
    }
    if holdout.is_empty() {
        return Err(Error::Empty("holdout set is empty"));
    }
    let mut w_fed: ParamVector<T> = nn::init_params(spec, master_seed)?;
    let param_count = w_fed.len();
    let mut rounds = Vec::with_capacity(cfg.rounds);
    let mut max_steps = 0u64;

    for round in 0..cfg.rounds {
        // Sites are independent; results come back in slice order.
        let mut results = sites
            .par_iter_mut()
            .map(|site| local_train(site, &w_fed, cfg, spec, round).map(|(w, log)| (site.site_id, site.sample_count, site.rng_seed, w, log)))
            .collect::<Result<Vec<_>>>()?;
        results.sort_by_key(|r| r.0);

        w_fed = match &cfg.dp {
            DpConfig::DpSvt(svt) if cfg.local_epochs > 0 => {
                let mut updates = Vec::with_capacity(results.len());
                for (_, count, seed, w, log) in results.iter_mut() {
                    let delta = w.sub(&w_fed)?;
                    let mut svt_rng = rng::derived_stream(*seed, &[purpose::SVT, round as u64]);
                    let update = privacy::svt_release(&delta, svt, cfg.local_epochs, &mut svt_rng)?;
                    log.released = Some(update.len());
                    updates.push((update, *count));
                }
                privacy::apply_sparse_updates(&w_fed, &updates)?
            }
            DpConfig::DpSvt(_) => w_fed.clone(),
            _ => {
                let params: Vec<_> = results.iter().map(|r| r.3.clone()).collect();
                let counts: Vec<_> = results.iter().map(|r| r.1).collect();
                fed_avg(&params, &counts)?
            }
        };

        max_steps += results.iter().map(|r| r.4.steps).max().unwrap_or(0);
        let (auroc, auprc) = evaluate(spec, &w_fed, holdout)?;
        rounds.push(RoundLog {
            round,
            sites: results.into_iter().map(|r| r.4).collect(),
            auroc,
            auprc,
            privacy: PrivacySpend::for_config(&cfg.dp, param_count, max_steps, round as u64 + 1),
        });
    }
    let privacy = rounds
        .last()
        .map(|r| r.privacy)
        .unwrap_or_else(PrivacySpend::none);
    Ok(FederationOutcome {
        params: w_fed,
        rounds,
        privacy,
    })
}

/// Non-federated training on one site's data with the same round/epoch
/// schedule, seeds and logging as [`run_federation`].
///
/// The strategy is ignored (there is no server to be proximal to) and DP-SVT
/// is skipped since nothing is released; DP-SGD still applies.
pub fn baseline_train<T: Scalar>(
    site: &mut SiteState<T>,
    cfg: &FederationConfig,
    holdout: &Batch<T>,
    spec: &ModelSpec,
    master_seed: u64,
) -> Result<FederationOutcome<T>> {
    let mut cfg = *cfg;
    cfg.strategy = Strategy::FedAvg;
    if matches!(cfg.dp, DpConfig::DpSvt(_)) {
        cfg.dp = DpConfig::None;
    }
    cfg.validate()?;
    spec.validate()?;
    if holdout.is_empty() {
        return Err(Error::Empty("holdout set is empty"));
    }
    let mut params: ParamVector<T> = nn::init_params(spec, master_seed)?;
    let param_count = params.len();
    let mut rounds = Vec::with_capacity(cfg.rounds);
    let mut steps = 0u64;
    for round in 0..cfg.rounds {
        let (next, log) = local_train(site, &params, &cfg, spec, round)?;
        params = next;
        steps += log.steps;
        let (auroc, auprc) = evaluate(spec, &params, holdout)?;
        rounds.push(RoundLog {
            round,
            sites: vec![log],
            auroc,
            auprc,
            privacy: PrivacySpend::for_config(&cfg.dp, param_count, steps, round as u64 + 1),
        });
    }
    let privacy = rounds
        .last()
        .map(|r| r.privacy)
        .unwrap_or_else(PrivacySpend::none);
    Ok(FederationOutcome {
        params,
        rounds,
        privacy,
    })
}

/// Dense update used when a site shares everything; handy for comparing the
/// sparse merge against [`fed_avg`].
pub fn dense_update<T: Scalar>(w_site: &ParamVector<T>, w_fed: &ParamVector<T>) -> Result<SparseUpdate<T>> {
    Ok(SparseUpdate::dense(&w_site.sub(w_fed)?))
}
