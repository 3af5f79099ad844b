use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::ExperimentConfig;
use super::store::{ResultsStore, RoundSummary, RunKind, RunRecord, RunStatus};
use crate::datagen::{self, Dataset, ScenarioSplit};
use crate::error::{Error, Result};
use crate::federation::{self, FederationConfig, FederationOutcome, SiteState, Strategy};
use crate::metrics;
use crate::nn::{self, ModelSpec};
use crate::privacy::DpConfig;
use crate::rng::{self, purpose};

/// One cell of the parametric grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Scenario {
    pub split: ScenarioSplit,
    pub rounds: usize,
    pub epochs: usize,
    pub strategy: Strategy,
    pub dp: DpConfig,
}

impl Scenario {
    pub fn describe(&self) -> String {
        let strategy = match self.strategy {
            Strategy::FedAvg => "fedavg".to_string(),
            Strategy::FedProx { mu } => format!("fedprox mu={mu}"),
        };
        let dp = match self.dp {
            DpConfig::None => "no-dp".to_string(),
            DpConfig::DpSgd(c) => format!("dp_sgd sigma={} gamma={}", c.noise_multiplier, c.max_grad_norm),
            DpConfig::DpSvt(c) => format!(
                "dp_svt eps1={} Q={} clip={}{}",
                c.eps1,
                c.portion,
                c.clip,
                if c.clipping_enabled { "" } else { " unclipped" }
            ),
        };
        format!(
            "{} | R{}/E{} | {strategy} | {dp}",
            self.split.label(),
            self.rounds,
            self.epochs
        )
    }
}

/// Which runs a sweep executes per (cell, seed).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunSelection {
    /// Federated run plus both site baselines and the pooled reference.
    All,
    FederatedOnly,
}

#[derive(Debug, Clone, Copy)]
pub struct Job {
    pub scenario: Scenario,
    pub seed: u64,
    pub kind: RunKind,
}

/// Grid cells in a fixed order: split, then (R, E), strategy, DP setting.
pub fn scenarios(cfg: &ExperimentConfig) -> Vec<Scenario> {
    let mut out = Vec::new();
    for split in cfg.splits.cells() {
        for &(rounds, epochs) in &cfg.re_configs {
            for strategy in cfg.strategy_cells() {
                for dp in cfg.dp.cells() {
                    out.push(Scenario {
                        split,
                        rounds,
                        epochs,
                        strategy,
                        dp,
                    });
                }
            }
        }
    }
    out
}

pub fn jobs(cfg: &ExperimentConfig, selection: RunSelection) -> Vec<Job> {
    let kinds: &[RunKind] = match (selection, cfg.baselines) {
        (RunSelection::All, true) => &[
            RunKind::Federated,
            RunKind::BaselineSite1,
            RunKind::BaselineSite2,
            RunKind::Pooled,
        ],
        _ => &[RunKind::Federated],
    };
    let mut out = Vec::new();
    for scenario in scenarios(cfg) {
        for &seed in &cfg.seeds {
            for &kind in kinds {
                out.push(Job { scenario, seed, kind });
            }
        }
    }
    out
}

/// Stable identifier of a run: hash of everything that determines its result.
pub fn run_id(cfg: &ExperimentConfig, job: &Job) -> String {
    let key = serde_json::json!({
        "data": cfg.data,
        "test_fraction": cfg.test_fraction,
        "model": cfg.model,
        "batch_size": cfg.batch_size,
        "optimizer": cfg.optimizer,
        "bootstrap_resamples": cfg.bootstrap_resamples,
        "scenario": job.scenario,
        "kind": job.kind,
        "seed": job.seed,
    });
    let digest = Sha256::digest(key.to_string().as_bytes());
    hex::encode(&digest[..8])
}

fn federation_config(cfg: &ExperimentConfig, s: &Scenario) -> FederationConfig {
    FederationConfig {
        rounds: s.rounds,
        local_epochs: s.epochs,
        strategy: s.strategy,
        batch_size: cfg.batch_size,
        optimizer: cfg.optimizer,
        dp: s.dp,
    }
}

fn execute(
    cfg: &ExperimentConfig,
    dataset: &Dataset<f64>,
    job: &Job,
) -> Result<(FederationOutcome<f64>, metrics::MetricReport)> {
    let scenario = &job.scenario;
    let seed = job.seed;
    let (train, test) = datagen::holdout_split(dataset, cfg.test_fraction, seed)?;
    let (site1, site2) = scenario.split.apply(&train, seed)?;
    let spec: ModelSpec = cfg.model.spec(dataset.dim());
    let fcfg = federation_config(cfg, scenario);
    let plain = FederationConfig {
        strategy: Strategy::FedAvg,
        dp: DpConfig::None,
        ..fcfg
    };

    let outcome = match job.kind {
        RunKind::Federated => {
            let mut sites = vec![
                SiteState::new(0, site1.data, &spec, seed),
                SiteState::new(1, site2.data, &spec, seed),
            ];
            federation::run_federation(&mut sites, &fcfg, &test.data, &spec, seed)?
        }
        RunKind::BaselineSite1 => {
            let mut site = SiteState::new(0, site1.data, &spec, seed);
            federation::baseline_train(&mut site, &plain, &test.data, &spec, seed)?
        }
        RunKind::BaselineSite2 => {
            let mut site = SiteState::new(1, site2.data, &spec, seed);
            federation::baseline_train(&mut site, &plain, &test.data, &spec, seed)?
        }
        RunKind::Pooled => {
            let mut site = SiteState::new(0, train.data, &spec, seed);
            federation::baseline_train(&mut site, &plain, &test.data, &spec, seed)?
        }
    };
    let probs = nn::forward(&spec, &outcome.params, test.data.features(), None)?;
    let boot_seed = rng::derive_seed(seed, &[purpose::BOOTSTRAP]);
    let report = metrics::bootstrap(&probs, test.data.labels(), cfg.bootstrap_resamples, boot_seed)?;
    Ok((outcome, report))
}

/// Runs one job; failures become records with `status: failed`.
pub fn run_job(cfg: &ExperimentConfig, dataset: &Dataset<f64>, job: &Job) -> RunRecord {
    let started = Instant::now();
    let result = execute(cfg, dataset, job);
    let s = &job.scenario;
    let mut record = RunRecord {
        run_id: run_id(cfg, job),
        scenario: s.describe(),
        kind: job.kind,
        status: RunStatus::Ok,
        error: None,
        split_mode: s.split.mode,
        split_fraction: s.split.fraction,
        strategy: s.strategy.name().to_string(),
        mu: s.strategy.mu(),
        dp: s.dp,
        mechanism: s.dp.mechanism(),
        rounds: s.rounds,
        epochs: s.epochs,
        seed: job.seed,
        auroc: 0.0,
        auprc: 0.0,
        auroc_ci: (0.0, 0.0),
        auprc_ci: (0.0, 0.0),
        bootstrap_mean_auroc: 0.0,
        bootstrap_mean_auprc: 0.0,
        resamples: cfg.bootstrap_resamples,
        skipped_resamples: 0,
        epsilon: 0.0,
        delta: 0.0,
        per_round: Vec::new(),
        wall_clock_ms: 0,
    };
    match result {
        Ok((outcome, report)) => {
            record.auroc = report.auroc;
            record.auprc = report.auprc;
            record.auroc_ci = report.auroc_ci;
            record.auprc_ci = report.auprc_ci;
            record.bootstrap_mean_auroc = report.bootstrap_mean_auroc;
            record.bootstrap_mean_auprc = report.bootstrap_mean_auprc;
            record.skipped_resamples = report.skipped;
            record.epsilon = outcome.privacy.epsilon;
            record.delta = outcome.privacy.delta;
            record.mechanism = outcome.privacy.mechanism;
            record.per_round = outcome
                .rounds
                .into_iter()
                .map(|r| RoundSummary {
                    round: r.round,
                    auroc: r.auroc,
                    auprc: r.auprc,
                    epsilon: r.privacy.epsilon,
                    sites: r.sites,
                })
                .collect();
        }
        Err(e) => {
            record.status = RunStatus::Failed;
            record.error = Some(e.to_string());
        }
    }
    record.wall_clock_ms = started.elapsed().as_millis() as u64;
    record
}

/// Executes the grid, appending each batch of finished runs to `store`.
///
/// Up to `cfg.workers` runs execute concurrently; records are appended in job
/// order regardless of completion order.
pub fn run_sweep_with(
    cfg: &ExperimentConfig,
    store: Option<&ResultsStore>,
    selection: RunSelection,
) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    let dataset = cfg.load_dataset()?;
    let jobs = jobs(cfg, selection);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?;
    let mut records = Vec::with_capacity(jobs.len());
    for chunk in jobs.chunks(cfg.workers) {
        let done: Vec<RunRecord> = pool.install(|| {
            chunk
                .par_iter()
                .map(|job| run_job(cfg, &dataset, job))
                .collect()
        });
        if let Some(store) = store {
            store.append(&done)?;
        }
        records.extend(done);
    }
    Ok(records)
}

pub fn run_sweep(cfg: &ExperimentConfig, store: Option<&ResultsStore>) -> Result<Vec<RunRecord>> {
    run_sweep_with(cfg, store, RunSelection::All)
}
