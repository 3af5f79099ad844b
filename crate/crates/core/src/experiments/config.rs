use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::datagen::{self, Dataset, ScenarioSplit, SplitMode, DEFAULT_FRACTIONS};
use crate::error::{Error, Result};
use crate::federation::{Strategy, DEFAULT_BATCH_SIZE};
use crate::metrics::DEFAULT_RESAMPLES;
use crate::nn::{ModelSpec, OptimizerConfig, DEFAULT_DROPOUT, DEFAULT_HIDDEN};
use crate::privacy::{DpConfig, DpSgdConfig, SvtConfig, ThresholdBudget};

pub const DEFAULT_EPOCH_BUDGET: usize = 64;
pub const DEFAULT_RE_CONFIGS: [(usize, usize); 5] = [(2, 32), (4, 16), (8, 8), (16, 4), (32, 2)];
pub const DEFAULT_MU_GRID: [f64; 4] = [1e-5, 1e-4, 1e-3, 1e-2];
pub const DEFAULT_SIGMA_GRID: [f64; 5] = [0.1, 0.5, 1.0, 2.0, 4.0];
pub const DEFAULT_GAMMA_GRID: [f64; 3] = [0.01, 0.1, 1.0];
pub const DEFAULT_EPS1_GRID: [f64; 3] = [0.01, 0.1, 1.0];
pub const DEFAULT_PORTION_GRID: [f64; 3] = [0.2, 0.35, 0.5];
pub const DEFAULT_SVT_CLIP: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataSource,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default)]
    pub splits: SplitGrid,
    #[serde(default = "default_re_configs")]
    pub re_configs: Vec<(usize, usize)>,
    #[serde(default = "default_epoch_budget")]
    pub accumulated_epochs: usize,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<StrategyGrid>,
    #[serde(default)]
    pub dp: DpGrid,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_resamples")]
    pub bootstrap_resamples: usize,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    /// Also train the two per-site baselines and the pooled-data reference.
    #[serde(default = "yes")]
    pub baselines: bool,
    #[serde(default = "one")]
    pub workers: usize,
}

fn default_test_fraction() -> f64 {
    0.2
}
fn default_re_configs() -> Vec<(usize, usize)> {
    DEFAULT_RE_CONFIGS.to_vec()
}
fn default_epoch_budget() -> usize {
    DEFAULT_EPOCH_BUDGET
}
fn default_strategies() -> Vec<StrategyGrid> {
    vec![StrategyGrid::Fedavg]
}
fn default_seeds() -> Vec<u64> {
    vec![0]
}
fn default_resamples() -> usize {
    DEFAULT_RESAMPLES
}
fn default_batch_size() -> usize {
    DEFAULT_BATCH_SIZE
}
fn yes() -> bool {
    true
}
fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Synthetic(SyntheticParams),
    Csv(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticParams {
    #[serde(default = "SyntheticParams::default_n")]
    pub n: usize,
    #[serde(default = "SyntheticParams::default_d")]
    pub d: usize,
    #[serde(default = "SyntheticParams::default_rate")]
    pub positive_rate: f64,
    #[serde(default = "SyntheticParams::default_separation")]
    pub separation: f64,
    #[serde(default)]
    pub seed: u64,
}

impl SyntheticParams {
    fn default_n() -> usize {
        2000
    }
    fn default_d() -> usize {
        20
    }
    fn default_rate() -> f64 {
        0.1
    }
    fn default_separation() -> f64 {
        1.5
    }
}

impl Default for SyntheticParams {
    fn default() -> Self {
        Self {
            n: Self::default_n(),
            d: Self::default_d(),
            positive_rate: Self::default_rate(),
            separation: Self::default_separation(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitGrid {
    #[serde(default)]
    pub homogeneous: Vec<f64>,
    #[serde(default)]
    pub heterogeneous: Vec<f64>,
}

impl Default for SplitGrid {
    fn default() -> Self {
        Self {
            homogeneous: DEFAULT_FRACTIONS.to_vec(),
            heterogeneous: Vec::new(),
        }
    }
}

impl SplitGrid {
    pub fn cells(&self) -> Vec<ScenarioSplit> {
        let hom = self.homogeneous.iter().map(|&fraction| ScenarioSplit {
            mode: SplitMode::Homogeneous,
            fraction,
        });
        let het = self.heterogeneous.iter().map(|&fraction| ScenarioSplit {
            mode: SplitMode::Heterogeneous,
            fraction,
        });
        hom.chain(het).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StrategyGrid {
    Fedavg,
    Fedprox {
        #[serde(default = "default_mu_grid")]
        mu: Vec<f64>,
    },
}

fn default_mu_grid() -> Vec<f64> {
    DEFAULT_MU_GRID.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DpGrid {
    #[default]
    None,
    DpSgd {
        #[serde(default = "default_sigma_grid")]
        sigma: Vec<f64>,
        #[serde(default = "default_gamma_grid")]
        gamma: Vec<f64>,
        #[serde(default = "default_delta")]
        delta: f64,
    },
    DpSvt {
        #[serde(default = "default_eps1_grid")]
        eps1: Vec<f64>,
        #[serde(default = "default_portion_grid")]
        portion: Vec<f64>,
        #[serde(default = "default_clipping")]
        clipping: Vec<bool>,
        #[serde(default = "default_svt_clip")]
        clip: f64,
        #[serde(default)]
        eps3: Option<f64>,
    },
}

fn default_sigma_grid() -> Vec<f64> {
    DEFAULT_SIGMA_GRID.to_vec()
}
fn default_gamma_grid() -> Vec<f64> {
    DEFAULT_GAMMA_GRID.to_vec()
}
fn default_delta() -> f64 {
    1e-5
}
fn default_eps1_grid() -> Vec<f64> {
    DEFAULT_EPS1_GRID.to_vec()
}
fn default_portion_grid() -> Vec<f64> {
    DEFAULT_PORTION_GRID.to_vec()
}
fn default_clipping() -> Vec<bool> {
    vec![true]
}
fn default_svt_clip() -> f64 {
    DEFAULT_SVT_CLIP
}

impl DpGrid {
    pub fn cells(&self) -> Vec<DpConfig> {
        match self {
            DpGrid::None => vec![DpConfig::None],
            DpGrid::DpSgd { sigma, gamma, delta } => gamma
                .iter()
                .flat_map(|&g| {
                    sigma.iter().map(move |&s| {
                        DpConfig::DpSgd(DpSgdConfig {
                            noise_multiplier: s,
                            max_grad_norm: g,
                            delta: *delta,
                        })
                    })
                })
                .collect(),
            DpGrid::DpSvt {
                eps1,
                portion,
                clipping,
                clip,
                eps3,
            } => {
                let mut out = Vec::new();
                for &e in eps1 {
                    for &q in portion {
                        for &c in clipping {
                            out.push(DpConfig::DpSvt(SvtConfig {
                                eps1: e,
                                eps2: ThresholdBudget::AUTO,
                                eps3: *eps3,
                                clip: *clip,
                                portion: q,
                                clipping_enabled: c,
                            }));
                        }
                    }
                }
                out
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "ModelConfig::default_hidden")]
    pub hidden_dim: usize,
    #[serde(default = "ModelConfig::default_dropout")]
    pub dropout_p: f64,
}

impl ModelConfig {
    fn default_hidden() -> usize {
        DEFAULT_HIDDEN
    }
    fn default_dropout() -> f64 {
        DEFAULT_DROPOUT
    }

    pub fn spec(&self, input_dim: usize) -> ModelSpec {
        ModelSpec {
            input_dim,
            hidden_dim: self.hidden_dim,
            dropout_p: self.dropout_p,
        }
    }
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden_dim: DEFAULT_HIDDEN,
            dropout_p: DEFAULT_DROPOUT,
        }
    }
}

fn config_err(path: impl Into<String>, msg: impl Into<String>) -> Error {
    Error::Config {
        path: path.into(),
        msg: msg.into(),
    }
}

impl ExperimentConfig {
    /// Config over a synthetic dataset with every other field at its default.
    pub fn synthetic(params: SyntheticParams) -> Self {
        Self {
            data: DataSource::Synthetic(params),
            test_fraction: default_test_fraction(),
            splits: SplitGrid::default(),
            re_configs: default_re_configs(),
            accumulated_epochs: DEFAULT_EPOCH_BUDGET,
            strategies: default_strategies(),
            dp: DpGrid::None,
            seeds: default_seeds(),
            bootstrap_resamples: DEFAULT_RESAMPLES,
            model: ModelConfig::default(),
            batch_size: DEFAULT_BATCH_SIZE,
            optimizer: OptimizerConfig::default(),
            baselines: true,
            workers: 1,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            config_err(path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let in_open_unit = |v: f64| v > 0.0 && v < 1.0;
        if let DataSource::Synthetic(s) = &self.data {
            if s.n < 4 || s.d == 0 {
                return Err(config_err("data.synthetic", "need n >= 4 and d >= 1"));
            }
            if !in_open_unit(s.positive_rate) {
                return Err(config_err("data.synthetic.positive_rate", "must be in (0, 1)"));
            }
            if !(s.separation >= 0.0) {
                return Err(config_err("data.synthetic.separation", "must be >= 0"));
            }
        }
        if !in_open_unit(self.test_fraction) {
            return Err(config_err("test_fraction", "must be in (0, 1)"));
        }
        if self.splits.homogeneous.is_empty() && self.splits.heterogeneous.is_empty() {
            return Err(config_err("splits", "grid is empty"));
        }
        for (name, grid) in [
            ("homogeneous", &self.splits.homogeneous),
            ("heterogeneous", &self.splits.heterogeneous),
        ] {
            if let Some(k) = grid.iter().position(|&f| !in_open_unit(f)) {
                return Err(config_err(format!("splits.{name}[{k}]"), "fraction must be in (0, 1)"));
            }
        }
        if self.re_configs.is_empty() {
            return Err(config_err("re_configs", "grid is empty"));
        }
        for (k, &(r, e)) in self.re_configs.iter().enumerate() {
            if r == 0 {
                return Err(config_err(format!("re_configs[{k}]"), "rounds must be >= 1"));
            }
            if r * e != self.accumulated_epochs {
                return Err(config_err(
                    format!("re_configs[{k}]"),
                    format!(
                        "{r} rounds x {e} epochs != accumulated_epochs {}",
                        self.accumulated_epochs
                    ),
                ));
            }
        }
        if self.strategies.is_empty() {
            return Err(config_err("strategies", "grid is empty"));
        }
        for (k, s) in self.strategies.iter().enumerate() {
            if let StrategyGrid::Fedprox { mu } = s {
                if mu.is_empty() {
                    return Err(config_err(format!("strategies[{k}].mu"), "grid is empty"));
                }
                if let Some(j) = mu.iter().position(|&m| !(m >= 0.0 && m.is_finite())) {
                    return Err(config_err(format!("strategies[{k}].mu[{j}]"), "must be >= 0"));
                }
            }
        }
        match &self.dp {
            DpGrid::None => {}
            DpGrid::DpSgd { sigma, gamma, .. } => {
                if sigma.is_empty() || gamma.is_empty() {
                    return Err(config_err("dp", "sigma and gamma grids must be non-empty"));
                }
            }
            DpGrid::DpSvt {
                eps1,
                portion,
                clipping,
                ..
            } => {
                if eps1.is_empty() || portion.is_empty() || clipping.is_empty() {
                    return Err(config_err("dp", "eps1, portion and clipping grids must be non-empty"));
                }
            }
        }
        for (k, dp) in self.dp.cells().iter().enumerate() {
            dp.validate().map_err(|e| config_err(format!("dp[{k}]"), e.to_string()))?;
        }
        if self.seeds.is_empty() {
            return Err(config_err("seeds", "grid is empty"));
        }
        if self.bootstrap_resamples == 0 {
            return Err(config_err("bootstrap_resamples", "must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(config_err("batch_size", "must be >= 1"));
        }
        if self.workers == 0 {
            return Err(config_err("workers", "must be >= 1"));
        }
        self.model
            .spec(1)
            .validate()
            .map_err(|e| config_err("model", e.to_string()))?;
        self.optimizer
            .validate()
            .map_err(|e| config_err("optimizer", e.to_string()))?;
        Ok(())
    }

    pub fn strategy_cells(&self) -> Vec<Strategy> {
        self.strategies
            .iter()
            .flat_map(|s| match s {
                StrategyGrid::Fedavg => vec![Strategy::FedAvg],
                StrategyGrid::Fedprox { mu } => mu.iter().map(|&mu| Strategy::FedProx { mu }).collect(),
            })
            .collect()
    }

    pub fn load_dataset(&self) -> Result<Dataset<f64>> {
        match &self.data {
            DataSource::Synthetic(s) => {
                datagen::generate_synthetic(s.n, s.d, s.positive_rate, s.separation, s.seed)
            }
            DataSource::Csv(path) => datagen::load_csv(path),
        }
    }
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path.as_ref())?;
    ExperimentConfig::from_json(&text)
}
