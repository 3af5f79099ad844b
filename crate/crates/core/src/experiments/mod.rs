//! Configuration-driven parametric sweeps, the JSON-lines results store and
//! CSV/SVG reports.

mod config;
mod report;
mod store;
mod sweep;

pub use config::{
    parse_config, DataSource, DpGrid, ExperimentConfig, ModelConfig, SplitGrid, StrategyGrid,
    SyntheticParams, DEFAULT_EPOCH_BUDGET, DEFAULT_MU_GRID, DEFAULT_RE_CONFIGS,
};
pub use report::{axes_from_records, emit_heatmap, emit_tradeoff, tradeoff_rows, Heatmap, Metric, TradeoffRow};
pub use store::{ResultsStore, RoundSummary, RunKind, RunRecord, RunStatus};
pub use sweep::{jobs, run_id, run_job, run_sweep, run_sweep_with, scenarios, Job, RunSelection, Scenario};
