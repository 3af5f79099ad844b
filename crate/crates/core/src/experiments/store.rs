use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::datagen::SplitMode;
use crate::error::{Error, Result};
use crate::federation::SiteRoundLog;
use crate::privacy::{DpConfig, Mechanism};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunKind {
    Federated,
    BaselineSite1,
    BaselineSite2,
    Pooled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundSummary {
    pub round: usize,
    pub auroc: f64,
    pub auprc: f64,
    #[serde(with = "epsilon_repr")]
    pub epsilon: f64,
    pub sites: Vec<SiteRoundLog>,
}

/// One completed (or failed) run, stored as one JSON line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub scenario: String,
    pub kind: RunKind,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub split_mode: SplitMode,
    pub split_fraction: f64,
    pub strategy: String,
    pub mu: f64,
    pub dp: DpConfig,
    pub mechanism: Mechanism,
    pub rounds: usize,
    pub epochs: usize,
    pub seed: u64,
    pub auroc: f64,
    pub auprc: f64,
    pub auroc_ci: (f64, f64),
    pub auprc_ci: (f64, f64),
    pub bootstrap_mean_auroc: f64,
    pub bootstrap_mean_auprc: f64,
    pub resamples: usize,
    pub skipped_resamples: usize,
    #[serde(with = "epsilon_repr")]
    pub epsilon: f64,
    pub delta: f64,
    pub per_round: Vec<RoundSummary>,
    pub wall_clock_ms: u64,
}

impl RunRecord {
    pub fn is_ok(&self) -> bool {
        self.status == RunStatus::Ok
    }

    /// Metric fields that must be reproducible for a fixed (config, seed).
    pub fn metric_fingerprint(&self) -> serde_json::Value {
        serde_json::json!({
            "auroc": self.auroc,
            "auprc": self.auprc,
            "auroc_ci": self.auroc_ci,
            "auprc_ci": self.auprc_ci,
            "bootstrap_mean_auroc": self.bootstrap_mean_auroc,
            "bootstrap_mean_auprc": self.bootstrap_mean_auprc,
            "epsilon": epsilon_repr::to_value(self.epsilon),
            "delta": self.delta,
            "per_round": self.per_round,
        })
    }
}

/// JSON has no infinity; unbounded epsilon (sigma = 0) is written as `"inf"`.
pub(crate) mod epsilon_repr {
    use super::*;

    pub fn to_value(v: f64) -> serde_json::Value {
        if v.is_infinite() {
            serde_json::Value::String("inf".into())
        } else {
            serde_json::json!(v)
        }
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("bad epsilon `{t}`"))),
        }
    }
}

/// Append-only JSON-lines file of [`RunRecord`]s.
#[derive(Debug, Clone)]
pub struct ResultsStore {
    path: PathBuf,
}

impl ResultsStore {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self { path: path.into() }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&self, records: &[RunRecord]) -> Result<()> {
        if records.is_empty() {
            return Ok(());
        }
        let mut file = OpenOptions::new().create(true).append(true).open(&self.path)?;
        let mut buf = Vec::new();
        for r in records {
            serde_json::to_writer(&mut buf, r)?;
            buf.push(b'\n');
        }
        file.write_all(&buf)?;
        file.flush()?;
        Ok(())
    }

    /// Reads every record; a missing file is an empty store.
    pub fn load(&self) -> Result<Vec<RunRecord>> {
        let file = match std::fs::File::open(&self.path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e.into()),
        };
        let mut out = Vec::new();
        for (k, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record = serde_json::from_str(&line).map_err(|e| {
                Error::Store(format!("{}:{}: {e}", self.path.display(), k + 1))
            })?;
            out.push(record);
        }
        Ok(out)
    }
}
