//! Synthetic data, CSV ingestion and the two-site splitters.
//!
//! Homogeneous splits vary site sizes while keeping each site's positive rate
//! at the global rate; heterogeneous splits keep site sizes equal and move
//! positives between sites.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Batch;
use crate::rng::{self, purpose};
use crate::scalar::Scalar;

pub const LABEL_COLUMN: &str = "label";

/// Default site-1 fractions, from 50/50 down to 5/95.
pub const DEFAULT_FRACTIONS: [f64; 6] = [0.50, 0.40, 0.30, 0.20, 0.10, 0.05];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Synthetic {
        seed: u64,
        n: usize,
        d: usize,
        positive_rate: f64,
        separation: f64,
    },
    Csv {
        path: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    pub data: Batch<T>,
    pub feature_names: Vec<String>,
    pub provenance: Provenance,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(data: Batch<T>, feature_names: Vec<String>, provenance: Provenance) -> Result<Self> {
        if data.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "a dataset needs at least 2 samples, got {}",
                data.len()
            )));
        }
        if feature_names.len() != data.dim() {
            return Err(Error::DimensionMismatch {
                expected: data.dim(),
                got: feature_names.len(),
            });
        }
        Ok(Self {
            data,
            feature_names,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.data.dim()
    }

    pub fn positives(&self) -> usize {
        self.data.positives()
    }

    pub fn positive_rate(&self) -> f64 {
        self.positives() as f64 / self.len() as f64
    }

    pub fn has_both_classes(&self) -> bool {
        let p = self.positives();
        p > 0 && p < self.len()
    }

    /// Rows at `indices` with the same names and provenance.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        Self::new(
            self.data.gather(indices)?,
            self.feature_names.clone(),
            self.provenance.clone(),
        )
    }

    fn class_indices(&self) -> (Vec<usize>, Vec<usize>) {
        (0..self.len()).partition(|&i| self.data.labels()[i] == 1)
    }
}

fn default_names(d: usize) -> Vec<String> {
    (0..d).map(|j| format!("x{j}")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    Homogeneous,
    Heterogeneous,
}

/// One cell of the data-distribution grid. `fraction` is site 1's share of
/// samples (homogeneous) or of positive labels (heterogeneous).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSplit {
    pub mode: SplitMode,
    pub fraction: f64,
}

impl ScenarioSplit {
    pub fn apply<T: Scalar>(&self, ds: &Dataset<T>, seed: u64) -> Result<(Dataset<T>, Dataset<T>)> {
        match self.mode {
            SplitMode::Homogeneous => split_homogeneous(ds, self.fraction, seed),
            SplitMode::Heterogeneous => split_heterogeneous(ds, self.fraction, seed),
        }
    }

    /// Short label such as `hom 50/50` or `het 5/95`.
    pub fn label(&self) -> String {
        let tag = match self.mode {
            SplitMode::Homogeneous => "hom",
            SplitMode::Heterogeneous => "het",
        };
        let a = (self.fraction * 100.0).round();
        format!("{tag} {a}/{}", 100.0 - a)
    }
}

/// Two isotropic Gaussians at `+-separation * u`, `u = (1, .., 1)/sqrt(d)`.
///
/// Exactly `round(n * positive_rate)` positives, in shuffled order.
pub fn generate_synthetic<T: Scalar>(
    n: usize,
    d: usize,
    positive_rate: f64,
    separation: f64,
    seed: u64,
) -> Result<Dataset<T>> {
    if n < 4 {
        return Err(Error::InvalidArgument(format!("n must be >= 4, got {n}")));
    }
    if d == 0 {
        return Err(Error::InvalidArgument("d must be >= 1".into()));
    }
    if !(positive_rate > 0.0 && positive_rate < 1.0) {
        return Err(Error::InvalidArgument("positive_rate must be in (0, 1)".into()));
    }
    if !(separation >= 0.0 && separation.is_finite()) {
        return Err(Error::InvalidArgument("separation must be >= 0".into()));
    }
    let positives = (n as f64 * positive_rate).round() as usize;
    if positives == 0 || positives == n {
        return Err(Error::InvalidArgument(format!(
            "n={n}, rate={positive_rate} leaves a class empty"
        )));
    }
    let mut r = rng::derived_stream(seed, &[purpose::DATA]);
    let order = rng::permutation(&mut r, n);
    let labels: Vec<u8> = order.iter().map(|&k| u8::from(k < positives)).collect();
    let offset = separation / (d as f64).sqrt();
    let mut features = Vec::with_capacity(n * d);
    for &y in &labels {
        let centre = if y == 1 { offset } else { -offset };
        for _ in 0..d {
            features.push(T::of(centre + rng::standard_normal(&mut r)));
        }
    }
    Dataset::new(
        Batch::new(features, d, labels)?,
        default_names(d),
        Provenance::Synthetic {
            seed,
            n,
            d,
            positive_rate,
            separation,
        },
    )
}

/// Stratified split: site 1 gets `round(n * fraction)` samples at the global
/// positive rate (to within one sample).
pub fn split_homogeneous<T: Scalar>(ds: &Dataset<T>, site1_fraction: f64, seed: u64) -> Result<(Dataset<T>, Dataset<T>)> {
    check_fraction(site1_fraction)?;
    let n = ds.len();
    let n1 = (n as f64 * site1_fraction).round() as usize;
    if n1 < 2 || n - n1 < 2 {
        return Err(Error::InfeasibleSplit(format!(
            "fraction {site1_fraction} of {n} samples leaves a site with fewer than 2"
        )));
    }
    let p = ds.positives();
    let p1 = ((n1 * p) as f64 / n as f64).round() as usize;
    let mut r = rng::derived_stream(seed, &[purpose::SPLIT]);
    two_way(ds, p1, n1 - p1, &mut r)
}

/// Equal-size sites; site 1 receives `round(P * fraction)` of the positives
/// and negatives fill the remaining capacity. Odd `n` gives site 1 the extra sample.
pub fn split_heterogeneous<T: Scalar>(
    ds: &Dataset<T>,
    site1_positive_fraction: f64,
    seed: u64,
) -> Result<(Dataset<T>, Dataset<T>)> {
    check_fraction(site1_positive_fraction)?;
    let n = ds.len();
    let n1 = n.div_ceil(2);
    let n2 = n - n1;
    let p = ds.positives();
    let neg = n - p;
    let p1 = (p as f64 * site1_positive_fraction).round() as usize;
    let p2 = p - p1;
    if p1 > n1 || p2 > n2 {
        return Err(Error::InfeasibleSplit(format!(
            "{p1}/{p2} positives do not fit sites of {n1}/{n2}"
        )));
    }
    let neg1 = n1 - p1;
    debug_assert_eq!(neg1 + (n2 - p2), neg);
    let mut r = rng::derived_stream(seed, &[purpose::SPLIT]);
    two_way(ds, p1, neg1, &mut r)
}

/// Stratified hold-out split; returns `(train, test)`.
pub fn holdout_split<T: Scalar>(ds: &Dataset<T>, test_fraction: f64, seed: u64) -> Result<(Dataset<T>, Dataset<T>)> {
    check_fraction(test_fraction)?;
    let n = ds.len();
    let n_test = (n as f64 * test_fraction).round() as usize;
    if n_test < 2 || n - n_test < 2 {
        return Err(Error::InfeasibleSplit(format!(
            "test fraction {test_fraction} of {n} samples is degenerate"
        )));
    }
    let p = ds.positives();
    let mut p_test = ((n_test * p) as f64 / n as f64).round() as usize;
    // keep both classes in the test set whenever the data allows it
    if p > 0 && p < n {
        p_test = p_test.clamp(1, (n_test - 1).min(p));
    }
    let mut r = rng::derived_stream(seed, &[purpose::SPLIT, 1]);
    let (test, train) = two_way(ds, p_test, n_test - p_test, &mut r)?;
    Ok((train, test))
}

fn check_fraction(f: f64) -> Result<()> {
    if f > 0.0 && f < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("fraction must be in (0, 1), got {f}")))
    }
}

/// Draws `pos1` positives and `neg1` negatives for the first part; the rest
/// form the second. Both parts are returned in shuffled order.
fn two_way<T: Scalar>(
    ds: &Dataset<T>,
    pos1: usize,
    neg1: usize,
    r: &mut rng::Stream,
) -> Result<(Dataset<T>, Dataset<T>)> {
    let (pos, neg) = ds.class_indices();
    if pos1 > pos.len() || neg1 > neg.len() {
        return Err(Error::InfeasibleSplit(format!(
            "need {pos1} positives and {neg1} negatives, have {} and {}",
            pos.len(),
            neg.len()
        )));
    }
    let pos_order = rng::permutation(r, pos.len());
    let neg_order = rng::permutation(r, neg.len());
    let mut first: Vec<usize> = pos_order[..pos1].iter().map(|&k| pos[k]).collect();
    first.extend(neg_order[..neg1].iter().map(|&k| neg[k]));
    let mut second: Vec<usize> = pos_order[pos1..].iter().map(|&k| pos[k]).collect();
    second.extend(neg_order[neg1..].iter().map(|&k| neg[k]));
    let shuffle = |idx: Vec<usize>, r: &mut rng::Stream| -> Vec<usize> {
        rng::permutation(r, idx.len()).into_iter().map(|k| idx[k]).collect()
    };
    let first = shuffle(first, r);
    let second = shuffle(second, r);
    Ok((ds.subset(&first)?, ds.subset(&second)?))
}

/// Reads a header-first CSV with a `label` column in {0, 1}; every other
/// column is a numeric feature. Row order is preserved.
pub fn load_csv<T: Scalar>(path: impl AsRef<Path>) -> Result<Dataset<T>> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let csv_err = |line: u64, msg: String| Error::Csv {
        path: shown.clone(),
        line,
        msg,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(0, e.to_string()))?;
    let headers = reader.headers().map_err(|e| csv_err(1, e.to_string()))?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(csv_err(1, "empty file".into()));
    }
    let label_col = headers
        .iter()
        .position(|h| h == LABEL_COLUMN)
        .ok_or_else(|| csv_err(1, format!("missing `{LABEL_COLUMN}` column")))?;
    let names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != label_col)
        .map(|(_, h)| h.to_string())
        .collect();
    if names.is_empty() {
        return Err(csv_err(1, "no feature columns besides `label`".into()));
    }

    let mut features = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            csv_err(line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        for (j, cell) in record.iter().enumerate() {
            let value: f64 = cell
                .parse()
                .map_err(|_| csv_err(line, format!("column `{}`: `{cell}` is not numeric", &headers[j])))?;
            if j == label_col {
                let y = match value {
                    v if v == 0.0 => 0,
                    v if v == 1.0 => 1,
                    _ => return Err(csv_err(line, format!("label `{cell}` is not 0 or 1"))),
                };
                labels.push(y);
            } else {
                if !value.is_finite() {
                    return Err(csv_err(line, format!("column `{}` is not finite", &headers[j])));
                }
                features.push(T::of(value));
            }
        }
    }
    if labels.is_empty() {
        return Err(csv_err(1, "no data rows".into()));
    }
    let d = names.len();
    Dataset::new(
        Batch::new(features, d, labels)?,
        names,
        Provenance::Csv { path: shown.clone() },
    )
}

/// Writes features followed by a trailing `label` column.
pub fn save_csv<T: Scalar>(ds: &Dataset<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::Csv {
        path: path.display().to_string(),
        line: 0,
        msg: e.to_string(),
    })?;
    let to_err = |e: csv::Error| Error::Csv {
        path: path.display().to_string(),
        line: 0,
        msg: e.to_string(),
    };
    let mut header = ds.feature_names.clone();
    header.push(LABEL_COLUMN.to_string());
    writer.write_record(&header).map_err(to_err)?;
    for i in 0..ds.len() {
        let mut row: Vec<String> = ds.data.row(i).iter().map(|v| v.to_string()).collect();
        row.push(ds.data.labels()[i].to_string());
        writer.write_record(&row).map_err(to_err)?;
    }
    writer.flush()?;
    Ok(())
}
