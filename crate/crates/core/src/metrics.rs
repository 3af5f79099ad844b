//! Ranking metrics for binary classifiers and their bootstrap intervals.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, purpose};
use crate::scalar::Scalar;
use crate::stats;

pub const DEFAULT_RESAMPLES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub auroc: f64,
    pub auprc: f64,
    pub bootstrap_mean_auroc: f64,
    pub bootstrap_mean_auprc: f64,
    pub auroc_ci: (f64, f64),
    pub auprc_ci: (f64, f64),
    pub resamples: usize,
    /// Resamples dropped because they contained a single class.
    pub skipped: usize,
}

fn class_counts(labels: &[u8]) -> (usize, usize) {
    let pos = labels.iter().filter(|&&y| y == 1).count();
    (pos, labels.len() - pos)
}

fn check_lengths<T>(scores: &[T], labels: &[u8]) -> Result<()> {
    if scores.is_empty() {
        return Err(Error::Empty("no scores"));
    }
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            got: labels.len(),
        });
    }
    Ok(())
}

/// Indices sorted by ascending score.
fn ascending_order<T: Scalar>(scores: &[T]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].as_f64().total_cmp(&scores[b].as_f64()));
    idx
}

/// Area under the ROC curve as the Mann-Whitney statistic: the probability a
/// positive outscores a negative, ties counting one half.
pub fn auroc<T: Scalar>(scores: &[T], labels: &[u8]) -> Result<f64> {
    check_lengths(scores, labels)?;
    let (pos, neg) = class_counts(labels);
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass("AUROC needs both classes"));
    }
    let order = ascending_order(scores);
    // Twice the rank-sum of positives, using midranks for ties; stays integral.
    let mut twice_rank_sum: u64 = 0;
    let mut start = 0;
    while start < order.len() {
        let value = scores[order[start]].as_f64();
        let mut end = start + 1;
        while end < order.len() && scores[order[end]].as_f64() == value {
            end += 1;
        }
        // ranks start+1 ..= end, midrank*2 = start + 1 + end
        let twice_midrank = (start + 1 + end) as u64;
        let group_pos = order[start..end].iter().filter(|&&i| labels[i] == 1).count() as u64;
        twice_rank_sum += twice_midrank * group_pos;
        start = end;
    }
    let (p, n) = (pos as u64, neg as u64);
    // U * 2 = 2*R - P(P+1); pairs are counted in halves.
    let twice_u = twice_rank_sum - p * (p + 1);
    Ok((twice_u as f64 / 2.0) / (p as f64 * n as f64))
}

/// Step-wise average precision: `sum_k (R_k - R_{k-1}) * P_k` over descending
/// score thresholds, tied scores forming a single threshold.
pub fn auprc<T: Scalar>(scores: &[T], labels: &[u8]) -> Result<f64> {
    check_lengths(scores, labels)?;
    let (pos, _) = class_counts(labels);
    if pos == 0 {
        return Err(Error::NoPositives);
    }
    let mut order = ascending_order(scores);
    order.reverse();
    let total_pos = pos as f64;
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    let mut start = 0;
    while start < order.len() {
        let value = scores[order[start]].as_f64();
        let mut end = start;
        while end < order.len() && scores[order[end]].as_f64() == value {
            if labels[order[end]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            end += 1;
        }
        let recall = tp as f64 / total_pos;
        let precision = tp as f64 / (tp + fp) as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        start = end;
    }
    Ok(ap)
}

fn resample_metrics<T: Scalar>(scores: &[T], labels: &[u8], indices: &[usize]) -> Option<(f64, f64)> {
    let s: Vec<f64> = indices.iter().map(|&i| scores[i].as_f64()).collect();
    let l: Vec<u8> = indices.iter().map(|&i| labels[i]).collect();
    let (pos, neg) = class_counts(&l);
    if pos == 0 || neg == 0 {
        return None;
    }
    Some((auroc(&s, &l).ok()?, auprc(&s, &l).ok()?))
}

/// Bootstrap with `resamples` draws of `n` indices with replacement.
///
/// Iteration `b` uses its own stream derived from `(seed, b)`, so the report
/// does not depend on how the iterations are scheduled.
pub fn bootstrap<T: Scalar>(scores: &[T], labels: &[u8], resamples: usize, seed: u64) -> Result<MetricReport> {
    let n = scores.len();
    bootstrap_with(scores, labels, resamples, |b| {
        let mut r = rng::derived_stream(seed, &[purpose::BOOTSTRAP, b as u64]);
        (0..n).map(|_| rand::Rng::random_range(&mut r, 0..n)).collect()
    })
}

/// Bootstrap with caller-supplied resample index sets.
pub fn bootstrap_with<T, F>(scores: &[T], labels: &[u8], resamples: usize, resampler: F) -> Result<MetricReport>
where
    T: Scalar,
    F: Fn(usize) -> Vec<usize> + Sync,
{
    check_lengths(scores, labels)?;
    if scores.len() < 2 {
        return Err(Error::InvalidArgument("bootstrap needs n >= 2".into()));
    }
    let point_auroc = auroc(scores, labels)?;
    let point_auprc = auprc(scores, labels)?;
    if resamples == 0 {
        return Err(Error::InvalidArgument("resamples must be >= 1".into()));
    }
    let draws: Vec<Option<(f64, f64)>> = (0..resamples)
        .into_par_iter()
        .map(|b| resample_metrics(scores, labels, &resampler(b)))
        .collect();
    let valid: Vec<(f64, f64)> = draws.into_iter().flatten().collect();
    if valid.is_empty() {
        return Err(Error::DegenerateBootstrap(resamples));
    }
    let rocs: Vec<f64> = valid.iter().map(|v| v.0).collect();
    let prcs: Vec<f64> = valid.iter().map(|v| v.1).collect();
    let ci = |v: &[f64]| (stats::percentile(v, 0.025), stats::percentile(v, 0.975));
    Ok(MetricReport {
        auroc: point_auroc,
        auprc: point_auprc,
        bootstrap_mean_auroc: stats::mean(&rocs),
        bootstrap_mean_auprc: stats::mean(&prcs),
        auroc_ci: ci(&rocs),
        auprc_ci: ci(&prcs),
        resamples,
        skipped: resamples - valid.len(),
    })
}
