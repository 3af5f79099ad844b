#![allow(dead_code)]

use fedsim_core::nn::{Batch, LayerShape, ModelSpec, ParamVector};
use fedsim_core::rng::{self, Stream};
use rand::Rng;

/// Pair-counting AUROC: each (positive, negative) pair scores 2 for a win,
/// 1 for a tie.
pub fn auroc_pairs(scores: &[f64], labels: &[u8]) -> f64 {
    let mut halves: u64 = 0;
    let (mut p, mut n) = (0u64, 0u64);
    for (i, &yi) in labels.iter().enumerate() {
        if yi == 1 {
            p += 1;
        } else {
            n += 1;
            continue;
        }
        for (j, &yj) in labels.iter().enumerate() {
            if yj == 0 {
                halves += if scores[i] > scores[j] {
                    2
                } else if scores[i] == scores[j] {
                    1
                } else {
                    0
                };
            }
        }
    }
    (halves as f64 / 2.0) / (p as f64 * n as f64)
}

/// Step-wise PR-curve integral, recomputing each point from scratch at every
/// distinct threshold (scores >= t predicted positive).
pub fn ap_curve(scores: &[f64], labels: &[u8]) -> f64 {
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let total = labels.iter().filter(|&&y| y == 1).count() as f64;
    let mut prev_recall = 0.0;
    let mut area = 0.0;
    for t in thresholds {
        let tp = scores.iter().zip(labels).filter(|(&s, &y)| s >= t && y == 1).count();
        let fp = scores.iter().zip(labels).filter(|(&s, &y)| s >= t && y == 0).count();
        let recall = tp as f64 / total;
        let precision = tp as f64 / (tp + fp) as f64;
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    area
}

/// Scores with both classes present; `ties` quantizes scores to force
/// tied groups.
pub fn random_scored(r: &mut Stream, n: usize, ties: bool) -> (Vec<f64>, Vec<u8>) {
    loop {
        let labels: Vec<u8> = (0..n).map(|_| u8::from(r.random::<f64>() < 0.3)).collect();
        if labels.contains(&0) && labels.contains(&1) {
            let scores = (0..n)
                .map(|_| {
                    let s: f64 = r.random();
                    if ties {
                        (s * 8.0).floor() / 8.0
                    } else {
                        s
                    }
                })
                .collect();
            return (scores, labels);
        }
    }
}

pub fn flat(values: Vec<f64>) -> ParamVector<f64> {
    let n = values.len();
    ParamVector::new(values, vec![LayerShape { rows: n, cols: 0 }]).unwrap()
}

pub fn random_vector(r: &mut Stream, len: usize, scale: f64) -> ParamVector<f64> {
    flat((0..len).map(|_| scale * rng::standard_normal(r)).collect())
}

pub fn random_batch(r: &mut Stream, n: usize, d: usize) -> Batch<f64> {
    let features = (0..n * d).map(|_| rng::standard_normal(r)).collect();
    let labels = (0..n).map(|_| u8::from(r.random::<bool>())).collect();
    Batch::new(features, d, labels).unwrap()
}

pub fn random_params(r: &mut Stream, spec: &ModelSpec, scale: f64) -> ParamVector<f64> {
    let values = (0..spec.param_count()).map(|_| rng::uniform(r, -scale, scale)).collect();
    ParamVector::new(values, spec.layer_shapes()).unwrap()
}

/// Two-site scenario small enough for exhaustive equivalence checks.
pub fn tiny_sites(seed: u64) -> (Batch<f64>, Batch<f64>, Batch<f64>) {
    let ds = fedsim_core::datagen::generate_synthetic::<f64>(240, 5, 0.25, 1.5, seed).unwrap();
    let (train, test) = fedsim_core::datagen::holdout_split(&ds, 0.25, seed).unwrap();
    let (a, b) = fedsim_core::datagen::split_homogeneous(&train, 0.5, seed).unwrap();
    (a.data, b.data, test.data)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}
