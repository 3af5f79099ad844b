mod common;

use common::*;
use fedsim_core::federation::fed_avg;
use fedsim_core::metrics::{auprc, auroc, bootstrap, bootstrap_with};
use fedsim_core::privacy::clip_l2;
use fedsim_core::rng;
use rand::Rng;

#[test]
fn fed_avg_matches_weighted_mean() {
    let mut r = rng::stream(11);
    for _ in 0..300 {
        let k = r.random_range(1..=6);
        let len = r.random_range(1..=40);
        let sites: Vec<_> = (0..k).map(|_| random_vector(&mut r, len, 3.0)).collect();
        let counts: Vec<usize> = (0..k).map(|_| r.random_range(1..=1000)).collect();
        let got = fed_avg(&sites, &counts).unwrap();
        let total: usize = counts.iter().sum();
        for j in 0..len {
            let want: f64 = sites
                .iter()
                .zip(&counts)
                .map(|(w, &n)| n as f64 * w.values()[j])
                .sum::<f64>()
                / total as f64;
            assert!((got.values()[j] - want).abs() <= 1e-12, "coord {j}");
        }
    }
}

#[test]
fn auroc_matches_pair_counting() {
    let mut r = rng::stream(12);
    for case in 0..500 {
        let n = r.random_range(2..=200);
        let (s, y) = random_scored(&mut r, n, case % 2 == 0);
        assert_eq!(auroc(&s, &y).unwrap(), auroc_pairs(&s, &y), "case {case}");
    }
}

#[test]
fn auprc_matches_curve_integration() {
    let mut r = rng::stream(13);
    for case in 0..500 {
        let n = r.random_range(2..=200);
        let (s, y) = random_scored(&mut r, n, case % 2 == 1);
        assert_eq!(auprc(&s, &y).unwrap(), ap_curve(&s, &y), "case {case}");
    }
}

#[test]
fn clip_bound_on_random_vectors() {
    let mut r = rng::stream(14);
    for _ in 0..10_000 {
        let len = r.random_range(1..=64);
        let scale = 10f64.powf(rng::uniform(&mut r, -4.0, 3.0));
        let gamma = 10f64.powf(rng::uniform(&mut r, -3.0, 1.0));
        let g = random_vector(&mut r, len, scale);
        let c = clip_l2(&g, gamma);
        assert!(c.norm_l2() <= gamma + 1e-12);
        if g.norm_l2() <= gamma {
            assert_eq!(c, g);
        } else {
            // direction preserved
            let cos = g.values().iter().zip(c.values()).map(|(a, b)| a * b).sum::<f64>()
                / (g.norm_l2() * c.norm_l2());
            assert!((cos - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn uninformative_scores_give_chance_auroc() {
    let ds = fedsim_core::datagen::generate_synthetic::<f64>(2000, 10, 0.3, 0.0, 3).unwrap();
    // any fixed projection of label-independent features
    let scores: Vec<f64> = (0..ds.len()).map(|i| ds.data.row(i).iter().sum()).collect();
    let a = auroc(&scores, ds.data.labels()).unwrap();
    assert!((a - 0.5).abs() < 0.05, "{a}");
}

#[test]
fn random_scores_give_prevalence_ap() {
    let mut r = rng::stream(15);
    let n = 20_000;
    let labels: Vec<u8> = (0..n).map(|_| u8::from(r.random::<f64>() < 0.2)).collect();
    let scores: Vec<f64> = (0..n).map(|_| r.random()).collect();
    let pi = labels.iter().filter(|&&y| y == 1).count() as f64 / n as f64;
    let ap = auprc(&scores, &labels).unwrap();
    assert!((ap - pi).abs() < 0.02, "ap {ap} vs prevalence {pi}");
}

#[test]
fn bootstrap_mean_tracks_point_estimate() {
    let mut r = rng::stream(16);
    let n = 500;
    let labels: Vec<u8> = (0..n).map(|_| u8::from(r.random::<f64>() < 0.3)).collect();
    let scores: Vec<f64> = labels
        .iter()
        .map(|&y| y as f64 + 1.2 * rng::standard_normal(&mut r))
        .collect();
    let rep = bootstrap(&scores, &labels, 2000, 99).unwrap();
    assert!((rep.bootstrap_mean_auroc - rep.auroc).abs() < 0.02);
    assert!((rep.bootstrap_mean_auprc - rep.auprc).abs() < 0.02);
    assert!(rep.auroc_ci.0 <= rep.auroc && rep.auroc <= rep.auroc_ci.1);
    assert!(rep.auprc_ci.0 < rep.auprc_ci.1);
    assert_eq!(rep.skipped, 0);

    let again = bootstrap(&scores, &labels, 2000, 99).unwrap();
    assert_eq!(rep, again);
}

#[test]
fn identity_resamples_collapse_interval() {
    let mut r = rng::stream(17);
    let (s, y) = random_scored(&mut r, 80, false);
    let rep = bootstrap_with(&s, &y, 50, |_| (0..80).collect()).unwrap();
    assert_eq!(rep.auroc_ci, (rep.auroc, rep.auroc));
    assert!((rep.bootstrap_mean_auprc - rep.auprc).abs() < 1e-12);
}
