use super::*;
use approx::assert_abs_diff_eq;
use ndarray::array;
use rand_distr::StandardNormal;

/// N(0, I) against N(shift·1, scale²·I), `n` points per class.
fn two_gaussians(n: usize, d: usize, shift: f64, scale: f64, seed: u64) -> LabeledDataset<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Array2::zeros((2 * n, d));
    let mut y = Vec::with_capacity(2 * n);
    for i in 0..2 * n {
        let c = usize::from(i >= n);
        for k in 0..d {
            let z: f64 = rng.sample(StandardNormal);
            x[[i, k]] = if c == 0 { z } else { shift + scale * z };
        }
        y.push(c);
    }
    LabeledDataset::new(x, y, 2).unwrap()
}

fn quick_cfg(m: usize, seed: u64) -> MultiscaleConfig<f64> {
    MultiscaleConfig { m, seed, gam: GamConfig::new(3, 1e-3), ..Default::default() }
}

#[test]
fn quantile_identity_and_clamp() {
    assert_abs_diff_eq!(bandwidth_from_uniform(0.75, 100.0), 100.0, epsilon = 1e-9);
    assert_abs_diff_eq!(bandwidth_from_uniform(0.25, 3.0), 3.0, epsilon = 1e-12);
    assert_eq!(bandwidth_from_uniform(0.5, 100.0), MIN_BANDWIDTH);
    assert_eq!(bandwidth_from_uniform(0.0, 100.0), MAX_BANDWIDTH);
    assert_eq!(bandwidth_from_uniform(1.0 - 1e-16, 100.0), MAX_BANDWIDTH);
}

#[test]
fn bandwidth_draws_are_seeded() {
    let a: Vec<f64> = sample_bandwidths(50, 100.0, 9).unwrap();
    let b: Vec<f64> = sample_bandwidths(50, 100.0, 9).unwrap();
    assert_eq!(a.iter().map(|h| h.to_bits()).collect::<Vec<_>>(), b.iter().map(|h| h.to_bits()).collect::<Vec<_>>());
    assert_ne!(a, sample_bandwidths::<f64>(50, 100.0, 10).unwrap());
    assert!(a.iter().all(|&h| (MIN_BANDWIDTH..=MAX_BANDWIDTH).contains(&h)));
    assert!(matches!(sample_bandwidths::<f64>(0, 100.0, 1), Err(Error::InvalidParameter(_))));
    assert!(matches!(sample_bandwidths::<f64>(3, -1.0, 1), Err(Error::InvalidParameter(_))));
}

#[test]
fn half_cauchy_median_is_the_scale() {
    let mut h: Vec<f64> = sample_bandwidths(100_000, 100.0, 3).unwrap();
    h.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = 0.5 * (h[49_999] + h[50_000]);
    assert!((90.0..=110.0).contains(&median), "median {median}");
}

#[test]
fn weight_formula() {
    let w = compute_weights(&[0.1, 0.2], 100).unwrap();
    assert_abs_diff_eq!(w[0], 1.0, epsilon = 0.0);
    assert_abs_diff_eq!(w[1], (-50.0f64 / 9.0).exp(), epsilon = 1e-15);
    assert_abs_diff_eq!(w[1], 0.003866, epsilon = 5e-7);
    assert_eq!(compute_weights(&[0.3, 0.3, 0.3], 50).unwrap(), vec![1.0; 3]);
    assert!(matches!(compute_weights::<f64>(&[], 10), Err(Error::InvalidParameter(_))));
    assert!(matches!(compute_weights(&[1.5], 10), Err(Error::InvalidParameter(_))));
}

#[test]
fn weights_with_zero_best_risk_stay_defined() {
    let w = compute_weights(&[0.0, 0.01, 0.5], 100).unwrap();
    assert_eq!(w[0], 1.0);
    // var floor 1/(4n): exponent −½·n·Δ²·4n
    assert_abs_diff_eq!(w[1], (-2.0f64 * 100.0 * 100.0 * 1e-4).exp(), epsilon = 1e-15);
    assert!(w[2] >= 0.0 && w[2] < 1e-100);
    let all_wrong = compute_weights(&[1.0, 1.0], 10).unwrap();
    assert_eq!(all_wrong, vec![1.0, 1.0]);
}

#[test]
fn weights_decrease_with_risk() {
    let risks: Vec<f64> = (0..20).map(|i| 0.05 + 0.02 * i as f64).collect();
    let w = compute_weights(&risks, 200).unwrap();
    assert!(w.windows(2).all(|p| p[0] >= p[1]));
}

#[test]
fn hand_aggregation() {
    let posts = vec![array![0.9, 0.1], array![0.2, 0.8]];
    let (label, agg) = aggregate_posteriors(&posts, &[1.0, 0.5]).unwrap();
    assert_eq!(label, 0);
    assert_abs_diff_eq!(agg[0], 1.0 / 1.5, epsilon = 1e-15);
    assert_abs_diff_eq!(agg[1], 0.5 / 1.5, epsilon = 1e-15);
    for c in [1e-6, 0.3, 7.0, 1e9] {
        let (l, a) = aggregate_posteriors(&posts, &[c, 0.5 * c]).unwrap();
        assert_eq!(l, label);
        assert_abs_diff_eq!(a[0], agg[0], epsilon = 1e-12);
    }
    let same = vec![array![0.3, 0.7]; 4];
    assert_eq!(aggregate_posteriors(&same, &[0.1, 1.0, 0.5, 0.2]).unwrap().0, 1);
    let tie = vec![array![0.5, 0.5]];
    assert_eq!(aggregate_posteriors(&tie, &[1.0]).unwrap().0, 0);
}

#[test]
fn cv_mode_names() {
    assert_eq!("loo-features".parse::<CvMode>().unwrap(), CvMode::LooFeatures);
    assert_eq!("kfold".parse::<CvMode>().unwrap(), CvMode::KFold(10));
    assert_eq!("kfold:5".parse::<CvMode>().unwrap(), CvMode::KFold(5));
    assert_eq!(CvMode::KFold(10).to_string(), "kfold");
    assert_eq!(CvMode::KFold(4).to_string(), "kfold:4");
    assert!("kfold:1".parse::<CvMode>().is_err());
}

#[test]
fn separable_classes_have_small_risk() {
    let train = two_gaussians(60, 3, 6.0, 1.0, 1);
    let r = cv_risk(1.0, &train, &quick_cfg(1, 0)).unwrap();
    assert!(r < 0.05, "risk {r}");
}

#[test]
fn coin_flip_labels_have_risk_near_half() {
    let mut total = 0.0;
    for seed in 0..6 {
        let mut data = two_gaussians(50, 2, 0.0, 1.0, 100 + seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels: Vec<usize> = (0..data.len()).map(|_| usize::from(rng.random::<bool>())).collect();
        data = LabeledDataset::new(data.x().to_owned(), labels, 2).unwrap();
        total += cv_risk(2.0, &data, &quick_cfg(1, 0)).unwrap();
    }
    let mean = total / 6.0;
    assert!((mean - 0.5).abs() < 0.1, "mean risk {mean}");
}

#[test]
fn single_bandwidth_ensemble_matches_single_scale_classifier() {
    let train = two_gaussians(40, 2, 1.0, 2.0, 5);
    let test = two_gaussians(30, 2, 1.0, 2.0, 6);
    let cfg = quick_cfg(1, 77);
    let multi = fit_multiscale(&train, &cfg).unwrap();
    let h = multi.bandwidths()[0].unwrap();
    assert_eq!(h, sample_bandwidths::<f64>(1, 100.0, 77).unwrap()[0]);
    let single = fit_single_scale(&train, DepthScale::Lspd(h), &cfg).unwrap();
    assert_eq!(multi.weights(), vec![1.0]);
    assert_eq!(multi.predict_batch(test.x()).unwrap(), single.predict_batch(test.x()).unwrap());
}

#[test]
fn fitting_is_deterministic() {
    let train = two_gaussians(30, 2, 1.0, 2.0, 8);
    let a = fit_multiscale(&train, &quick_cfg(6, 4)).unwrap();
    let b = fit_multiscale(&train, &quick_cfg(6, 4)).unwrap();
    assert_eq!(a.weights(), b.weights());
    assert_eq!(a.risks(), b.risks());
    assert_eq!(a.summary(), b.summary());
    let w = a.weights();
    assert!(w.iter().all(|&v| v > 0.0 && v <= 1.0));
    assert!(w.iter().any(|&v| v == 1.0));
    assert_eq!(a.best_scale().weight, 1.0);
}

#[test]
fn summary_lists_every_scale() {
    let train = two_gaussians(25, 2, 2.0, 1.0, 2);
    let m = fit_multiscale(&train, &quick_cfg(4, 1)).unwrap();
    let s = m.summary();
    assert!(s.starts_with("multiscale model: M=4 cauchy_scale=100 cv=loo-features fit=loo n=50\n"), "{s}");
    assert_eq!(s.lines().count(), 6);
}

#[test]
fn spd_scale_classifier() {
    let train = two_gaussians(50, 3, 0.0, 3.0, 12);
    let test = two_gaussians(100, 3, 0.0, 3.0, 13);
    let m = fit_single_scale(&train, DepthScale::Spd, &quick_cfg(1, 0)).unwrap();
    let pred = m.predict_batch(test.x()).unwrap();
    let err = pred.iter().zip(test.labels()).filter(|(a, b)| a != b).count() as f64 / test.len() as f64;
    // scale difference is visible to depth; chance level is 0.5
    assert!(err < 0.3, "error {err}");
    let (_, post) = m.classify(test.row(0)).unwrap();
    assert_abs_diff_eq!(post.sum(), 1.0, epsilon = 1e-12);
    assert!(matches!(m.classify(array![0.0].view()), Err(Error::Shape { .. })));
}

#[test]
fn kfold_agrees_with_loo_features() {
    let train = two_gaussians(100, 5, 1.0, 2.0, 21);
    let loo = cv_risk(10.0, &train, &quick_cfg(1, 0)).unwrap();
    let cfg = MultiscaleConfig { cv_mode: CvMode::KFold(10), ..quick_cfg(1, 0) };
    let kf = cv_risk(10.0, &train, &cfg).unwrap();
    assert!((loo - kf).abs() < 0.05, "loo {loo} kfold {kf}");
}

#[test]
fn tiny_classes_are_rejected() {
    let x = array![[0.0], [1.0], [2.0], [3.0], [4.0]];
    let data = LabeledDataset::new(x, vec![0, 0, 0, 0, 1], 2).unwrap();
    assert!(matches!(cv_risk(1.0, &data, &quick_cfg(1, 0)), Err(Error::InsufficientData(_))));
    assert!(matches!(cv_risk(0.0, &data, &quick_cfg(1, 0)), Err(Error::InvalidParameter(_))));
}

#[test]
fn log_weights_stay_finite_where_weights_underflow() {
    let lw = log_weights(&[0.1f64, 0.2], 100).unwrap();
    assert_abs_diff_eq!(lw[1], -50.0 / 9.0, epsilon = 1e-12);
    let lw = log_weights(&[0.0f64, 0.5], 100_000).unwrap();
    let w = compute_weights(&[0.0f64, 0.5], 100_000).unwrap();
    assert_eq!(w, vec![1.0, 0.0]);
    assert!(lw[1].is_finite() && lw[1] < -700.0);
}
