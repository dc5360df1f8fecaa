use super::*;
use approx::assert_abs_diff_eq;
use ndarray::{array, Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Two overlapping Gaussian clouds in feature space.
fn two_class_features(n: usize, seed: u64, shift: f64) -> (Array2<f64>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = Array2::zeros((n, 2));
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % 2;
        let mu = if c == 0 { shift } else { 0.0 };
        z[[i, 0]] = mu + rng.sample::<f64, _>(StandardNormal);
        z[[i, 1]] = 0.5 * mu + rng.sample::<f64, _>(StandardNormal);
        y.push(c);
    }
    (z, y)
}

/// Plain binary logistic regression by Newton's method with Gaussian
/// elimination, written independently of the multinomial code.
fn logistic_oracle(x: &Array2<f64>, y: &[f64]) -> Vec<f64> {
    let p = x.ncols();
    let mut b = vec![0.0; p];
    for _ in 0..100 {
        let mut g = vec![0.0; p];
        let mut h = vec![vec![0.0; p]; p];
        for (row, &yi) in x.rows().into_iter().zip(y) {
            let eta: f64 = row.iter().zip(&b).map(|(a, c)| a * c).sum();
            let mu = 1.0 / (1.0 + (-eta).exp());
            for a in 0..p {
                g[a] += (yi - mu) * row[a];
                for c in 0..p {
                    h[a][c] += mu * (1.0 - mu) * row[a] * row[c];
                }
            }
        }
        // solve h * step = g
        let mut aug: Vec<Vec<f64>> = h.iter().zip(&g).map(|(r, &gi)| {
            let mut r = r.clone();
            r.push(gi);
            r
        }).collect();
        for col in 0..p {
            let piv = (col..p).max_by(|&i, &j| aug[i][col].abs().partial_cmp(&aug[j][col].abs()).unwrap()).unwrap();
            aug.swap(col, piv);
            for r in 0..p {
                if r != col {
                    let f = aug[r][col] / aug[col][col];
                    for c in col..=p {
                        aug[r][c] -= f * aug[col][c];
                    }
                }
            }
        }
        let step: Vec<f64> = (0..p).map(|i| aug[i][p] / aug[i][i]).collect();
        for (bi, s) in b.iter_mut().zip(&step) {
            *bi += s;
        }
        if step.iter().all(|s| s.abs() < 1e-13) {
            break;
        }
    }
    b
}

#[test]
fn linear_two_class_fit_matches_logistic_oracle() {
    let (z, y) = two_class_features(300, 7, 1.0);
    let cfg = GamConfig { df: 1, lambda: 0.0, newton: NewtonOptions { grad_tol: 1e-10, ..Default::default() } };
    let model = fit_gam(z.view(), &y, &cfg).unwrap();
    assert!(model.converged);
    let mut x = Array2::ones((300, 3));
    x.column_mut(1).assign(&z.column(0));
    x.column_mut(2).assign(&z.column(1));
    // class 0 is the non-reference class
    let yy: Vec<f64> = y.iter().map(|&c| if c == 0 { 1.0 } else { 0.0 }).collect();
    let oracle = logistic_oracle(&x, &yy);
    for (a, b) in model.coefficients.row(0).iter().zip(&oracle) {
        assert_abs_diff_eq!(*a, *b, epsilon = 1e-6);
    }
    // posterior is the sigmoid of the oracle's linear predictor
    let q = array![0.3, -0.7];
    let eta = oracle[0] + oracle[1] * 0.3 + oracle[2] * -0.7;
    let post = model.predict_posterior(q.view()).unwrap();
    assert_abs_diff_eq!(post[0], 1.0 / (1.0 + (-eta).exp()), epsilon = 1e-7);
}

#[test]
fn gradient_matches_central_differences() {
    let (z, _) = two_class_features(120, 3, 1.5);
    let y: Vec<usize> = (0..120).map(|i| i % 3).collect();
    let z3 = ndarray::concatenate![ndarray::Axis(1), z, z.column(0).mapv(|v| v * v).insert_axis(ndarray::Axis(1))];
    let (basis, design) = BasisSpec::from_training(z3.view(), 4).unwrap();
    assert_eq!(basis.width(), 13);
    let obj = PenalizedLikelihood::new(design.view(), &y, 3, 0.01).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let h = 1e-5;
    for _ in 0..5 {
        let beta = Array2::from_shape_fn(obj.param_shape(), |_| 0.5 * rng.sample::<f64, _>(StandardNormal));
        let g = obj.gradient(beta.view());
        for idx in 0..obj.num_params() {
            let (r, c) = (idx / beta.ncols(), idx % beta.ncols());
            let mut plus = beta.clone();
            plus[[r, c]] += h;
            let mut minus = beta.clone();
            minus[[r, c]] -= h;
            let fd = (obj.value(plus.view()) - obj.value(minus.view())) / (2.0 * h);
            let rel = (fd - g[[r, c]]).abs() / g[[r, c]].abs().max(1.0);
            assert!(rel < 1e-4, "param {idx}: fd {fd} analytic {}", g[[r, c]]);
        }
    }
}

#[test]
fn information_matches_gradient_differences() {
    let (z, y) = two_class_features(80, 5, 1.0);
    let (_, design) = BasisSpec::from_training(z.view(), 3).unwrap();
    let obj = PenalizedLikelihood::new(design.view(), &y, 2, 0.1).unwrap();
    let beta = Array2::from_shape_fn(obj.param_shape(), |(_, c)| 0.1 * c as f64 - 0.2);
    let info = obj.information(beta.view());
    let h = 1e-6;
    for idx in 0..obj.num_params() {
        let mut plus = beta.clone();
        plus[[0, idx]] += h;
        let mut minus = beta.clone();
        minus[[0, idx]] -= h;
        let dg = (obj.gradient(plus.view()) - obj.gradient(minus.view())) / (2.0 * h);
        for k in 0..obj.num_params() {
            assert_abs_diff_eq!(-dg[[0, k]], info[[k, idx]], epsilon = 1e-5);
        }
    }
}

#[test]
fn no_signal_posteriors_near_class_proportions() {
    let n = 4000;
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let z = Array2::from_shape_fn((n, 2), |_| rng.random::<f64>());
    let y: Vec<usize> = (0..n).map(|_| usize::from(rng.random::<f64>() < 0.3)).collect();
    let frac1 = y.iter().filter(|&&c| c == 1).count() as f64 / n as f64;
    let model = fit_gam(z.view(), &y, &GamConfig::new(5, 1e-3)).unwrap();
    let mut mean = 0.0;
    for row in z.rows() {
        let p = model.predict_posterior(row).unwrap();
        assert!((p[1] - frac1).abs() < 0.1, "posterior {} vs {}", p[1], frac1);
        mean += p[1] / n as f64;
    }
    // unpenalized intercept: fitted probabilities average to the class share
    assert_abs_diff_eq!(mean, frac1, epsilon = 1e-6);
    let center = model.predict_posterior(array![0.5, 0.5].view()).unwrap();
    assert!((center[1] - frac1).abs() < 0.05);
}

#[test]
fn zero_coefficients_give_uniform_posterior() {
    let basis = BasisSpec { features: vec![FeatureBasis::Linear; 3] };
    let model = GamModel {
        basis,
        coefficients: Array2::zeros((2, 4)),
        num_classes: 3,
        df: 1,
        lambda: 0.0,
        iterations: 0,
        converged: true,
    };
    let p = predict_posterior(&model, array![0.1, 0.5, 0.9].view()).unwrap();
    for v in p.iter() {
        assert_abs_diff_eq!(*v, 1.0 / 3.0, epsilon = 1e-15);
    }
    assert_eq!(classify(&model, array![0.1, 0.5, 0.9].view()).unwrap(), 0);
    assert!(matches!(model.predict_posterior(array![0.1].view()), Err(Error::Shape { .. })));
}

#[test]
fn argmax_ties_and_monotone_invariance() {
    assert_eq!(argmax(array![0.2, 0.8].view()), 1);
    assert_eq!(argmax(array![0.5, 0.5].view()), 0);
    let p = array![0.1, 0.6, 0.3];
    assert_eq!(argmax(p.view()), argmax(p.mapv(|v: f64| v.ln() * 3.0 + 2.0).view()));
}

#[test]
fn posteriors_sum_to_one() {
    let (z, y) = two_class_features(200, 9, 2.0);
    let model = fit_gam(z.view(), &y, &GamConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let q = Array1::from_shape_fn(2, |_| 4.0 * rng.sample::<f64, _>(StandardNormal));
        let p = model.predict_posterior(q.view()).unwrap();
        assert!(p.iter().all(|&v| v > 0.0));
        assert_abs_diff_eq!(p.sum(), 1.0, epsilon = 1e-12);
    }
}

#[test]
fn objective_never_decreases() {
    let (z, y) = two_class_features(150, 2, 3.0);
    let (_, design) = BasisSpec::from_training(z.view(), 5).unwrap();
    let obj = PenalizedLikelihood::new(design.view(), &y, 2, 1e-3).unwrap();
    let fit = newton_maximize(&obj, NewtonOptions::default()).unwrap();
    for w in fit.trace.windows(2) {
        assert!(w[1] >= w[0]);
    }
}

#[test]
fn separable_data_stays_finite_with_ridge() {
    let z = array![[0.0f64, 1.0], [0.1, 0.9], [0.2, 0.8], [0.8, 0.2], [0.9, 0.1], [1.0, 0.0]];
    let y = vec![0, 0, 0, 1, 1, 1];
    let model = fit_gam(z.view(), &y, &GamConfig::new(1, 1e-3)).unwrap();
    assert!(model.coefficients.iter().all(|c| c.is_finite()));
    assert_eq!(model.classify(array![0.05, 0.95].view()).unwrap(), 0);
    assert_eq!(model.classify(array![0.95, 0.05].view()).unwrap(), 1);
}

#[test]
fn fit_is_deterministic() {
    let (z, y) = two_class_features(200, 13, 1.0);
    let a = fit_gam(z.view(), &y, &GamConfig::default()).unwrap();
    let b = fit_gam(z.view(), &y, &GamConfig::default()).unwrap();
    for (x, w) in a.coefficients.iter().zip(b.coefficients.iter()) {
        assert_abs_diff_eq!(*x, *w, epsilon = 1e-10);
    }
}

#[test]
fn relabeling_permutes_posteriors() {
    let n = 300;
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let y: Vec<usize> = (0..n).map(|i| i % 3).collect();
    let z = Array2::from_shape_fn((n, 3), |(i, j)| {
        let c = y[i];
        let mu = if c == j { 1.0 } else { 0.0 };
        mu + rng.sample::<f64, _>(StandardNormal)
    });
    let cfg = GamConfig { df: 3, lambda: 0.0, newton: NewtonOptions { grad_tol: 1e-10, ..Default::default() } };
    let base = fit_gam(z.view(), &y, &cfg).unwrap();
    // permutation: old class c becomes perm[c]; feature columns follow their classes
    let perm = [2usize, 0, 1];
    let y2: Vec<usize> = y.iter().map(|&c| perm[c]).collect();
    let mut z2 = Array2::zeros((n, 3));
    for c in 0..3 {
        z2.column_mut(perm[c]).assign(&z.column(c));
    }
    let permuted = fit_gam(z2.view(), &y2, &cfg).unwrap();
    for i in (0..n).step_by(7) {
        let p = base.predict_posterior(z.row(i)).unwrap();
        let q = permuted.predict_posterior(z2.row(i)).unwrap();
        for c in 0..3 {
            assert_abs_diff_eq!(p[c], q[perm[c]], epsilon = 1e-6);
        }
    }
}

#[test]
fn posterior_is_locally_lipschitz() {
    let (z, y) = two_class_features(200, 19, 1.5);
    let model = fit_gam(z.view(), &y, &GamConfig::default()).unwrap();
    let eps = 1e-7;
    for row in z.rows().into_iter().take(40) {
        let p = model.predict_posterior(row).unwrap();
        let shifted = row.mapv(|v| v + eps);
        let q = model.predict_posterior(shifted.view()).unwrap();
        assert!((p[0] - q[0]).abs() < 1e-4);
    }
}

#[test]
fn input_validation() {
    let (z, mut y) = two_class_features(50, 1, 1.0);
    y.iter_mut().for_each(|c| *c = 0);
    assert!(matches!(fit_gam(z.view(), &y, &GamConfig::default()), Err(Error::InvalidLabels(_))));
    let small = z.slice(ndarray::s![..5, ..]).to_owned();
    assert!(matches!(
        fit_gam(small.view(), &[0, 1, 0, 1, 0], &GamConfig::default()),
        Err(Error::InsufficientData(_))
    ));
}

#[test]
fn record_round_trip() {
    let (z, y) = two_class_features(200, 23, 1.0);
    let model = fit_gam(z.view(), &y, &GamConfig::default()).unwrap();
    let text = model.to_record();
    assert!(text.starts_with("gamodel v1 J=2 df=5 lambda=1e-3\n"));
    let back = GamModel::<f64>::from_record(&text).unwrap();
    assert_eq!(back, model);
    assert!(GamModel::<f64>::from_record("gamodel v2 J=2 df=1 lambda=0").is_err());
}

#[test]
fn works_in_single_precision() {
    let (z, y) = two_class_features(200, 29, 2.0);
    let z32 = z.mapv(|v| v as f32);
    let model = fit_gam(z32.view(), &y, &GamConfig::<f32>::new(3, 1e-3)).unwrap();
    let errs = z32
        .rows()
        .into_iter()
        .zip(&y)
        .filter(|(r, &c)| model.classify(*r).unwrap() != c)
        .count();
    assert!(errs < 60);
}

#[test]
fn spline_fit_is_invariant_to_feature_scale() {
    // high-dimensional LSPD values can sit near 1e-300; the fit must not notice
    let (z, y) = two_class_features(150, 31, 1.5);
    let z = z.mapv(|v| v.abs() + 0.1);
    let tiny = z.mapv(|v| v * 1e-300);
    let cfg = GamConfig::default();
    let a = fit_gam(z.view(), &y, &cfg).unwrap();
    let b = fit_gam(tiny.view(), &y, &cfg).unwrap();
    for (ra, rb) in z.rows().into_iter().zip(tiny.rows()) {
        let pa = a.predict_posterior(ra).unwrap();
        let pb = b.predict_posterior(rb).unwrap();
        assert_abs_diff_eq!(pa[0], pb[0], epsilon = 1e-8);
    }
}

#[test]
fn subnormal_ranges_fall_back_to_linear_terms() {
    let v = Array1::from_iter((0..20).map(|i| i as f64 * 1e-320));
    assert!(matches!(build_basis(v.view(), 5), Err(Error::DegenerateFeature(_))));
}
