use lspd::baselines::{fit_baseline, BaselineConfig, BaselineKind};
use lspd::depth::DepthScale;
use lspd::multiscale::{fit_with_scales, MultiscaleConfig};
use lspd::simgen::{generate, ExampleId, ExampleSpec};

fn error_rate(pred: &[usize], truth: &[usize]) -> f64 {
    pred.iter().zip(truth).filter(|(a, b)| a != b).count() as f64 / truth.len() as f64
}

#[test]
fn qda_on_normal_location_scale_example() {
    // reference value 11.09%, within 2 points
    let spec = ExampleSpec::new(ExampleId::E3, 5).unwrap();
    let reps = 5;
    let mut total = 0.0;
    for r in 0..reps {
        let train = generate(&spec, 200, 100 + r).unwrap();
        let test = generate(&spec, 2000, 200 + r).unwrap();
        let m = fit_baseline(BaselineKind::Qda, &train, &BaselineConfig::default()).unwrap();
        total += error_rate(&m.predict_batch(test.x()).unwrap(), test.labels());
    }
    let mean = 100.0 * total / reps as f64;
    assert!((mean - 11.09).abs() < 2.0, "QDA mean error {mean:.2}%");
}

#[test]
fn trimodal_example_prefers_small_bandwidths() {
    // Half-Cauchy(100) draws rarely fall below 5, so the risk curve is read off a fixed grid.
    let spec = ExampleSpec::new(ExampleId::E4, 2).unwrap();
    let grid: Vec<DepthScale<f64>> = [0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 50.0, 200.0, 1000.0]
        .into_iter()
        .map(DepthScale::Lspd)
        .collect();
    let seeds = 6u64;
    let mut mean_risk = vec![0.0; grid.len()];
    for s in 0..seeds {
        let train = generate(&spec, 100, 10 + s).unwrap();
        let model = fit_with_scales(&train, &grid, &MultiscaleConfig::default()).unwrap();
        for (m, r) in mean_risk.iter_mut().zip(model.risks()) {
            *m += r / seeds as f64;
        }
    }
    let best = (0..grid.len()).min_by(|&a, &b| mean_risk[a].total_cmp(&mean_risk[b])).unwrap();
    let DepthScale::Lspd(h) = grid[best] else { unreachable!() };
    assert!(h < 5.0, "seed-averaged risks {mean_risk:?}");
}
