//! Repeated train/test experiments and their reports.
//!
//! Seeds: repetition `r` uses `rep_seed(master, r)`; within a repetition the
//! training draw, test draw, bandwidth draw and random split use
//! `sub_seed(rep, 1..=4)`. Both are SplitMix64 outputs, so any port with the
//! same mixer reproduces the streams.

use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand_distr::StandardNormal;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::baselines::{fit_baseline, BaselineConfig, BaselineKind};
use crate::dataset::LabeledDataset;
use crate::depth::{hdlss_lspd_limits, hdlss_spd_limits, DepthReference, DepthScale, HdlssParams, KernelSpec};
use crate::numerics::Whitener;
use crate::error::{Error, Result};
use crate::multiscale::{fit_multiscale, fit_single_scale, MultiscaleConfig};
use crate::simgen::{bayes_label, generate, ExampleId, ExampleSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClassifierKind {
    Spd,
    Lspd,
    Lda,
    Qda,
    Knn,
    Kde,
    Bayes,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 7] = [
        ClassifierKind::Spd,
        ClassifierKind::Lspd,
        ClassifierKind::Lda,
        ClassifierKind::Qda,
        ClassifierKind::Knn,
        ClassifierKind::Kde,
        ClassifierKind::Bayes,
    ];

    /// Parses a comma-separated list such as `SPD,LSPD,LDA`.
    pub fn parse_list(s: &str) -> Result<Vec<ClassifierKind>> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let k: ClassifierKind = part.parse()?;
            if !out.contains(&k) {
                out.push(k);
            }
        }
        Ok(out)
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ClassifierKind::Spd => "SPD",
            ClassifierKind::Lspd => "LSPD",
            ClassifierKind::Lda => "LDA",
            ClassifierKind::Qda => "QDA",
            ClassifierKind::Knn => "KNN",
            ClassifierKind::Kde => "KDE",
            ClassifierKind::Bayes => "BAYES",
        };
        f.write_str(s)
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "SPD" => Ok(ClassifierKind::Spd),
            "LSPD" => Ok(ClassifierKind::Lspd),
            "BAYES" => Ok(ClassifierKind::Bayes),
            other => other
                .parse::<BaselineKind>()
                .map(|b| match b {
                    BaselineKind::Lda => ClassifierKind::Lda,
                    BaselineKind::Qda => ClassifierKind::Qda,
                    BaselineKind::Knn => ClassifierKind::Knn,
                    BaselineKind::Kde => ClassifierKind::Kde,
                })
                .map_err(|_| Error::InvalidParameter(format!("unknown classifier '{s}'"))),
        }
    }
}

/// Where observations come from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Simulated(ExampleSpec),
    /// A fixed table split at random each repetition, or evaluated on a fixed test table.
    Table { name: String, data: LabeledDataset<f64>, test: Option<LabeledDataset<f64>> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub source: DataSource,
    /// Training points per class (simulated sources).
    pub n_train: usize,
    /// Test points per class (simulated sources).
    pub n_test: usize,
    /// Training fraction per class for random splits of a table.
    pub train_frac: f64,
    pub reps: usize,
    pub classifiers: Vec<ClassifierKind>,
    pub seed: u64,
    pub multiscale: MultiscaleConfig<f64>,
    pub baseline: BaselineConfig,
    /// Every repetition reuses the master seed (for reproducibility checks).
    pub fixed_rep_seeds: bool,
}

impl ExperimentConfig {
    pub fn simulated(spec: ExampleSpec) -> Self {
        ExperimentConfig {
            source: DataSource::Simulated(spec),
            n_train: 100,
            n_test: 250,
            train_frac: 0.5,
            reps: 10,
            classifiers: vec![ClassifierKind::Spd, ClassifierKind::Lspd],
            seed: 1,
            multiscale: MultiscaleConfig::default(),
            baseline: BaselineConfig::default(),
            fixed_rep_seeds: false,
        }
    }

    pub fn table(name: &str, data: LabeledDataset<f64>, test: Option<LabeledDataset<f64>>) -> Self {
        ExperimentConfig {
            source: DataSource::Table { name: name.to_string(), data, test },
            ..Self::simulated(ExampleSpec { id: ExampleId::E1, d: 1 })
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps < 1 {
            return Err(Error::InvalidParameter("need at least one repetition".into()));
        }
        if self.classifiers.is_empty() {
            return Err(Error::InvalidParameter("no classifiers requested".into()));
        }
        match &self.source {
            DataSource::Simulated(_) => {
                if self.n_train < 2 || self.n_test < 1 {
                    return Err(Error::InvalidParameter("need n_train ≥ 2 and n_test ≥ 1 per class".into()));
                }
            }
            DataSource::Table { data, test, .. } => {
                if self.classifiers.contains(&ClassifierKind::Bayes) {
                    return Err(Error::InvalidParameter("BAYES needs a simulated source".into()));
                }
                if let Some(t) = test {
                    if t.dim() != data.dim() {
                        return Err(Error::Shape { expected: data.dim(), found: t.dim() });
                    }
                } else if !(self.train_frac > 0.0 && self.train_frac < 1.0) {
                    return Err(Error::InvalidParameter("train fraction must lie in (0, 1)".into()));
                }
            }
        }
        Ok(())
    }

    fn single_split(&self) -> bool {
        matches!(&self.source, DataSource::Table { test: Some(_), .. })
    }

    /// Flat `key=value` description used in report provenance.
    pub fn describe(&self) -> Vec<(String, String)> {
        let mut v: Vec<(String, String)> = Vec::new();
        let mut put = |k: &str, val: String| v.push((k.to_string(), val));
        match &self.source {
            DataSource::Simulated(s) => {
                put("source", "simulated".into());
                put("example", s.id.to_string());
                put("d", s.d.to_string());
                put("n_train", self.n_train.to_string());
                put("n_test", self.n_test.to_string());
                if s.id == ExampleId::E5 {
                    put("e5_shift", "class 2 moved by m1 - m2 + (1/d)1".into());
                }
            }
            DataSource::Table { name, data, test } => {
                put("source", format!("table:{name}"));
                put("d", data.dim().to_string());
                put("n", data.len().to_string());
                match test {
                    Some(t) => put("test", format!("fixed ({} points)", t.len())),
                    None => put("train_frac", self.train_frac.to_string()),
                }
            }
        }
        put("reps", self.reps.to_string());
        put("classifiers", self.classifiers.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(","));
        put("seed", self.seed.to_string());
        put("fixed_rep_seeds", self.fixed_rep_seeds.to_string());
        put("scatter", self.multiscale.scatter.to_string());
        put("M", self.multiscale.m.to_string());
        put("cauchy_scale", self.multiscale.cauchy_scale.to_string());
        put("df", self.multiscale.gam.df.to_string());
        put("lambda", self.multiscale.gam.lambda.to_string());
        put("cv_mode", self.multiscale.cv_mode.to_string());
        put("fit_features", self.multiscale.fit_features.to_string());
        v
    }
}

/// SplitMix64 output for state `x`.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rep_seed(master: u64, rep: usize) -> u64 {
    splitmix64(master ^ splitmix64(rep as u64))
}

pub fn sub_seed(rep_seed: u64, stream: u64) -> u64 {
    splitmix64(rep_seed.wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

/// `e_t = ε_0/ε_t` with `ε_0 = min ε_t`; a zero error scores 1.
pub fn efficiency_scores(errors: &[f64]) -> Result<Vec<f64>> {
    if errors.is_empty() {
        return Err(Error::InvalidParameter("no errors to score".into()));
    }
    if errors.iter().any(|e| !(*e >= 0.0)) {
        return Err(Error::InvalidParameter("errors must be non-negative".into()));
    }
    let best = errors.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(errors.iter().map(|&e| if e == 0.0 { 1.0 } else { best / e }).collect())
}

/// Which standard error a report carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeKind {
    /// Standard deviation over repetitions divided by `√R`.
    RepetitionMean,
    /// `√(ε(1−ε)/n_test)` for a single split.
    Binomial,
}

impl fmt::Display for SeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SeKind::RepetitionMean => f.write_str("sd over repetitions / sqrt(R)"),
            SeKind::Binomial => f.write_str("binomial sqrt(e(1-e)/n_test)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierSummary {
    pub kind: ClassifierKind,
    /// Mean test error in percent, rounded to 4 decimals; `None` if every repetition failed.
    pub mean_error_pct: Option<f64>,
    pub se_pct: Option<f64>,
    pub efficiency: Option<f64>,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub provenance: Vec<(String, String)>,
    pub se_kind: SeKind,
    pub summaries: Vec<ClassifierSummary>,
    /// `raw[r][c]`: error fraction of classifier `c` in repetition `r`.
    pub raw: Vec<Vec<Option<f64>>>,
    pub warnings: Vec<String>,
}

const NA: &str = "NA";

fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

fn opt(v: Option<f64>, prec: usize) -> String {
    v.map_or_else(|| NA.to_string(), |x| format!("{x:.prec$}"))
}

impl ExperimentReport {
    pub fn summary(&self, kind: ClassifierKind) -> Option<&ClassifierSummary> {
        self.summaries.iter().find(|s| s.kind == kind)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("classifier,mean_error_pct,se_pct,efficiency\n");
        for c in &self.summaries {
            let _ = writeln!(s, "{},{},{},{}", c.kind, opt(c.mean_error_pct, 4), opt(c.se_pct, 4), opt(c.efficiency, 4));
        }
        s
    }

    pub fn raw_csv(&self) -> String {
        let mut s = String::from("rep,classifier,error_pct\n");
        for (r, row) in self.raw.iter().enumerate() {
            for (c, e) in self.summaries.iter().zip(row) {
                let _ = writeln!(s, "{},{},{}", r + 1, c.kind, opt(e.map(|v| 100.0 * v), 4));
            }
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# lspd {}", env!("CARGO_PKG_VERSION"));
        for (k, v) in &self.provenance {
            let _ = writeln!(s, "# {k}={v}");
        }
        let _ = writeln!(s, "# standard error: {}", self.se_kind);
        let _ = writeln!(s, "{:<10} {:>10} {:>8} {:>10} {:>8}", "classifier", "error(%)", "se(%)", "efficiency", "failed");
        for c in &self.summaries {
            let _ = writeln!(
                s,
                "{:<10} {:>10} {:>8} {:>10} {:>8}",
                c.kind.to_string(),
                opt(c.mean_error_pct, 2),
                opt(c.se_pct, 2),
                opt(c.efficiency, 4),
                c.failures
            );
        }
        for w in &self.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        s
    }

    /// Writes `report.txt`, `report.csv` and `raw_errors.csv` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.txt"), self.to_text())?;
        std::fs::write(dir.join("report.csv"), self.to_csv())?;
        std::fs::write(dir.join("raw_errors.csv"), self.raw_csv())?;
        Ok(())
    }
}

/// Stratified random split: each class keeps `round(frac·n_j)` training points (at least 2 where possible).
fn stratified_split(data: &LabeledDataset<f64>, frac: f64, seed: u64) -> Result<(LabeledDataset<f64>, LabeledDataset<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for j in 0..data.num_classes() {
        let mut idx: Vec<usize> = (0..data.len()).filter(|&i| data.labels()[i] == j).collect();
        if idx.len() < 2 {
            return Err(Error::InsufficientData(format!("class {} has fewer than 2 observations", data.class_names()[j])));
        }
        idx.shuffle(&mut rng);
        let k = ((frac * idx.len() as f64).round() as usize).clamp(1, idx.len() - 1);
        train.extend_from_slice(&idx[..k]);
        test.extend_from_slice(&idx[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((data.subset(&train), data.subset(&test)))
}

fn error_fraction(pred: &[usize], truth: &[usize]) -> f64 {
    pred.iter().zip(truth).filter(|(a, b)| a != b).count() as f64 / truth.len() as f64
}

struct RepOutcome {
    errors: Vec<Option<f64>>,
    test_size: usize,
    warnings: Vec<String>,
}

fn run_classifier(
    kind: ClassifierKind,
    cfg: &ExperimentConfig,
    train: &LabeledDataset<f64>,
    test: &LabeledDataset<f64>,
    bandwidth_seed: u64,
    warnings: &mut Vec<String>,
) -> Result<f64> {
    let pred = match kind {
        ClassifierKind::Spd => fit_single_scale(train, DepthScale::Spd, &cfg.multiscale)?.predict_batch(test.x())?,
        ClassifierKind::Lspd => {
            let ms = MultiscaleConfig { seed: bandwidth_seed, ..cfg.multiscale.clone() };
            fit_multiscale(train, &ms)?.predict_batch(test.x())?
        }
        ClassifierKind::Bayes => {
            let DataSource::Simulated(spec) = &cfg.source else {
                return Err(Error::InvalidParameter("BAYES needs a simulated source".into()));
            };
            test.x().axis_iter(Axis(0)).map(|x| bayes_label(spec, x)).collect::<Result<Vec<_>>>()?
        }
        other => {
            let b = match other {
                ClassifierKind::Lda => BaselineKind::Lda,
                ClassifierKind::Qda => BaselineKind::Qda,
                ClassifierKind::Knn => BaselineKind::Knn,
                _ => BaselineKind::Kde,
            };
            let fitted = fit_baseline(b, train, &cfg.baseline)?;
            warnings.extend(fitted.warnings.iter().cloned());
            fitted.predict_batch(test.x())?
        }
    };
    Ok(error_fraction(&pred, test.labels()))
}

fn run_rep(cfg: &ExperimentConfig, rep: usize) -> Result<RepOutcome> {
    let rs = if cfg.fixed_rep_seeds { cfg.seed } else { rep_seed(cfg.seed, rep) };
    let (train, test) = match &cfg.source {
        DataSource::Simulated(spec) => (generate(spec, cfg.n_train, sub_seed(rs, 1))?, generate(spec, cfg.n_test, sub_seed(rs, 2))?),
        DataSource::Table { data, test: Some(t), .. } => (data.clone(), t.clone()),
        DataSource::Table { data, test: None, .. } => stratified_split(data, cfg.train_frac, sub_seed(rs, 4))?,
    };
    let mut warnings = Vec::new();
    let errors = cfg
        .classifiers
        .iter()
        .map(|&kind| match run_classifier(kind, cfg, &train, &test, sub_seed(rs, 3), &mut warnings) {
            Ok(e) => Some(e),
            Err(e) => {
                let msg = format!("repetition {}: {kind} failed: {e}", rep + 1);
                log::warn!("{msg}");
                warnings.push(msg);
                None
            }
        })
        .collect();
    Ok(RepOutcome { errors, test_size: test.len(), warnings })
}

/// Runs every repetition (in parallel) and assembles the report in repetition order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let reps = if cfg.single_split() { 1 } else { cfg.reps };
    if cfg.single_split() && cfg.reps > 1 {
        log::info!("fixed test table: running a single split");
    }
    let outcomes = (0..reps).into_par_iter().map(|r| run_rep(cfg, r)).collect::<Result<Vec<_>>>()?;
    let se_kind = if reps == 1 { SeKind::Binomial } else { SeKind::RepetitionMean };
    let test_size = outcomes[0].test_size as f64;
    let mut summaries = Vec::with_capacity(cfg.classifiers.len());
    for (c, &kind) in cfg.classifiers.iter().enumerate() {
        let ok: Vec<f64> = outcomes.iter().filter_map(|o| o.errors[c]).collect();
        let failures = reps - ok.len();
        let (mean, se) = if ok.is_empty() {
            (None, None)
        } else {
            let m = ok.iter().sum::<f64>() / ok.len() as f64;
            let se = match se_kind {
                SeKind::Binomial => (m * (1.0 - m) / test_size).sqrt(),
                SeKind::RepetitionMean if ok.len() > 1 => {
                    let var = ok.iter().map(|e| (e - m) * (e - m)).sum::<f64>() / (ok.len() - 1) as f64;
                    (var / ok.len() as f64).sqrt()
                }
                SeKind::RepetitionMean => 0.0,
            };
            (Some(round4(100.0 * m)), Some(round4(100.0 * se)))
        };
        summaries.push(ClassifierSummary { kind, mean_error_pct: mean, se_pct: se, efficiency: None, failures });
    }
    let scored: Vec<usize> = (0..summaries.len()).filter(|&i| summaries[i].mean_error_pct.is_some()).collect();
    if !scored.is_empty() {
        let errs: Vec<f64> = scored.iter().map(|&i| summaries[i].mean_error_pct.unwrap()).collect();
        for (&i, e) in scored.iter().zip(efficiency_scores(&errs)?) {
            summaries[i].efficiency = Some(round4(e));
        }
    }
    let mut warnings: Vec<String> = outcomes.iter().flat_map(|o| o.warnings.iter().cloned()).collect();
    warnings.dedup();
    Ok(ExperimentReport {
        provenance: cfg.describe(),
        se_kind,
        summaries,
        raw: outcomes.into_iter().map(|o| o.errors).collect(),
        warnings,
    })
}

/// One dimension of an HDLSS sweep: mean depth vector of class-1 queries and its limit.
#[derive(Debug, Clone, PartialEq)]
pub struct HdlssRow {
    pub d: usize,
    /// `None` for SPD, otherwise the LSPD bandwidth `√d/A`.
    pub h: Option<f64>,
    pub empirical: Array1<f64>,
    pub limit: Array1<f64>,
}

fn normal_sample(n: usize, d: usize, sd: f64, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_simple_fn((n, d), || sd * rng.sample::<f64, _>(StandardNormal))
}

/// N(0, I_d) against N(0, 4I_d) with identity whitening: averages the depth
/// vectors of `draws` fresh class-1 points for each `d`. `a_limit = None` uses
/// SPD; `Some(A)` uses LSPD with `h = √d/A` and the unnormalized Gaussian profile.
pub fn hdlss_sweep(dims: &[usize], n_train: usize, draws: usize, a_limit: Option<f64>, seed: u64) -> Result<Vec<HdlssRow>> {
    if n_train < 2 || draws < 1 {
        return Err(Error::InvalidParameter("need n_train ≥ 2 and draws ≥ 1".into()));
    }
    if let Some(a) = a_limit {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidParameter(format!("A must be positive and finite, got {a}")));
        }
    }
    let params = HdlssParams::from_moments(ndarray::array![1.0, 4.0], ndarray::array![0.0, 0.0])?;
    dims.iter()
        .enumerate()
        .map(|(k, &d)| {
            if d < 1 {
                return Err(Error::InvalidParameter("dimension must be positive".into()));
            }
            let s = sub_seed(rep_seed(seed, k), 1);
            let c1 = normal_sample(n_train, d, 1.0, sub_seed(s, 1));
            let c2 = normal_sample(n_train, d, 2.0, sub_seed(s, 2));
            let queries = normal_sample(draws, d, 1.0, sub_seed(s, 3));
            let kernel = KernelSpec::gaussian_profile(d);
            let reference = DepthReference::new(&[c1.view(), c2.view()], &[Whitener::identity(d), Whitener::identity(d)], kernel)?;
            let h = a_limit.map(|a| (d as f64).sqrt() / a);
            let scale = h.map_or(DepthScale::Spd, DepthScale::Lspd);
            let z = reference.feature_matrix(queries.view(), scale)?;
            let empirical = z.mean_axis(Axis(0)).expect("draws ≥ 1");
            let limits = match a_limit {
                None => hdlss_spd_limits(&params),
                Some(a) => hdlss_lspd_limits(&params, a, &kernel)?,
            };
            Ok(HdlssRow { d, h, empirical, limit: limits.row(0).to_owned() })
        })
        .collect()
}
