//! Reference classifiers: LDA, QDA, k-nearest neighbours and kernel density.
//!
//! k-NN and KDE work on data standardized by the pooled within-class scatter.
//! Their tuning parameters minimize the leave-one-out error over fixed grids:
//! odd `k` from 1 up to `√n`, and ten log-spaced bandwidths spanning
//! `[0.1, 10]·n^{−1/(d+4)}`.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;

use crate::dataset::LabeledDataset;
use crate::error::{check_dim, Error, Result};
use crate::gam::argmax;
use crate::linalg::column_means;
use crate::numerics::{estimate_scatter, pooled_covariance, ScatterMode, ScatterPolicy, Whitener};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaselineKind {
    Lda,
    Qda,
    Knn,
    Kde,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 4] = [BaselineKind::Lda, BaselineKind::Qda, BaselineKind::Knn, BaselineKind::Kde];
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BaselineKind::Lda => "LDA",
            BaselineKind::Qda => "QDA",
            BaselineKind::Knn => "KNN",
            BaselineKind::Kde => "KDE",
        };
        f.write_str(s)
    }
}

impl FromStr for BaselineKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "LDA" => Ok(BaselineKind::Lda),
            "QDA" => Ok(BaselineKind::Qda),
            "KNN" | "K-NN" => Ok(BaselineKind::Knn),
            "KDE" => Ok(BaselineKind::Kde),
            other => Err(Error::InvalidParameter(format!("unknown baseline '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineConfig {
    pub scatter: ScatterPolicy,
    /// QDA with the pooled scatter for every class (reduces to LDA).
    pub qda_shared_scatter: bool,
    pub kde_grid_points: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig { scatter: ScatterPolicy::Auto, qda_shared_scatter: false, kde_grid_points: 10 }
    }
}

/// Gaussian discriminant: per-class means, whiteners and log priors.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianDiscriminant<T> {
    pub means: Vec<Array1<T>>,
    pub whiteners: Vec<Whitener<T>>,
    pub log_priors: Vec<T>,
}

impl<T: Scalar> GaussianDiscriminant<T> {
    /// `log π_j − ½ log|Σ_j| − ½ (x − μ_j)ᵀ Σ_j^{-1} (x − μ_j)` per class.
    pub fn scores(&self, x: ArrayView1<'_, T>) -> Result<Array1<T>> {
        check_dim(self.means[0].len(), x.len())?;
        let mut out = Array1::zeros(self.means.len());
        for (j, o) in out.iter_mut().enumerate() {
            let diff = &x - &self.means[j];
            let z = self.whiteners[j].apply(diff.view())?;
            *o = self.log_priors[j] + self.whiteners[j].log_det() - T::lit(0.5) * z.dot(&z);
        }
        Ok(out)
    }

    pub fn posterior(&self, x: ArrayView1<'_, T>) -> Result<Array1<T>> {
        let s = self.scores(x)?;
        let top = s.iter().copied().fold(T::neg_infinity(), T::max);
        let e = s.mapv(|v| (v - top).exp());
        let total = e.sum();
        Ok(e.mapv(|v| v / total))
    }
}

/// Training data in pooled-whitened coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct WhitenedSample<T> {
    pub whitener: Whitener<T>,
    pub points: Array2<T>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl<T: Scalar> WhitenedSample<T> {
    fn sq_distances(&self, wx: ArrayView1<'_, T>) -> Vec<T> {
        self.points
            .rows()
            .into_iter()
            .map(|r| r.iter().zip(wx.iter()).fold(T::zero(), |a, (&p, &q)| a + (p - q) * (p - q)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel<T> {
    pub sample: WhitenedSample<T>,
    pub k: usize,
    /// Leave-one-out error for each `k` tried.
    pub loo_errors: Vec<(usize, T)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KdeModel<T> {
    pub sample: WhitenedSample<T>,
    pub bandwidth: T,
    pub log_priors: Vec<T>,
    pub loo_errors: Vec<(T, T)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BaselineModel<T> {
    Lda(GaussianDiscriminant<T>),
    Qda(GaussianDiscriminant<T>),
    Knn(KnnModel<T>),
    Kde(KdeModel<T>),
}

/// Fitted baseline plus any warnings raised while fitting.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedBaseline<T> {
    pub model: BaselineModel<T>,
    pub warnings: Vec<String>,
}

impl<T: Scalar> FittedBaseline<T> {
    pub fn kind(&self) -> BaselineKind {
        match self.model {
            BaselineModel::Lda(_) => BaselineKind::Lda,
            BaselineModel::Qda(_) => BaselineKind::Qda,
            BaselineModel::Knn(_) => BaselineKind::Knn,
            BaselineModel::Kde(_) => BaselineKind::Kde,
        }
    }

    pub fn predict(&self, x: ArrayView1<'_, T>) -> Result<usize> {
        predict_baseline(&self.model, x)
    }

    pub fn predict_batch(&self, points: ArrayView2<'_, T>) -> Result<Vec<usize>> {
        (0..points.nrows()).into_par_iter().map(|i| self.predict(points.row(i))).collect()
    }
}

fn log_priors<T: Scalar>(counts: &[usize]) -> Vec<T> {
    let n: usize = counts.iter().sum();
    counts.iter().map(|&c| (T::from_usize_lossy(c) / T::from_usize_lossy(n)).ln()).collect()
}

fn pooled_whitener<T: Scalar>(classes: &[Array2<T>], policy: ScatterPolicy, d: usize) -> Result<Whitener<T>> {
    let views: Vec<ArrayView2<'_, T>> = classes.iter().map(|c| c.view()).collect();
    let n: usize = classes.iter().map(|c| c.nrows()).sum();
    let cov = pooled_covariance(&views)?;
    Whitener::from_covariance(cov.view(), policy.resolve(n, d))
}

fn check_training<T: Scalar>(train: &LabeledDataset<T>) -> Result<Vec<usize>> {
    let counts = train.class_counts();
    if counts.len() < 2 {
        return Err(Error::InvalidLabels("need at least two classes".into()));
    }
    if let Some(j) = counts.iter().position(|&c| c == 0) {
        return Err(Error::InsufficientData(format!("class {} has no training points", j + 1)));
    }
    Ok(counts)
}

fn whitened_sample<T: Scalar>(train: &LabeledDataset<T>, classes: &[Array2<T>], policy: ScatterPolicy) -> Result<WhitenedSample<T>> {
    let whitener = pooled_whitener(classes, policy, train.dim())?;
    Ok(WhitenedSample {
        points: whitener.apply_rows(train.x())?,
        whitener,
        labels: train.labels().to_vec(),
        num_classes: train.num_classes(),
    })
}

/// Fits a baseline of the given kind.
pub fn fit_baseline<T: Scalar>(kind: BaselineKind, train: &LabeledDataset<T>, cfg: &BaselineConfig) -> Result<FittedBaseline<T>> {
    let counts = check_training(train)?;
    let classes = train.split_by_class();
    let d = train.dim();
    let mut warnings = Vec::new();
    let model = match kind {
        BaselineKind::Lda => {
            let w = pooled_whitener(&classes, cfg.scatter, d)?;
            BaselineModel::Lda(GaussianDiscriminant {
                means: classes.iter().map(|c| column_means(c.view())).collect(),
                whiteners: vec![w; classes.len()],
                log_priors: log_priors(&counts),
            })
        }
        BaselineKind::Qda => {
            let whiteners = if cfg.qda_shared_scatter {
                vec![pooled_whitener(&classes, cfg.scatter, d)?; classes.len()]
            } else {
                let mut ws = Vec::with_capacity(classes.len());
                for (j, c) in classes.iter().enumerate() {
                    let mode = cfg.scatter.resolve(c.nrows(), d);
                    let mut w = estimate_scatter(c.view(), mode)?;
                    if mode == ScatterMode::Full && w.floored_count() > 0 {
                        let msg = format!("QDA: class {} scatter is singular; using diagonal scatter", j + 1);
                        log::warn!("{msg}");
                        warnings.push(msg);
                        w = estimate_scatter(c.view(), ScatterMode::Diagonal)?;
                    }
                    ws.push(w);
                }
                ws
            };
            BaselineModel::Qda(GaussianDiscriminant {
                means: classes.iter().map(|c| column_means(c.view())).collect(),
                whiteners,
                log_priors: log_priors(&counts),
            })
        }
        BaselineKind::Knn => BaselineModel::Knn(fit_knn(whitened_sample(train, &classes, cfg.scatter)?)),
        BaselineKind::Kde => {
            let sample = whitened_sample(train, &classes, cfg.scatter)?;
            BaselineModel::Kde(fit_kde(sample, log_priors(&counts), cfg.kde_grid_points)?)
        }
    };
    Ok(FittedBaseline { model, warnings })
}

/// Odd `k` from 1 to `√n` (at least `k = 1`, at most `n − 1`).
pub fn knn_grid(n: usize) -> Vec<usize> {
    let top = ((n as f64).sqrt().round() as usize).min(n.saturating_sub(1)).max(1);
    (1..=top).step_by(2).collect()
}

/// Indices of `dist` sorted by distance, ties by index.
fn order_by_distance<T: Scalar>(dist: &[T]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..dist.len()).collect();
    idx.sort_by(|&a, &b| dist[a].partial_cmp(&dist[b]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
    idx
}

/// Majority label among the first `k` neighbours; lowest class on ties.
fn vote(order: &[usize], labels: &[usize], k: usize, num_classes: usize) -> usize {
    let mut counts = vec![0usize; num_classes];
    for &i in order.iter().take(k) {
        counts[labels[i]] += 1;
    }
    let mut best = 0;
    for (j, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = j;
        }
    }
    best
}

fn fit_knn<T: Scalar>(sample: WhitenedSample<T>) -> KnnModel<T> {
    let n = sample.points.nrows();
    let grid = knn_grid(n);
    let wrong = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut dist = sample.sq_distances(sample.points.row(i));
            dist[i] = T::infinity();
            let order = order_by_distance(&dist);
            grid.iter()
                .map(|&k| usize::from(vote(&order[..n - 1], &sample.labels, k, sample.num_classes) != sample.labels[i]))
                .collect::<Vec<_>>()
        })
        .reduce(|| vec![0; grid.len()], |a, b| a.iter().zip(&b).map(|(x, y)| x + y).collect());
    let loo_errors: Vec<(usize, T)> = grid
        .iter()
        .zip(&wrong)
        .map(|(&k, &w)| (k, T::from_usize_lossy(w) / T::from_usize_lossy(n)))
        .collect();
    let mut best = loo_errors[0];
    for &e in &loo_errors[1..] {
        if e.1 < best.1 {
            best = e;
        }
    }
    KnnModel { sample, k: best.0, loo_errors }
}

/// Per-class `log Σ_i exp(−‖x − x_i‖²/(2b²)) − log n_j − d log b`, skipping index `skip`.
fn kde_log_densities<T: Scalar>(
    sample: &WhitenedSample<T>,
    sq_dist: &[T],
    bandwidth: T,
    skip: Option<usize>,
) -> Vec<T> {
    let j = sample.num_classes;
    let inv = T::one() / (T::lit(2.0) * bandwidth * bandwidth);
    let mut top = vec![T::neg_infinity(); j];
    for (i, (&s, &y)) in sq_dist.iter().zip(&sample.labels).enumerate() {
        if Some(i) != skip {
            top[y] = top[y].max(-s * inv);
        }
    }
    let mut acc = vec![T::zero(); j];
    let mut cnt = vec![0usize; j];
    for (i, (&s, &y)) in sq_dist.iter().zip(&sample.labels).enumerate() {
        if Some(i) != skip {
            acc[y] += (-s * inv - top[y]).exp();
            cnt[y] += 1;
        }
    }
    let d = T::from_usize_lossy(sample.points.ncols());
    (0..j)
        .map(|c| {
            if cnt[c] == 0 {
                T::neg_infinity()
            } else {
                top[c] + acc[c].ln() - T::from_usize_lossy(cnt[c]).ln() - d * bandwidth.ln()
            }
        })
        .collect()
}

fn kde_label<T: Scalar>(log_dens: &[T], log_priors: &[T]) -> usize {
    let scores: Array1<T> = log_dens.iter().zip(log_priors).map(|(&a, &b)| a + b).collect();
    argmax(scores.view())
}

/// Ten-point style log grid `[0.1, 10]·n^{−1/(d+4)}` with `points` entries.
pub fn kde_grid<T: Scalar>(n: usize, d: usize, points: usize) -> Vec<T> {
    let pilot = (n as f64).powf(-1.0 / (d as f64 + 4.0));
    if points <= 1 {
        return vec![T::lit(pilot)];
    }
    (0..points)
        .map(|i| {
            let e = -1.0 + 2.0 * i as f64 / (points - 1) as f64;
            T::lit(pilot * 10f64.powf(e))
        })
        .collect()
}

fn fit_kde<T: Scalar>(sample: WhitenedSample<T>, log_priors: Vec<T>, points: usize) -> Result<KdeModel<T>> {
    let n = sample.points.nrows();
    if points == 0 {
        return Err(Error::InvalidParameter("KDE grid needs at least one bandwidth".into()));
    }
    let grid: Vec<T> = kde_grid(n, sample.points.ncols(), points);
    let wrong = (0..n)
        .into_par_iter()
        .map(|i| {
            let dist = sample.sq_distances(sample.points.row(i));
            grid.iter()
                .map(|&b| {
                    let ld = kde_log_densities(&sample, &dist, b, Some(i));
                    usize::from(kde_label(&ld, &log_priors) != sample.labels[i])
                })
                .collect::<Vec<_>>()
        })
        .reduce(|| vec![0; grid.len()], |a, b| a.iter().zip(&b).map(|(x, y)| x + y).collect());
    let loo_errors: Vec<(T, T)> = grid
        .iter()
        .zip(&wrong)
        .map(|(&b, &w)| (b, T::from_usize_lossy(w) / T::from_usize_lossy(n)))
        .collect();
    let mut best = loo_errors[0];
    for &e in &loo_errors[1..] {
        if e.1 < best.1 {
            best = e;
        }
    }
    Ok(KdeModel { sample, bandwidth: best.0, log_priors, loo_errors })
}

impl<T: Scalar> KdeModel<T> {
    /// Same training sample with a different bandwidth.
    pub fn with_bandwidth(&self, bandwidth: T) -> Result<Self> {
        if !(bandwidth > T::zero()) || !bandwidth.is_finite() {
            return Err(Error::InvalidParameter("bandwidth must be positive".into()));
        }
        Ok(KdeModel { bandwidth, ..self.clone() })
    }
}

/// Decision rule of `m` at `x`.
pub fn predict_baseline<T: Scalar>(m: &BaselineModel<T>, x: ArrayView1<'_, T>) -> Result<usize> {
    match m {
        BaselineModel::Lda(g) | BaselineModel::Qda(g) => Ok(argmax(g.scores(x)?.view())),
        BaselineModel::Knn(k) => {
            check_dim(k.sample.points.ncols(), x.len())?;
            let wx = k.sample.whitener.apply(x)?;
            let order = order_by_distance(&k.sample.sq_distances(wx.view()));
            Ok(vote(&order, &k.sample.labels, k.k, k.sample.num_classes))
        }
        BaselineModel::Kde(k) => {
            check_dim(k.sample.points.ncols(), x.len())?;
            let wx = k.sample.whitener.apply(x)?;
            let ld = kde_log_densities(&k.sample, &k.sample.sq_distances(wx.view()), k.bandwidth, None);
            Ok(kde_label(&ld, &k.log_priors))
        }
    }
}
