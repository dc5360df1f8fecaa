//! Multiscale aggregation of localized-depth classifiers.
//!
//! Bandwidths `h_1..h_M` are drawn from a half-Cauchy law. For each one an
//! additive model is fit on the depth features `z_h`, its leave-one-out risk
//! `Δ̂_h` is estimated, and the bandwidth gets the weight
//!
//! `W(h) = exp(−½ n (Δ̂_h − Δ̂_0)² / (Δ̂_0 (1 − Δ̂_0)))`, `Δ̂_0 = min_h Δ̂_h`.
//!
//! A point is assigned to `argmax_j Σ_i W(h_i) p(j | z_{h_i}(x))`.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dataset::LabeledDataset;
use crate::depth::{DepthReference, DepthScale, KernelSpec, SignProfile};
use crate::error::{check_dim, Error, Result};
use crate::gam::{argmax, fit_gam, GamConfig, GamModel};
use crate::numerics::{estimate_scatter, ScatterPolicy, Whitener};
use crate::scalar::Scalar;

pub const DEFAULT_M: usize = 25;
pub const DEFAULT_CAUCHY_SCALE: f64 = 100.0;
pub const MIN_BANDWIDTH: f64 = 1e-3;
pub const MAX_BANDWIDTH: f64 = 1e6;
pub const DEFAULT_FOLDS: usize = 10;

/// Which depth features of the training points the additive model is fit on.
///
/// In-sample LSPD features carry the point's own kernel mass `K_h(0)/n`,
/// which test points never see; at small `h` it dominates the feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum FitFeatures {
    /// Each training point's depths computed without the point itself.
    #[default]
    LeaveOneOut,
    /// Depths against the full training sample.
    InSample,
}

impl fmt::Display for FitFeatures {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FitFeatures::LeaveOneOut => f.write_str("loo"),
            FitFeatures::InSample => f.write_str("in-sample"),
        }
    }
}

impl FromStr for FitFeatures {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "loo" | "leave-one-out" => Ok(FitFeatures::LeaveOneOut),
            "in-sample" | "full" => Ok(FitFeatures::InSample),
            other => Err(Error::InvalidParameter(format!("unknown fit features '{other}'"))),
        }
    }
}

/// How the per-bandwidth risk `Δ̂_h` is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum CvMode {
    /// One fit (on the [`FitFeatures`] of the config), scored on leave-one-out features.
    #[default]
    LooFeatures,
    /// `k`-fold: depths and model recomputed without each fold (whiteners kept).
    KFold(usize),
}

impl fmt::Display for CvMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CvMode::LooFeatures => f.write_str("loo-features"),
            CvMode::KFold(DEFAULT_FOLDS) => f.write_str("kfold"),
            CvMode::KFold(k) => write!(f, "kfold:{k}"),
        }
    }
}

impl FromStr for CvMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "loo-features" | "loo" => Ok(CvMode::LooFeatures),
            "kfold" => Ok(CvMode::KFold(DEFAULT_FOLDS)),
            _ => match s.strip_prefix("kfold:").map(str::parse::<usize>) {
                Some(Ok(k)) if k >= 2 => Ok(CvMode::KFold(k)),
                _ => Err(Error::InvalidParameter(format!("unknown cv mode '{s}'"))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiscaleConfig<T> {
    /// Number of sampled bandwidths.
    pub m: usize,
    pub cauchy_scale: T,
    pub gam: GamConfig<T>,
    pub seed: u64,
    pub cv_mode: CvMode,
    pub scatter: ScatterPolicy,
    pub fit_features: FitFeatures,
}

impl<T: Scalar> Default for MultiscaleConfig<T> {
    fn default() -> Self {
        MultiscaleConfig {
            m: DEFAULT_M,
            cauchy_scale: T::lit(DEFAULT_CAUCHY_SCALE),
            gam: GamConfig::default(),
            seed: 0,
            cv_mode: CvMode::default(),
            scatter: ScatterPolicy::default(),
            fit_features: FitFeatures::default(),
        }
    }
}

/// Half-Cauchy quantile `scale·|tan(π(u − ½))|`, clamped to `[MIN_BANDWIDTH, MAX_BANDWIDTH]`.
pub fn bandwidth_from_uniform<T: Scalar>(u: T, scale: T) -> T {
    let h = scale * (T::PI() * (u - T::lit(0.5))).tan().abs();
    if h.is_nan() {
        return T::lit(MAX_BANDWIDTH);
    }
    h.max(T::lit(MIN_BANDWIDTH)).min(T::lit(MAX_BANDWIDTH))
}

/// `m` seeded half-Cauchy bandwidths.
pub fn sample_bandwidths<T: Scalar>(m: usize, scale: T, seed: u64) -> Result<Vec<T>> {
    if m < 1 {
        return Err(Error::InvalidParameter("need at least one bandwidth".into()));
    }
    if !(scale > T::zero()) || !scale.is_finite() {
        return Err(Error::InvalidParameter("Cauchy scale must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..m).map(|_| bandwidth_from_uniform(T::lit(rng.random::<f64>()), scale)).collect())
}

/// `log W(h)` for risks estimated on `n` training points; the smallest risk gets 0.
pub fn log_weights<T: Scalar>(risks: &[T], n: usize) -> Result<Vec<T>> {
    if risks.is_empty() {
        return Err(Error::InvalidParameter("empty risk vector".into()));
    }
    if n < 1 {
        return Err(Error::InvalidParameter("training size must be positive".into()));
    }
    if risks.iter().any(|r| !(*r >= T::zero() && *r <= T::one())) {
        return Err(Error::InvalidParameter("risks must lie in [0, 1]".into()));
    }
    let best = risks.iter().copied().fold(T::infinity(), T::min);
    let nf = T::from_usize_lossy(n);
    // at Δ̂_0 ∈ {0, 1} the binomial variance vanishes; 1/(4n) keeps W defined
    let var = (best * (T::one() - best)).max(T::one() / (T::lit(4.0) * nf));
    Ok(risks
        .iter()
        .map(|&r| {
            let diff = r - best;
            -T::lit(0.5) * nf * diff * diff / var
        })
        .collect())
}

/// Weights `W(h)` for risks estimated on `n` training points; the smallest risk gets weight 1.
pub fn compute_weights<T: Scalar>(risks: &[T], n: usize) -> Result<Vec<T>> {
    Ok(log_weights(risks, n)?.into_iter().map(|l| l.exp()).collect())
}

/// Normalized `Σ_i w_i p_i` and its argmax (lowest index on ties).
pub fn aggregate_posteriors<T: Scalar>(posteriors: &[Array1<T>], weights: &[T]) -> Result<(usize, Array1<T>)> {
    check_dim(posteriors.len(), weights.len())?;
    let first = posteriors.first().ok_or_else(|| Error::InvalidParameter("no posteriors".into()))?;
    let mut agg = Array1::<T>::zeros(first.len());
    for (p, &w) in posteriors.iter().zip(weights) {
        check_dim(agg.len(), p.len())?;
        agg.scaled_add(w, p);
    }
    let total = agg.sum();
    if !(total > T::zero()) {
        return Err(Error::Numerical("aggregated posterior has no mass".into()));
    }
    agg.mapv_inplace(|v| v / total);
    Ok((argmax(agg.view()), agg))
}

/// Per-class whiteners under `policy` and the depth reference built on them.
pub fn fit_reference<T: Scalar>(train: &LabeledDataset<T>, policy: ScatterPolicy) -> Result<DepthReference<T>> {
    let classes = train.split_by_class();
    let d = train.dim();
    let mut whiteners = Vec::with_capacity(classes.len());
    for (j, c) in classes.iter().enumerate() {
        if c.nrows() == 0 {
            return Err(Error::InsufficientData(format!("class {} has no training points", j + 1)));
        }
        let mode = policy.resolve(c.nrows(), d);
        let w = if c.nrows() < 2 { Whitener::identity(d) } else { estimate_scatter(c.view(), mode)? };
        if w.floored_count() > 0 {
            log::debug!("class {}: {} scatter directions floored", j + 1, w.floored_count());
        }
        whiteners.push(w);
    }
    let views: Vec<ArrayView2<'_, T>> = classes.iter().map(|c| c.view()).collect();
    DepthReference::new(&views, &whiteners, KernelSpec::gaussian(d))
}

/// Classifier attached to one depth scale.
#[derive(Debug, Clone, PartialEq)]
pub enum ScaleModel<T> {
    Gam(GamModel<T>),
    /// Training class proportions; used when the model fit breaks down numerically.
    Prior(Array1<T>),
}

impl<T: Scalar> ScaleModel<T> {
    pub fn posterior(&self, z: ArrayView1<'_, T>) -> Result<Array1<T>> {
        match self {
            ScaleModel::Gam(m) => m.predict_posterior(z),
            ScaleModel::Prior(p) => Ok(p.clone()),
        }
    }

    fn label(&self, z: ArrayView1<'_, T>) -> usize {
        match self.posterior(z) {
            Ok(p) => argmax(p.view()),
            // a non-finite feature cannot be scored; count it as a miss
            Err(_) => usize::MAX,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaleFit<T> {
    pub scale: DepthScale<T>,
    pub model: ScaleModel<T>,
    pub risk: T,
    pub weight: T,
    pub log_weight: T,
}

/// Fitted multiscale classifier (a single-scale classifier is the `M = 1` case with weight 1).
#[derive(Debug, Clone)]
pub struct MultiscaleModel<T> {
    reference: DepthReference<T>,
    scales: Vec<ScaleFit<T>>,
    n: usize,
    cauchy_scale: T,
    cv_mode: CvMode,
    fit_features: FitFeatures,
}

impl<T: Scalar> MultiscaleModel<T> {
    pub fn reference(&self) -> &DepthReference<T> {
        &self.reference
    }

    pub fn scales(&self) -> &[ScaleFit<T>] {
        &self.scales
    }

    /// Bandwidths in draw order (`None` for the SPD scale).
    pub fn bandwidths(&self) -> Vec<Option<T>> {
        self.scales
            .iter()
            .map(|s| match s.scale {
                DepthScale::Spd => None,
                DepthScale::Lspd(h) => Some(h),
            })
            .collect()
    }

    pub fn risks(&self) -> Vec<T> {
        self.scales.iter().map(|s| s.risk).collect()
    }

    pub fn weights(&self) -> Vec<T> {
        self.scales.iter().map(|s| s.weight).collect()
    }

    pub fn training_size(&self) -> usize {
        self.n
    }

    pub fn cauchy_scale(&self) -> T {
        self.cauchy_scale
    }

    pub fn cv_mode(&self) -> CvMode {
        self.cv_mode
    }

    pub fn fit_features(&self) -> FitFeatures {
        self.fit_features
    }

    /// Scale with the smallest risk (first one on ties).
    pub fn best_scale(&self) -> &ScaleFit<T> {
        let mut best = &self.scales[0];
        for s in &self.scales[1..] {
            if s.risk < best.risk {
                best = s;
            }
        }
        best
    }

    fn posterior_from_profiles(&self, profiles: &[SignProfile<T>]) -> Result<(usize, Array1<T>)> {
        let mut posts = Vec::with_capacity(self.scales.len());
        let mut log_w = Vec::with_capacity(self.scales.len());
        for s in &self.scales {
            let z = self.reference.assemble(profiles, s.scale).values;
            match s.model.posterior(z.view()) {
                Ok(p) => {
                    posts.push(p);
                    log_w.push(s.log_weight);
                }
                // non-finite features or posterior at this scale: leave it out
                Err(Error::InvalidData(_) | Error::Numerical(_)) => continue,
                Err(e) => return Err(e),
            }
        }
        if posts.is_empty() {
            return Err(Error::Numerical("no scale produced finite depth features".into()));
        }
        // rescale so the best usable scale has weight 1; skipped scales may have held all the mass
        let top = log_w.iter().copied().fold(T::neg_infinity(), T::max);
        let weights: Vec<T> = log_w.iter().map(|&l| (l - top).exp()).collect();
        aggregate_posteriors(&posts, &weights)
    }

    /// Label and normalized aggregated posterior at `x`.
    pub fn classify(&self, x: ArrayView1<'_, T>) -> Result<(usize, Array1<T>)> {
        check_dim(self.reference.dim(), x.len())?;
        let profiles = self.reference.profiles(x)?;
        self.posterior_from_profiles(&profiles)
    }

    pub fn predict(&self, x: ArrayView1<'_, T>) -> Result<usize> {
        self.classify(x).map(|(y, _)| y)
    }

    /// Labels for every row of `points`, evaluated in parallel.
    pub fn predict_batch(&self, points: ArrayView2<'_, T>) -> Result<Vec<usize>> {
        check_dim(self.reference.dim(), points.ncols())?;
        (0..points.nrows()).into_par_iter().map(|i| self.predict(points.row(i))).collect()
    }

    /// Plain-text table of bandwidths, risks and weights.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "multiscale model: M={} cauchy_scale={} cv={} fit={} n={}",
            self.scales.len(),
            self.cauchy_scale,
            self.cv_mode,
            self.fit_features,
            self.n
        );
        let _ = writeln!(s, "{:>4}  {:>12}  {:>8}  {:>10}", "i", "h", "risk", "weight");
        for (i, f) in self.scales.iter().enumerate() {
            let h = match f.scale {
                DepthScale::Spd => "spd".to_string(),
                DepthScale::Lspd(h) => format!("{:.4e}", h.as_f64()),
            };
            let _ = writeln!(s, "{:>4}  {:>12}  {:>8.4}  {:>10.4e}", i + 1, h, f.risk.as_f64(), f.weight.as_f64());
        }
        s
    }
}

/// Per-scale full-sample and leave-one-out training features, `n × J` each.
struct TrainingFeatures<T> {
    full: Vec<Array2<T>>,
    loo: Vec<Array2<T>>,
}

fn training_features<T: Scalar>(
    reference: &DepthReference<T>,
    positions: &[(usize, usize)],
    scales: &[DepthScale<T>],
) -> Result<TrainingFeatures<T>> {
    let j = reference.num_classes();
    let rows = positions
        .par_iter()
        .map(|&(c, p)| {
            let raw = reference.classes()[c].raw();
            let full = reference.profiles(raw.row(p))?;
            let loo = reference.profiles_loo(c, p)?;
            Ok(scales
                .iter()
                .map(|&s| (reference.assemble(&full, s).values, reference.assemble(&loo, s).values))
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let mut full = vec![Array2::zeros((positions.len(), j)); scales.len()];
    let mut loo = vec![Array2::zeros((positions.len(), j)); scales.len()];
    for (i, per_scale) in rows.into_iter().enumerate() {
        for (s, (f, l)) in per_scale.into_iter().enumerate() {
            full[s].row_mut(i).assign(&f);
            loo[s].row_mut(i).assign(&l);
        }
    }
    Ok(TrainingFeatures { full, loo })
}

fn class_prior<T: Scalar>(labels: &[usize], j: usize) -> Array1<T> {
    let mut p = Array1::<T>::zeros(j);
    for &y in labels {
        p[y] += T::one();
    }
    let n = T::from_usize_lossy(labels.len());
    p.mapv(|v| v / n)
}

fn fit_scale_model<T: Scalar>(z: ArrayView2<'_, T>, labels: &[usize], j: usize, cfg: &GamConfig<T>) -> Result<ScaleModel<T>> {
    match fit_gam(z, labels, cfg) {
        Ok(m) => {
            if !m.converged {
                log::debug!("additive model stopped after {} iterations without converging", m.iterations);
            }
            Ok(ScaleModel::Gam(m))
        }
        Err(e @ (Error::Numerical(_) | Error::InvalidData(_))) => {
            log::warn!("additive model fit failed ({e}); using class proportions");
            Ok(ScaleModel::Prior(class_prior(labels, j)))
        }
        Err(e) => Err(e),
    }
}

fn error_rate<T: Scalar>(model: &ScaleModel<T>, z: ArrayView2<'_, T>, labels: &[usize]) -> T {
    let wrong = z.rows().into_iter().zip(labels).filter(|(row, &y)| model.label(*row) != y).count();
    T::from_usize_lossy(wrong) / T::from_usize_lossy(labels.len())
}

/// `k`-fold risks for every scale: depths against the fold-excluded sample, model refit per fold.
fn kfold_risks<T: Scalar>(
    reference: &DepthReference<T>,
    train: &LabeledDataset<T>,
    scales: &[DepthScale<T>],
    k: usize,
    gam: &GamConfig<T>,
    fit_features: FitFeatures,
) -> Result<Vec<T>> {
    let n = train.len();
    let j = reference.num_classes();
    let k = k.min(n);
    let whiteners: Vec<Whitener<T>> = reference.classes().iter().map(|c| c.whitener().clone()).collect();
    let mut wrong = vec![0usize; scales.len()];
    for fold in 0..k {
        let (held, kept): (Vec<usize>, Vec<usize>) = (0..n).partition(|i| i % k == fold);
        let kept_set = train.subset(&kept);
        let classes = kept_set.split_by_class();
        if let Some(empty) = classes.iter().position(|c| c.nrows() == 0) {
            return Err(Error::InsufficientData(format!("fold {} removes all of class {}", fold + 1, empty + 1)));
        }
        let views: Vec<ArrayView2<'_, T>> = classes.iter().map(|c| c.view()).collect();
        let reduced = DepthReference::new(&views, &whiteners, *reference.kernel())?;
        let features = |rows: ArrayView2<'_, T>| -> Result<Vec<Array2<T>>> {
            let per_point = (0..rows.nrows())
                .into_par_iter()
                .map(|i| {
                    let prof = reduced.profiles(rows.row(i))?;
                    Ok(scales.iter().map(|&s| reduced.assemble(&prof, s).values).collect::<Vec<_>>())
                })
                .collect::<Result<Vec<_>>>()?;
            let mut out = vec![Array2::zeros((rows.nrows(), j)); scales.len()];
            for (i, vals) in per_point.into_iter().enumerate() {
                for (s, v) in vals.into_iter().enumerate() {
                    out[s].row_mut(i).assign(&v);
                }
            }
            Ok(out)
        };
        let z_kept = match fit_features {
            FitFeatures::InSample => features(kept_set.x())?,
            FitFeatures::LeaveOneOut => training_features(&reduced, &kept_set.class_positions(), scales)?.loo,
        };
        let held_x = train.x().select(Axis(0), &held);
        let z_held = features(held_x.view())?;
        let held_labels: Vec<usize> = held.iter().map(|&i| train.labels()[i]).collect();
        let counts = (0..scales.len())
            .into_par_iter()
            .map(|s| {
                let model = fit_scale_model(z_kept[s].view(), kept_set.labels(), j, gam)?;
                Ok(z_held[s].rows().into_iter().zip(&held_labels).filter(|(r, &y)| model.label(*r) != y).count())
            })
            .collect::<Result<Vec<_>>>()?;
        for (w, c) in wrong.iter_mut().zip(counts) {
            *w += c;
        }
    }
    Ok(wrong.into_iter().map(|w| T::from_usize_lossy(w) / T::from_usize_lossy(n)).collect())
}

/// Fits one model per scale and estimates its risk; weights are left at 1.
fn fit_scales<T: Scalar>(
    reference: &DepthReference<T>,
    train: &LabeledDataset<T>,
    scales: &[DepthScale<T>],
    cfg: &MultiscaleConfig<T>,
) -> Result<Vec<ScaleFit<T>>> {
    for (j, &c) in train.class_counts().iter().enumerate() {
        if c < 2 {
            return Err(Error::InsufficientData(format!("class {} has {c} training points, need 2", j + 1)));
        }
    }
    let j = reference.num_classes();
    let labels = train.labels();
    let feats = training_features(reference, &train.class_positions(), scales)?;
    let fits = (0..scales.len())
        .into_par_iter()
        .map(|s| {
            let z = match cfg.fit_features {
                FitFeatures::LeaveOneOut => feats.loo[s].view(),
                FitFeatures::InSample => feats.full[s].view(),
            };
            let model = fit_scale_model(z, labels, j, &cfg.gam)?;
            let risk = error_rate(&model, feats.loo[s].view(), labels);
            Ok(ScaleFit { scale: scales[s], model, risk, weight: T::one(), log_weight: T::zero() })
        })
        .collect::<Result<Vec<_>>>()?;
    match cfg.cv_mode {
        CvMode::LooFeatures => Ok(fits),
        CvMode::KFold(k) => {
            let risks = kfold_risks(reference, train, scales, k, &cfg.gam, cfg.fit_features)?;
            Ok(fits.into_iter().zip(risks).map(|(f, risk)| ScaleFit { risk, ..f }).collect())
        }
    }
}

/// Risk estimate `Δ̂_h` of the single-bandwidth classifier.
pub fn cv_risk<T: Scalar>(h: T, train: &LabeledDataset<T>, cfg: &MultiscaleConfig<T>) -> Result<T> {
    if !(h > T::zero()) || !h.is_finite() {
        return Err(Error::InvalidParameter(format!("bandwidth must be positive and finite, got {h}")));
    }
    let reference = fit_reference(train, cfg.scatter)?;
    Ok(fit_scales(&reference, train, &[DepthScale::Lspd(h)], cfg)?[0].risk)
}

/// Samples `cfg.m` bandwidths and fits the weighted ensemble.
pub fn fit_multiscale<T: Scalar>(train: &LabeledDataset<T>, cfg: &MultiscaleConfig<T>) -> Result<MultiscaleModel<T>> {
    let hs = sample_bandwidths(cfg.m, cfg.cauchy_scale, cfg.seed)?;
    let scales: Vec<DepthScale<T>> = hs.into_iter().map(DepthScale::Lspd).collect();
    fit_with_scales(train, &scales, cfg)
}

/// Ensemble over explicitly given scales.
pub fn fit_with_scales<T: Scalar>(
    train: &LabeledDataset<T>,
    scales: &[DepthScale<T>],
    cfg: &MultiscaleConfig<T>,
) -> Result<MultiscaleModel<T>> {
    if scales.is_empty() {
        return Err(Error::InvalidParameter("need at least one scale".into()));
    }
    let reference = fit_reference(train, cfg.scatter)?;
    let mut fits = fit_scales(&reference, train, scales, cfg)?;
    let log_w = log_weights(&fits.iter().map(|f| f.risk).collect::<Vec<_>>(), train.len())?;
    for (f, l) in fits.iter_mut().zip(log_w) {
        f.log_weight = l;
        f.weight = l.exp();
    }
    Ok(MultiscaleModel { reference, scales: fits, n: train.len(), cauchy_scale: cfg.cauchy_scale,
        cv_mode: cfg.cv_mode,
        fit_features: cfg.fit_features,
    })
}

/// Classifier on a single depth scale (SPD, or LSPD at a fixed bandwidth).
pub fn fit_single_scale<T: Scalar>(
    train: &LabeledDataset<T>,
    scale: DepthScale<T>,
    cfg: &MultiscaleConfig<T>,
) -> Result<MultiscaleModel<T>> {
    fit_with_scales(train, &[scale], cfg)
}

/// Label and aggregated posterior of `x` under `m`.
pub fn classify_multiscale<T: Scalar>(m: &MultiscaleModel<T>, x: ArrayView1<'_, T>) -> Result<(usize, Array1<T>)> {
    m.classify(x)
}

#[cfg(test)]
mod tests;
