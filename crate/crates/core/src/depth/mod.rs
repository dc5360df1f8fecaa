//! Spatial depth (SPD), localized spatial depth (LSPD) and per-class depth
//! features.
//!
//! For a query `x` and a class sample `x_1..x_n` with whitener `W`, let
//! `t_i = W(x − x_i)` and `u(t) = t/‖t‖` (zero at the origin). Then
//!
//! * `SPD(x) = 1 − ‖(1/n) Σ u(t_i)‖`
//! * `Γ_h(x) = (1/n) Σ K_h(t_i) − ‖(1/n) Σ K_h(t_i) u(t_i)‖`, `K_h(t) = h^{-d} K(t/h)`
//! * `LSPD_h(x) = Γ_h(x)` for `h ≤ 1` and `h^d Γ_h(x)` for `h > 1`.
//!
//! Kernel weights are accumulated relative to the largest exponent so that
//! neither `h^{-d}` nor `exp(−‖t‖²/2h²)` over- or underflows before the
//! final scaling.

use std::fmt;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;

use crate::error::{check_dim, Error, Result};
use crate::numerics::Whitener;
use crate::scalar::Scalar;

mod hdlss;

pub use hdlss::{hdlss_lspd_limits, hdlss_spd_limits, HdlssParams};

/// Norms below this are treated as the origin by the sign function.
pub const ZERO_NORM: f64 = 1e-12;

/// Kernel family. Only the Gaussian is provided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelFamily {
    Gaussian,
}

/// Whether the kernel carries its density normalization `(2π)^{-d/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelNorm {
    /// `K(t) = (2π)^{-d/2} exp(−‖t‖²/2)`, a probability density.
    Density,
    /// Unnormalized profile `g(s) = exp(−s²/2)`.
    Profile,
}

/// Radial kernel `K(t) = g(‖t‖)` in dimension `dim`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub dim: usize,
    pub norm: KernelNorm,
}

impl KernelSpec {
    /// Normalized Gaussian density kernel.
    pub fn gaussian(dim: usize) -> Self {
        KernelSpec { family: KernelFamily::Gaussian, dim, norm: KernelNorm::Density }
    }

    /// Unnormalized Gaussian profile `exp(−s²/2)`.
    pub fn gaussian_profile(dim: usize) -> Self {
        KernelSpec { family: KernelFamily::Gaussian, dim, norm: KernelNorm::Profile }
    }

    /// `log K(0)`.
    pub fn log_norm<T: Scalar>(&self) -> T {
        match self.norm {
            KernelNorm::Density => {
                -T::from_usize_lossy(self.dim) * T::lit(0.5) * (T::lit(2.0) * T::PI()).ln()
            }
            KernelNorm::Profile => T::zero(),
        }
    }

    /// `K(0)`.
    pub fn at_zero<T: Scalar>(&self) -> T {
        self.log_norm::<T>().exp()
    }

    /// Log of the radial profile `log g(s)` without the normalization constant.
    #[inline]
    pub fn log_shape<T: Scalar>(&self, s2: T) -> T {
        match self.family {
            KernelFamily::Gaussian => -T::lit(0.5) * s2,
        }
    }

    /// `g(s)`, including the normalization constant when the kernel is a density.
    pub fn profile<T: Scalar>(&self, s: T) -> T {
        (self.log_norm::<T>() + self.log_shape(s * s)).exp()
    }

    /// `K(t)` for a vector argument.
    pub fn eval<T: Scalar>(&self, t: ArrayView1<'_, T>) -> T {
        let s2 = t.iter().fold(T::zero(), |acc, &x| acc + x * x);
        (self.log_norm::<T>() + self.log_shape(s2)).exp()
    }
}

/// Depth notion used for a feature vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DepthScale<T> {
    Spd,
    Lspd(T),
}

impl<T: Scalar> fmt::Display for DepthScale<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DepthScale::Spd => f.write_str("spd"),
            DepthScale::Lspd(h) => write!(f, "lspd(h={h})"),
        }
    }
}

/// Per-class depth vector `z(x)` or `z_h(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthFeatures<T> {
    pub values: Array1<T>,
    pub scale: DepthScale<T>,
}

impl<T: Scalar> DepthFeatures<T> {
    pub fn num_classes(&self) -> usize {
        self.values.len()
    }
}

/// Multivariate sign `t/‖t‖`, or zero when `‖t‖ < 1e-12`.
pub fn sign_vector<T: Scalar>(t: ArrayView1<'_, T>) -> Result<Array1<T>> {
    if t.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidData("non-finite vector".into()));
    }
    let norm = t.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt();
    if norm < T::lit(ZERO_NORM) {
        Ok(Array1::zeros(t.len()))
    } else {
        Ok(t.mapv(|x| x / norm))
    }
}

/// A class sample already mapped through its whitener.
#[derive(Debug, Clone)]
pub struct ClassSample<T> {
    whitener: Whitener<T>,
    raw: Array2<T>,
    whitened: Array2<T>,
}

impl<T: Scalar> ClassSample<T> {
    pub fn new(data: ArrayView2<'_, T>, whitener: Whitener<T>) -> Result<Self> {
        if data.nrows() == 0 {
            return Err(Error::InsufficientData("empty class sample".into()));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidData("non-finite observation".into()));
        }
        let whitened = whitener.apply_rows(data)?;
        Ok(ClassSample { whitener, raw: data.to_owned(), whitened })
    }

    pub fn len(&self) -> usize {
        self.whitened.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.whitened.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.whitened.ncols()
    }

    pub fn whitener(&self) -> &Whitener<T> {
        &self.whitener
    }

    /// The original (unwhitened) observations.
    pub fn raw(&self) -> ArrayView2<'_, T> {
        self.raw.view()
    }

    /// Sign/norm decomposition of the whitened differences to a raw query point.
    pub fn profile(&self, x: ArrayView1<'_, T>, exclude: Option<usize>) -> Result<SignProfile<T>> {
        check_dim(self.dim(), x.len())?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite query point".into()));
        }
        let wx = self.whitener.apply(x)?;
        Ok(self.profile_whitened(wx.view(), exclude))
    }

    /// As [`ClassSample::profile`] but for a query that is already whitened with this class's whitener.
    pub fn profile_whitened(&self, wx: ArrayView1<'_, T>, exclude: Option<usize>) -> SignProfile<T> {
        let n = self.len();
        let d = self.dim();
        let m = n - usize::from(exclude.is_some());
        let mut units = Array2::<T>::zeros((m, d));
        let mut sq_norms = Vec::with_capacity(m);
        let threshold = T::lit(ZERO_NORM);
        let mut r = 0;
        for (i, xi) in self.whitened.rows().into_iter().enumerate() {
            if Some(i) == exclude {
                continue;
            }
            let mut row = units.row_mut(r);
            let mut s2 = T::zero();
            for ((o, &a), &b) in row.iter_mut().zip(wx.iter()).zip(xi.iter()) {
                let t = a - b;
                *o = t;
                s2 = s2 + t * t;
            }
            let norm = s2.sqrt();
            if norm < threshold {
                row.fill(T::zero());
            } else {
                row.mapv_inplace(|t| t / norm);
            }
            sq_norms.push(s2);
            r += 1;
        }
        SignProfile { units, sq_norms }
    }
}

/// Unit vectors and squared norms of `t_i = W(x − x_i)` for one query and one class.
///
/// Bandwidth-independent, so one profile serves SPD and every LSPD bandwidth.
#[derive(Debug, Clone)]
pub struct SignProfile<T> {
    units: Array2<T>,
    sq_norms: Vec<T>,
}

impl<T: Scalar> SignProfile<T> {
    pub fn len(&self) -> usize {
        self.sq_norms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sq_norms.is_empty()
    }

    pub fn spd(&self) -> T {
        let n = T::from_usize_lossy(self.len());
        let mean = self.units.sum_axis(Axis(0));
        let norm = mean.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt() / n;
        (T::one() - norm).max(T::zero()).min(T::one())
    }

    /// The two terms `(1/n)Σ K_h(t_i)` and `‖(1/n)Σ K_h(t_i)u(t_i)‖` of `Γ_h`, before rescaling.
    pub fn gamma_terms(&self, h: T, kernel: &KernelSpec) -> (T, T) {
        let (log_scale, s1, v) = self.weighted_sums(h, kernel);
        let n = T::from_usize_lossy(self.len());
        let scale = log_scale.exp() / n;
        (scale * s1, scale * v)
    }

    pub fn lspd(&self, h: T, kernel: &KernelSpec) -> T {
        let (mut log_scale, s1, v) = self.weighted_sums(h, kernel);
        if h > T::one() {
            log_scale = log_scale + T::from_usize_lossy(self.units.ncols()) * h.ln();
        }
        let n = T::from_usize_lossy(self.len());
        let diff = (s1 - v).max(T::zero());
        if diff == T::zero() {
            return T::zero();
        }
        (log_scale + diff.ln() - n.ln()).exp()
    }

    pub fn depth(&self, scale: DepthScale<T>, kernel: &KernelSpec) -> T {
        match scale {
            DepthScale::Spd => self.spd(),
            DepthScale::Lspd(h) => self.lspd(h, kernel),
        }
    }

    /// Returns `(L, S, V)` with `Σ K_h(t_i) = e^L S` and `‖Σ K_h(t_i) u_i‖ = e^L V`.
    fn weighted_sums(&self, h: T, kernel: &KernelSpec) -> (T, T, T) {
        let d = T::from_usize_lossy(self.units.ncols());
        let inv_h2 = T::one() / (h * h);
        let exps: Vec<T> = self.sq_norms.iter().map(|&s2| kernel.log_shape(s2 * inv_h2)).collect();
        let top = exps.iter().copied().fold(T::neg_infinity(), T::max);
        let mut s1 = T::zero();
        let mut acc = Array1::<T>::zeros(self.units.ncols());
        for (row, &e) in self.units.rows().into_iter().zip(exps.iter()) {
            let w = (e - top).exp();
            s1 = s1 + w;
            acc.scaled_add(w, &row);
        }
        let v = acc.iter().fold(T::zero(), |a, &x| a + x * x).sqrt();
        let log_scale = kernel.log_norm::<T>() - d * h.ln() + top;
        (log_scale, s1, v)
    }
}

fn validate_bandwidth<T: Scalar>(h: T) -> Result<()> {
    if h > T::zero() && h.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("bandwidth must be positive and finite, got {h}")))
    }
}

/// Empirical spatial depth of `x` with respect to `data` after whitening.
pub fn spd<T: Scalar>(x: ArrayView1<'_, T>, data: ArrayView2<'_, T>, w: &Whitener<T>) -> Result<T> {
    let sample = ClassSample::new(data, w.clone())?;
    Ok(sample.profile(x, None)?.spd())
}

/// Empirical localized spatial depth at bandwidth `h`.
pub fn lspd<T: Scalar>(
    x: ArrayView1<'_, T>,
    data: ArrayView2<'_, T>,
    w: &Whitener<T>,
    h: T,
    kernel: &KernelSpec,
) -> Result<T> {
    validate_bandwidth(h)?;
    let sample = ClassSample::new(data, w.clone())?;
    Ok(sample.profile(x, None)?.lspd(h, kernel))
}

/// Training classes prepared for repeated depth-feature evaluation.
#[derive(Debug, Clone)]
pub struct DepthReference<T> {
    classes: Vec<ClassSample<T>>,
    kernel: KernelSpec,
}

impl<T: Scalar> DepthReference<T> {
    pub fn new(perclass: &[ArrayView2<'_, T>], whiteners: &[Whitener<T>], kernel: KernelSpec) -> Result<Self> {
        if perclass.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "depth features need at least 2 classes, got {}",
                perclass.len()
            )));
        }
        check_dim(perclass.len(), whiteners.len())?;
        let d = perclass[0].ncols();
        check_dim(d, kernel.dim)?;
        let classes = perclass
            .iter()
            .zip(whiteners)
            .map(|(data, w)| {
                check_dim(d, data.ncols())?;
                ClassSample::new(*data, w.clone())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DepthReference { classes, kernel })
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn dim(&self) -> usize {
        self.kernel.dim
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn classes(&self) -> &[ClassSample<T>] {
        &self.classes
    }

    pub fn class_sizes(&self) -> Vec<usize> {
        self.classes.iter().map(|c| c.len()).collect()
    }

    /// Sign profiles of `x` against every class.
    pub fn profiles(&self, x: ArrayView1<'_, T>) -> Result<Vec<SignProfile<T>>> {
        self.classes.iter().map(|c| c.profile(x, None)).collect()
    }

    /// Sign profiles of training point `index` of class `class`, leaving it out of its own class.
    pub fn profiles_loo(&self, class: usize, index: usize) -> Result<Vec<SignProfile<T>>> {
        let own = self
            .classes
            .get(class)
            .ok_or_else(|| Error::InvalidParameter(format!("class index {class} out of range")))?;
        if index >= own.len() {
            return Err(Error::InvalidParameter(format!("training index {index} out of range")));
        }
        if own.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "leave-one-out needs at least 2 points in class {class}"
            )));
        }
        let x = own.raw.row(index);
        self.classes
            .iter()
            .enumerate()
            .map(|(j, c)| {
                if j == class {
                    Ok(c.profile_whitened(c.whitened.row(index), Some(index)))
                } else {
                    c.profile(x, None)
                }
            })
            .collect()
    }

    pub fn features(&self, x: ArrayView1<'_, T>, scale: DepthScale<T>) -> Result<DepthFeatures<T>> {
        if let DepthScale::Lspd(h) = scale {
            validate_bandwidth(h)?;
        }
        let profiles = self.profiles(x)?;
        Ok(self.assemble(&profiles, scale))
    }

    pub fn features_loo(&self, class: usize, index: usize, scale: DepthScale<T>) -> Result<DepthFeatures<T>> {
        if let DepthScale::Lspd(h) = scale {
            validate_bandwidth(h)?;
        }
        let profiles = self.profiles_loo(class, index)?;
        Ok(self.assemble(&profiles, scale))
    }

    pub fn assemble(&self, profiles: &[SignProfile<T>], scale: DepthScale<T>) -> DepthFeatures<T> {
        DepthFeatures {
            values: profiles.iter().map(|p| p.depth(scale, &self.kernel)).collect(),
            scale,
        }
    }

    /// Feature matrix (one row per point) for a batch of query points, evaluated in parallel.
    pub fn feature_matrix(&self, points: ArrayView2<'_, T>, scale: DepthScale<T>) -> Result<Array2<T>> {
        check_dim(self.dim(), points.ncols())?;
        let rows = (0..points.nrows())
            .into_par_iter()
            .map(|i| self.features(points.row(i), scale).map(|f| f.values))
            .collect::<Result<Vec<_>>>()?;
        Ok(stack_rows(&rows, self.num_classes()))
    }
}

pub(crate) fn stack_rows<T: Scalar>(rows: &[Array1<T>], width: usize) -> Array2<T> {
    let mut out = Array2::zeros((rows.len(), width));
    for (mut o, r) in out.rows_mut().into_iter().zip(rows) {
        o.assign(r);
    }
    out
}

/// Depth features of `x` against each class (`scale` selects SPD or LSPD at a bandwidth).
pub fn depth_features<T: Scalar>(
    x: ArrayView1<'_, T>,
    perclass: &[ArrayView2<'_, T>],
    whiteners: &[Whitener<T>],
    scale: DepthScale<T>,
) -> Result<DepthFeatures<T>> {
    let d = x.len();
    DepthReference::new(perclass, whiteners, KernelSpec::gaussian(d))?.features(x, scale)
}

/// Leave-one-out depth features of training point `index` of class `class`.
pub fn depth_features_loo<T: Scalar>(
    class: usize,
    index: usize,
    perclass: &[ArrayView2<'_, T>],
    whiteners: &[Whitener<T>],
    scale: DepthScale<T>,
) -> Result<DepthFeatures<T>> {
    let d = perclass.first().map(|c| c.ncols()).unwrap_or(0);
    DepthReference::new(perclass, whiteners, KernelSpec::gaussian(d))?.features_loo(class, index, scale)
}
