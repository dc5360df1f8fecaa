//! Additive multinomial logistic model on depth features.
//!
//! For `J` classes and a `J`-vector of depth features `z`, the model is
//!
//! `p(j | z) = exp Φ_j(z) / (1 + Σ_{k<J} exp Φ_k(z))`, `Φ_J ≡ 0`,
//!
//! with `Φ_j(z) = α_j + Σ_i φ_ji(z_i)` and each `φ_ji` a linear combination of
//! the basis functions of feature `i`. Coefficients maximize the ridge-penalized
//! log-likelihood.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{check_dim, Error, Result};
use crate::scalar::Scalar;

mod basis;
mod fit;
mod io;

pub use basis::{build_basis, BSpline, FeatureBasis};
pub use fit::{newton_maximize, NewtonFit, NewtonOptions, PenalizedLikelihood};

/// Fitting configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GamConfig<T> {
    /// Basis functions per feature (1 = linear).
    pub df: usize,
    /// Ridge weight on non-intercept coefficients.
    pub lambda: T,
    pub newton: NewtonOptions<T>,
}

impl<T: Scalar> Default for GamConfig<T> {
    fn default() -> Self {
        GamConfig { df: 5, lambda: T::lit(1e-3), newton: NewtonOptions::default() }
    }
}

impl<T: Scalar> GamConfig<T> {
    pub fn new(df: usize, lambda: T) -> Self {
        GamConfig { df, lambda, ..Default::default() }
    }
}

/// Basis expansion for all features; maps a feature vector to a design row.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSpec<T> {
    pub features: Vec<FeatureBasis<T>>,
}

impl<T: Scalar> BasisSpec<T> {
    /// Design width: intercept plus every feature's columns.
    pub fn width(&self) -> usize {
        1 + self.features.iter().map(|f| f.width()).sum::<usize>()
    }

    pub fn design_row(&self, z: ArrayView1<'_, T>) -> Result<Array1<T>> {
        check_dim(self.features.len(), z.len())?;
        let mut row = Array1::zeros(self.width());
        self.fill_row(z, row.as_slice_mut().expect("contiguous"));
        Ok(row)
    }

    fn fill_row(&self, z: ArrayView1<'_, T>, out: &mut [T]) {
        out[0] = T::one();
        let mut at = 1;
        for (f, &v) in self.features.iter().zip(z.iter()) {
            let w = f.width();
            f.eval_into(v, &mut out[at..at + w]);
            at += w;
        }
    }

    pub fn design_matrix(&self, z: ArrayView2<'_, T>) -> Result<Array2<T>> {
        check_dim(self.features.len(), z.ncols())?;
        let mut out = Array2::zeros((z.nrows(), self.width()));
        for (row, mut o) in z.rows().into_iter().zip(out.rows_mut()) {
            self.fill_row(row, o.as_slice_mut().expect("contiguous"));
        }
        Ok(out)
    }

    /// Builds a basis per feature column, falling back to a linear term for
    /// columns with too few distinct values.
    pub fn from_training(z: ArrayView2<'_, T>, df: usize) -> Result<(Self, Array2<T>)> {
        let mut features = Vec::with_capacity(z.ncols());
        for col in z.columns() {
            let basis = match build_basis(col, df) {
                Ok((b, _)) => b,
                Err(Error::DegenerateFeature(msg)) => {
                    log::debug!("feature falls back to linear term: {msg}");
                    FeatureBasis::Linear
                }
                Err(e) => return Err(e),
            };
            features.push(basis);
        }
        let spec = BasisSpec { features };
        let design = spec.design_matrix(z)?;
        Ok((spec, design))
    }
}

/// Fitted additive logistic model.
#[derive(Debug, Clone, PartialEq)]
pub struct GamModel<T> {
    pub basis: BasisSpec<T>,
    /// `(J−1) × P` coefficients, column 0 the intercepts.
    pub coefficients: Array2<T>,
    pub num_classes: usize,
    pub df: usize,
    pub lambda: T,
    pub iterations: usize,
    pub converged: bool,
}

impl<T: Scalar> GamModel<T> {
    /// Additive predictors `Φ_1..Φ_{J−1}` at `z`.
    pub fn predictors(&self, z: ArrayView1<'_, T>) -> Result<Array1<T>> {
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite feature value".into()));
        }
        let row = self.basis.design_row(z)?;
        Ok(self.coefficients.dot(&row))
    }

    pub fn predict_posterior(&self, z: ArrayView1<'_, T>) -> Result<Array1<T>> {
        let eta = self.predictors(z)?;
        let mut out = Array1::zeros(self.num_classes);
        fit::softmax_with_reference(eta.as_slice().expect("contiguous"), out.as_slice_mut().expect("contiguous"));
        if out.iter().any(|p| !p.is_finite()) {
            return Err(Error::Numerical("non-finite posterior".into()));
        }
        Ok(out)
    }

    pub fn classify(&self, z: ArrayView1<'_, T>) -> Result<usize> {
        Ok(argmax(self.predict_posterior(z)?.view()))
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax<T: Scalar>(v: ArrayView1<'_, T>) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Fits the additive model to an `n × J` feature matrix with class indices `0..J`.
pub fn fit_gam<T: Scalar>(z: ArrayView2<'_, T>, labels: &[usize], cfg: &GamConfig<T>) -> Result<GamModel<T>> {
    let num_classes = z.ncols();
    check_dim(z.nrows(), labels.len())?;
    if num_classes < 2 {
        return Err(Error::InvalidLabels("need at least two classes".into()));
    }
    let mut present = vec![false; num_classes];
    for &y in labels {
        if y >= num_classes {
            return Err(Error::InvalidLabels(format!("label {y} out of range for {num_classes} classes")));
        }
        present[y] = true;
    }
    if let Some(missing) = present.iter().position(|&p| !p) {
        return Err(Error::InvalidLabels(format!("class {missing} has no observations")));
    }
    if z.nrows() < num_classes * cfg.df + 1 {
        return Err(Error::InsufficientData(format!(
            "{} observations for {} basis columns",
            z.nrows(),
            num_classes * cfg.df + 1
        )));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidData("non-finite feature value".into()));
    }
    let (basis, design) = BasisSpec::from_training(z, cfg.df)?;
    let obj = PenalizedLikelihood::new(design.view(), labels, num_classes, cfg.lambda)?;
    let fit = newton_maximize(&obj, cfg.newton)?;
    Ok(GamModel {
        basis,
        coefficients: fit.beta,
        num_classes,
        df: cfg.df,
        lambda: cfg.lambda,
        iterations: fit.iterations,
        converged: fit.converged,
    })
}

/// Posterior class probabilities under `m`.
pub fn predict_posterior<T: Scalar>(m: &GamModel<T>, z: ArrayView1<'_, T>) -> Result<Array1<T>> {
    m.predict_posterior(z)
}

/// Most probable class under `m` (lowest index on ties).
pub fn classify<T: Scalar>(m: &GamModel<T>, z: ArrayView1<'_, T>) -> Result<usize> {
    m.classify(z)
}

#[cfg(test)]
mod tests;
