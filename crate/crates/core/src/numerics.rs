//! Scatter estimation and whitening transforms.
//!
//! A [`Whitener`] represents `Σ^{-1/2}` for a class scatter estimate `Σ`.
//! Depth computations apply it to difference vectors `x − x_i`; because the
//! map is linear, applying it to both points first gives the same result.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut1};

use crate::error::{check_dim, Error, Result};
use crate::linalg;
use crate::scalar::Scalar;

/// Relative eigenvalue floor: eigenvalues below `EIGEN_FLOOR · trace/d` are raised to it.
pub const EIGEN_FLOOR: f64 = 1e-8;

/// How a class scatter matrix is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScatterMode {
    Full,
    Diagonal,
    Identity,
}

impl ScatterMode {
    /// Default choice for a class of `n` observations in dimension `d`:
    /// full scatter when `n > 2d`, per-coordinate scales when `n ≥ 2`,
    /// identity otherwise.
    pub fn auto(n: usize, d: usize) -> Self {
        if n > 2 * d {
            ScatterMode::Full
        } else if n >= 2 {
            ScatterMode::Diagonal
        } else {
            ScatterMode::Identity
        }
    }
}

impl fmt::Display for ScatterMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ScatterMode::Full => "full",
            ScatterMode::Diagonal => "diagonal",
            ScatterMode::Identity => "identity",
        };
        f.write_str(s)
    }
}

impl FromStr for ScatterMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "full" => Ok(ScatterMode::Full),
            "diagonal" | "diag" => Ok(ScatterMode::Diagonal),
            "identity" | "none" => Ok(ScatterMode::Identity),
            other => Err(Error::InvalidParameter(format!("unknown scatter mode '{other}'"))),
        }
    }
}

/// Scatter policy used by higher layers: a fixed mode or the size-based [`ScatterMode::auto`] rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ScatterPolicy {
    #[default]
    Auto,
    Fixed(ScatterMode),
}

impl ScatterPolicy {
    pub fn resolve(self, n: usize, d: usize) -> ScatterMode {
        match self {
            ScatterPolicy::Auto => ScatterMode::auto(n, d),
            ScatterPolicy::Fixed(m) => m,
        }
    }
}

impl fmt::Display for ScatterPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScatterPolicy::Auto => f.write_str("auto"),
            ScatterPolicy::Fixed(m) => m.fmt(f),
        }
    }
}

impl FromStr for ScatterPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            Ok(ScatterPolicy::Auto)
        } else {
            s.parse().map(ScatterPolicy::Fixed)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Transform<T> {
    Full(Array2<T>),
    Diagonal(Array1<T>),
    Identity,
}

/// Linear standardizing operator `Σ^{-1/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Whitener<T> {
    transform: Transform<T>,
    dim: usize,
    log_det: T,
    floored: usize,
}

impl<T: Scalar> Whitener<T> {
    pub fn identity(dim: usize) -> Self {
        Whitener { transform: Transform::Identity, dim, log_det: T::zero(), floored: 0 }
    }

    /// Diagonal whitener from per-coordinate scale factors (the reciprocals of standard deviations).
    pub fn diagonal(factors: Array1<T>) -> Result<Self> {
        if factors.iter().any(|&f| !(f > T::zero()) || !f.is_finite()) {
            return Err(Error::InvalidParameter("diagonal factors must be positive".into()));
        }
        let log_det = factors.iter().map(|f| f.ln()).sum();
        Ok(Whitener { dim: factors.len(), transform: Transform::Diagonal(factors), log_det, floored: 0 })
    }

    /// Builds the whitener from an already-estimated covariance matrix.
    pub fn from_covariance(cov: ArrayView2<'_, T>, mode: ScatterMode) -> Result<Self> {
        let d = cov.nrows();
        check_dim(d, cov.ncols())?;
        if cov.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidData("non-finite covariance entry".into()));
        }
        match mode {
            ScatterMode::Identity => Ok(Self::identity(d)),
            ScatterMode::Diagonal => {
                let var = Array1::from_iter((0..d).map(|i| cov[[i, i]]));
                Self::from_variances(var)
            }
            ScatterMode::Full => {
                let (vals, vecs) = linalg::symmetric_eigen(cov)?;
                let floor = eigen_floor(vals.iter().copied().sum::<T>(), d);
                let mut floored = 0;
                let inv_sqrt: Array1<T> = vals.mapv(|v| {
                    if v < floor {
                        floored += 1;
                        T::one() / floor.sqrt()
                    } else {
                        T::one() / v.sqrt()
                    }
                });
                let log_det = inv_sqrt.iter().map(|x| x.ln()).sum();
                let mut w = Array2::<T>::zeros((d, d));
                for a in 0..d {
                    for b in a..d {
                        let mut s = T::zero();
                        for k in 0..d {
                            s = s + vecs[[a, k]] * inv_sqrt[k] * vecs[[b, k]];
                        }
                        w[[a, b]] = s;
                        w[[b, a]] = s;
                    }
                }
                Ok(Whitener { transform: Transform::Full(w), dim: d, log_det, floored })
            }
        }
    }

    fn from_variances(var: Array1<T>) -> Result<Self> {
        let d = var.len();
        let floor = eigen_floor(var.iter().copied().sum::<T>(), d);
        let mut floored = 0;
        let factors = var.mapv(|v| {
            if v < floor {
                floored += 1;
                T::one() / floor.sqrt()
            } else {
                T::one() / v.sqrt()
            }
        });
        let mut w = Self::diagonal(factors)?;
        w.floored = floored;
        Ok(w)
    }

    pub fn mode(&self) -> ScatterMode {
        match self.transform {
            Transform::Full(_) => ScatterMode::Full,
            Transform::Diagonal(_) => ScatterMode::Diagonal,
            Transform::Identity => ScatterMode::Identity,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `log |Σ^{-1/2}|`, i.e. `−½ log |Σ|` for the (floored) scatter estimate.
    pub fn log_det(&self) -> T {
        self.log_det
    }

    /// Number of eigenvalues (or variances) raised to the floor; nonzero means the scatter was singular.
    pub fn floored_count(&self) -> usize {
        self.floored
    }

    /// Dense `d × d` matrix of the operator.
    pub fn matrix(&self) -> Array2<T> {
        match &self.transform {
            Transform::Full(w) => w.clone(),
            Transform::Diagonal(f) => Array2::from_diag(f),
            Transform::Identity => Array2::eye(self.dim),
        }
    }

    /// Diagonal scale factors, when the whitener is diagonal.
    pub fn diagonal_factors(&self) -> Option<ArrayView1<'_, T>> {
        match &self.transform {
            Transform::Diagonal(f) => Some(f.view()),
            _ => None,
        }
    }

    pub fn apply(&self, t: ArrayView1<'_, T>) -> Result<Array1<T>> {
        check_dim(self.dim, t.len())?;
        let mut out = Array1::zeros(self.dim);
        self.apply_into(t, out.view_mut());
        Ok(out)
    }

    /// Writes `Σ^{-1/2} t` into `out`; lengths must already match.
    pub fn apply_into(&self, t: ArrayView1<'_, T>, mut out: ArrayViewMut1<'_, T>) {
        match &self.transform {
            Transform::Full(w) => {
                for (o, row) in out.iter_mut().zip(w.rows()) {
                    *o = row.iter().zip(t.iter()).fold(T::zero(), |acc, (&a, &b)| acc + a * b);
                }
            }
            Transform::Diagonal(f) => {
                for ((o, &s), &x) in out.iter_mut().zip(f.iter()).zip(t.iter()) {
                    *o = s * x;
                }
            }
            Transform::Identity => out.assign(&t),
        }
    }

    /// Applies the whitener to every row of an `n × d` sample.
    pub fn apply_rows(&self, data: ArrayView2<'_, T>) -> Result<Array2<T>> {
        check_dim(self.dim, data.ncols())?;
        let mut out = Array2::zeros(data.raw_dim());
        for (row, out_row) in data.rows().into_iter().zip(out.rows_mut()) {
            self.apply_into(row, out_row);
        }
        Ok(out)
    }
}

fn eigen_floor<T: Scalar>(trace: T, d: usize) -> T {
    let f = T::lit(EIGEN_FLOOR) * trace / T::from_usize_lossy(d.max(1));
    if f > T::zero() {
        f
    } else {
        // zero-scatter sample: any positive floor keeps the transform finite
        T::lit(EIGEN_FLOOR)
    }
}

/// Estimates the class scatter from an `n × d` sample and returns its inverse square root.
pub fn estimate_scatter<T: Scalar>(data: ArrayView2<'_, T>, mode: ScatterMode) -> Result<Whitener<T>> {
    let n = data.nrows();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "scatter estimation needs at least 2 observations, got {n}"
        )));
    }
    if data.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidData("non-finite observation".into()));
    }
    match mode {
        ScatterMode::Identity => Ok(Whitener::identity(data.ncols())),
        ScatterMode::Diagonal => Whitener::from_variances(linalg::sample_variances(data)?),
        ScatterMode::Full => Whitener::from_covariance(linalg::sample_covariance(data)?.view(), mode),
    }
}

/// Applies `w` to `t`.
pub fn whiten<T: Scalar>(w: &Whitener<T>, t: ArrayView1<'_, T>) -> Result<Array1<T>> {
    w.apply(t)
}

/// Pooled within-class covariance `Σ_j Σ_i (x − x̄_j)(x − x̄_j)ᵀ / (n − J)`.
pub fn pooled_covariance<T: Scalar>(classes: &[ArrayView2<'_, T>]) -> Result<Array2<T>> {
    let d = classes
        .first()
        .map(|c| c.ncols())
        .ok_or_else(|| Error::InsufficientData("no classes".into()))?;
    let mut total = Array2::<T>::zeros((d, d));
    let mut n = 0usize;
    for c in classes {
        check_dim(d, c.ncols())?;
        if c.nrows() == 0 {
            continue;
        }
        let (s, _) = linalg::scatter_sums(*c);
        total += &s;
        n += c.nrows();
    }
    let nonempty = classes.iter().filter(|c| c.nrows() > 0).count();
    if n <= nonempty {
        return Err(Error::InsufficientData("pooled covariance needs n > J".into()));
    }
    let denom = T::from_usize_lossy(n - nonempty);
    Ok(total.mapv(|x| x / denom))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn identity_passes_through() {
        let data = array![[1.0, 5.0], [2.0, -1.0], [0.0, 3.0]];
        let w = estimate_scatter(data.view(), ScatterMode::Identity).unwrap();
        assert_eq!(w.apply(array![1.0, 2.0].view()).unwrap(), array![1.0, 2.0]);
    }

    #[test]
    fn diagonal_uses_reciprocal_sd() {
        let data = array![[0.0], [2.0], [4.0]];
        let w = estimate_scatter(data.view(), ScatterMode::Diagonal).unwrap();
        assert_abs_diff_eq!(w.diagonal_factors().unwrap()[0], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn diagonal_apply_is_componentwise() {
        let w = Whitener::diagonal(array![0.5, 1.0 / 3.0]).unwrap();
        let out = whiten(&w, array![2.0, 3.0].view()).unwrap();
        assert_abs_diff_eq!(out[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(out[1], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn errors() {
        let one = array![[1.0, 2.0]];
        assert!(matches!(
            estimate_scatter(one.view(), ScatterMode::Full),
            Err(Error::InsufficientData(_))
        ));
        let bad = array![[1.0, f64::NAN], [0.0, 1.0]];
        assert!(matches!(
            estimate_scatter(bad.view(), ScatterMode::Diagonal),
            Err(Error::InvalidData(_))
        ));
        let w = Whitener::<f64>::identity(2);
        assert!(matches!(w.apply(array![1.0].view()), Err(Error::Shape { .. })));
    }

    #[test]
    fn floor_keeps_singular_scatter_finite() {
        // points on the line y = 2x
        let data = array![[0.0f64, 0.0], [1.0, 2.0], [2.0, 4.0], [3.0, 6.0]];
        let w = estimate_scatter(data.view(), ScatterMode::Full).unwrap();
        assert!(w.matrix().iter().all(|x| x.is_finite()));
        assert_eq!(w.floored_count(), 1);
        let constant = array![[1.0f64, 1.0], [1.0, 1.0]];
        let w = estimate_scatter(constant.view(), ScatterMode::Diagonal).unwrap();
        assert!(w.diagonal_factors().unwrap().iter().all(|x| x.is_finite()));
    }

    #[test]
    fn auto_mode_rule() {
        assert_eq!(ScatterMode::auto(100, 5), ScatterMode::Full);
        assert_eq!(ScatterMode::auto(100, 100), ScatterMode::Diagonal);
        assert_eq!(ScatterMode::auto(10, 5), ScatterMode::Diagonal);
        assert_eq!(ScatterMode::auto(1, 5), ScatterMode::Identity);
        assert_eq!("auto".parse::<ScatterPolicy>().unwrap(), ScatterPolicy::Auto);
        assert_eq!(
            "diag".parse::<ScatterPolicy>().unwrap(),
            ScatterPolicy::Fixed(ScatterMode::Diagonal)
        );
    }

    #[test]
    fn pooled_covariance_of_shifted_copies() {
        let a = array![[0.0], [2.0]];
        let b = array![[10.0], [12.0]];
        let c = pooled_covariance(&[a.view(), b.view()]).unwrap();
        assert_abs_diff_eq!(c[[0, 0]], 2.0, epsilon = 1e-12);
    }
}
