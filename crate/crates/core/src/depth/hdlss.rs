//! Limiting depth vectors as the dimension grows with the sample size fixed.
//!
//! Parameters are the per-coordinate second-moment limits `a_j` and the
//! cross-moment limits `b_ji`, from which `σ_j² = a_j − b_jj` and
//! `ν_ji = b_jj − 2 b_ji + b_ii` follow.

use ndarray::{Array1, Array2};

use super::KernelSpec;
use crate::error::{check_dim, Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct HdlssParams<T> {
    a: Array1<T>,
    b: Array2<T>,
    sigma2: Array1<T>,
    nu: Array2<T>,
}

impl<T: Scalar> HdlssParams<T> {
    pub fn new(a: Array1<T>, b: Array2<T>) -> Result<Self> {
        let j = a.len();
        check_dim(j, b.nrows())?;
        check_dim(j, b.ncols())?;
        if j < 1 {
            return Err(Error::InvalidParameter("need at least one class".into()));
        }
        let tol = T::lit(1e-12);
        for r in 0..j {
            for c in 0..j {
                if (b[[r, c]] - b[[c, r]]).abs() > tol * (T::one() + b[[r, c]].abs()) {
                    return Err(Error::InvalidParameter("b must be symmetric".into()));
                }
            }
        }
        let sigma2 = Array1::from_iter((0..j).map(|k| a[k] - b[[k, k]]));
        if sigma2.iter().any(|&s| !(s > T::zero()) || !s.is_finite()) {
            return Err(Error::InvalidParameter("σ_j² = a_j − b_jj must be positive".into()));
        }
        let nu = Array2::from_shape_fn((j, j), |(r, c)| {
            if r == c {
                T::zero()
            } else {
                b[[r, r]] - T::lit(2.0) * b[[r, c]] + b[[c, c]]
            }
        });
        if nu.iter().any(|&v| v < -tol || !v.is_finite()) {
            return Err(Error::InvalidParameter("ν_ji must be non-negative".into()));
        }
        let nu = nu.mapv(|v| v.max(T::zero()));
        Ok(HdlssParams { a, b, sigma2, nu })
    }

    /// Parameters for classes with per-coordinate variances `sigma2` and
    /// per-coordinate means `means` (so `ν_ji = (μ_j − μ_i)²`).
    pub fn from_moments(sigma2: Array1<T>, means: Array1<T>) -> Result<Self> {
        check_dim(sigma2.len(), means.len())?;
        let a = Array1::from_iter(sigma2.iter().zip(means.iter()).map(|(&s, &m)| s + m * m));
        let j = means.len();
        let b = Array2::from_shape_fn((j, j), |(r, c)| means[r] * means[c]);
        Self::new(a, b)
    }

    pub fn num_classes(&self) -> usize {
        self.a.len()
    }

    pub fn a(&self) -> &Array1<T> {
        &self.a
    }

    pub fn b(&self) -> &Array2<T> {
        &self.b
    }

    pub fn sigma2(&self) -> &Array1<T> {
        &self.sigma2
    }

    pub fn nu(&self) -> &Array2<T> {
        &self.nu
    }

    /// Scale constants `e_jj = √2 σ_j`, `e_ji = √(σ_j² + σ_i² + ν_ji)`.
    pub fn e(&self) -> Array2<T> {
        let j = self.num_classes();
        Array2::from_shape_fn((j, j), |(r, c)| {
            if r == c {
                (T::lit(2.0) * self.sigma2[r]).sqrt()
            } else {
                (self.sigma2[r] + self.sigma2[c] + self.nu[[r, c]]).sqrt()
            }
        })
    }
}

/// Limit of the SPD vector of an observation from class `j` (row `j` of the result).
pub fn hdlss_spd_limits<T: Scalar>(p: &HdlssParams<T>) -> Array2<T> {
    let j = p.num_classes();
    let diag = T::one() - T::lit(0.5).sqrt();
    Array2::from_shape_fn((j, j), |(r, c)| {
        if r == c {
            diag
        } else {
            let s = p.sigma2[r] + p.nu[[r, c]];
            T::one() - (s / (s + p.sigma2[c])).sqrt()
        }
    })
}

/// Limit of the LSPD vector when `√d/h → a_limit`.
///
/// `a_limit = 0` gives `g(0)·c`, a finite positive value gives `g(e_ji A) c_ji`,
/// and `+∞` (the `√d/h → ∞` regime with `h > 1`) gives the zero matrix.
pub fn hdlss_lspd_limits<T: Scalar>(p: &HdlssParams<T>, a_limit: T, kernel: &KernelSpec) -> Result<Array2<T>> {
    if a_limit.is_nan() || a_limit < T::zero() {
        return Err(Error::InvalidParameter(format!("A must be non-negative, got {a_limit}")));
    }
    let j = p.num_classes();
    if a_limit.is_infinite() {
        return Ok(Array2::zeros((j, j)));
    }
    let c = hdlss_spd_limits(p);
    let e = p.e();
    Ok(Array2::from_shape_fn((j, j), |(r, s)| kernel.profile(e[[r, s]] * a_limit) * c[[r, s]]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn params(s1: f64, s2: f64, mu2: f64) -> HdlssParams<f64> {
        HdlssParams::from_moments(array![s1, s2], array![0.0, mu2.sqrt()]).unwrap()
    }

    #[test]
    fn equal_scales_give_constant_matrix() {
        let c = hdlss_spd_limits(&params(1.0, 1.0, 0.0));
        for v in c.iter() {
            assert_abs_diff_eq!(*v, 1.0 - 0.5f64.sqrt(), epsilon = 1e-15);
            assert_abs_diff_eq!(*v, 0.29289, epsilon = 1e-5);
        }
    }

    #[test]
    fn unequal_scales() {
        let c = hdlss_spd_limits(&params(1.0, 4.0, 0.0));
        assert_abs_diff_eq!(c[[0, 1]], 1.0 - (0.2f64).sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(c[[0, 1]], 0.55279, epsilon = 1e-5);
        // row 2: 1 − √(4/5)
        assert_abs_diff_eq!(c[[1, 0]], 1.0 - (0.8f64).sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(c[[0, 0]], 1.0 - 0.5f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(c[[1, 1]], 1.0 - 0.5f64.sqrt(), epsilon = 1e-15);
        assert!(c.iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn lspd_limit_regimes() {
        let p = params(1.0, 1.0, 0.0);
        let k = KernelSpec::gaussian_profile(1);
        let c = hdlss_spd_limits(&p);
        let zero = hdlss_lspd_limits(&p, 0.0, &k).unwrap();
        assert_eq!(zero, c);
        let dens = KernelSpec::gaussian(3);
        let zero_d = hdlss_lspd_limits(&p, 0.0, &dens).unwrap();
        let g0 = (2.0 * std::f64::consts::PI).powf(-1.5);
        for (a, b) in zero_d.iter().zip(c.iter()) {
            assert_abs_diff_eq!(*a, g0 * b, epsilon = 1e-15);
        }
        let inf = hdlss_lspd_limits(&p, f64::INFINITY, &k).unwrap();
        assert!(inf.iter().all(|&v| v == 0.0));
        let one = hdlss_lspd_limits(&p, 1.0, &k).unwrap();
        assert_abs_diff_eq!(one[[0, 0]], (-1.0f64).exp() * (1.0 - 0.5f64.sqrt()), epsilon = 1e-15);
        assert_abs_diff_eq!(one[[0, 0]], 0.10775, epsilon = 1e-5);
        assert!(hdlss_lspd_limits(&p, -1.0, &k).is_err());
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(HdlssParams::new(array![1.0, 1.0], array![[1.0, 0.0], [0.0, 0.0]]).is_err());
        assert!(HdlssParams::new(array![2.0, 2.0], array![[0.0, 1.0], [0.0, 0.0]]).is_err());
        let p = HdlssParams::new(array![2.0, 3.0], array![[1.0, 0.5], [0.5, 1.0]]).unwrap();
        assert_abs_diff_eq!(p.sigma2()[0], 1.0);
        assert_abs_diff_eq!(p.nu()[[0, 1]], 1.0);
        assert_eq!(p.nu()[[0, 0]], 0.0);
    }

    #[test]
    fn rows_distinct_iff_scales_or_locations_differ() {
        let grid = [0.5, 1.0, 2.0, 4.0];
        let shifts = [0.0, 0.25, 1.0];
        for &s1 in &grid {
            for &s2 in &grid {
                for &mu2 in &shifts {
                    let c = hdlss_spd_limits(&params(s1, s2, mu2));
                    let same = (c[[0, 0]] - c[[1, 0]]).abs() < 1e-12 && (c[[0, 1]] - c[[1, 1]]).abs() < 1e-12;
                    let expect_same = s1 == s2 && mu2 == 0.0;
                    assert_eq!(same, expect_same, "s1={s1} s2={s2} nu={mu2}");
                    for a in [0.5, 1.0] {
                        let cp = hdlss_lspd_limits(&params(s1, s2, mu2), a, &KernelSpec::gaussian_profile(1)).unwrap();
                        let same_p =
                            (cp[[0, 0]] - cp[[1, 0]]).abs() < 1e-12 && (cp[[0, 1]] - cp[[1, 1]]).abs() < 1e-12;
                        assert_eq!(same_p, expect_same);
                    }
                }
            }
        }
    }
}
