//! Small dense linear-algebra kernels: symmetric eigendecomposition,
//! Cholesky factorization and covariance estimation.
//!
//! The matrices handled here are small (data dimension for scatter
//! matrices, a few dozen parameters for the additive model), so plain
//! O(n^3) routines are adequate.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Symmetric eigendecomposition `a = V diag(λ) Vᵀ` by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order with the matching eigenvectors as
/// columns of `V`.
pub fn symmetric_eigen<T: Scalar>(a: ArrayView2<'_, T>) -> Result<(Array1<T>, Array2<T>)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Shape { expected: n, found: a.ncols() });
    }
    let mut m = a.to_owned();
    let mut v = Array2::<T>::eye(n);
    let two = T::lit(2.0);
    let scale: T = m.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt();
    let tol = T::epsilon() * T::epsilon() * scale * scale;

    for _sweep in 0..100 {
        let mut off = T::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off = off + m[[p, q]] * m[[p, q]];
            }
        }
        if off <= tol || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq == T::zero() {
                    continue;
                }
                let app = m[[p, p]];
                let aqq = m[[q, q]];
                let theta = (aqq - app) / (two * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[[i, i]].partial_cmp(&m[[j, j]]).unwrap_or(std::cmp::Ordering::Equal));
    let values = Array1::from_iter(order.iter().map(|&i| m[[i, i]]));
    let vectors = v.select(Axis(1), &order);
    if values.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("non-finite eigenvalue".into()));
    }
    Ok((values, vectors))
}

/// Lower-triangular Cholesky factor `L` with `a = L Lᵀ`.
pub fn cholesky<T: Scalar>(a: ArrayView2<'_, T>) -> Result<Array2<T>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Shape { expected: n, found: a.ncols() });
    }
    let mut l = Array2::<T>::zeros((n, n));
    for j in 0..n {
        let mut diag = a[[j, j]];
        for k in 0..j {
            diag = diag - l[[j, k]] * l[[j, k]];
        }
        if !(diag > T::zero()) || !diag.is_finite() {
            return Err(Error::Numerical(format!(
                "matrix not positive definite (pivot {j})"
            )));
        }
        let ljj = diag.sqrt();
        l[[j, j]] = ljj;
        for i in (j + 1)..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s = s - l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / ljj;
        }
    }
    Ok(l)
}

/// Solves `L Lᵀ x = b` given the Cholesky factor.
pub fn cholesky_solve<T: Scalar>(l: ArrayView2<'_, T>, b: ArrayView1<'_, T>) -> Array1<T> {
    let n = l.nrows();
    let mut y = Array1::<T>::zeros(n);
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s = s - l[[i, k]] * y[k];
        }
        y[i] = s / l[[i, i]];
    }
    let mut x = Array1::<T>::zeros(n);
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s = s - l[[k, i]] * x[k];
        }
        x[i] = s / l[[i, i]];
    }
    x
}

/// Column means of an `n × d` sample.
pub fn column_means<T: Scalar>(data: ArrayView2<'_, T>) -> Array1<T> {
    let n = T::from_usize_lossy(data.nrows());
    let mut mean = Array1::<T>::zeros(data.ncols());
    for row in data.rows() {
        mean.zip_mut_with(&row, |m, &x| *m = *m + x);
    }
    mean.mapv_inplace(|m| m / n);
    mean
}

/// Centered cross-product matrix `Σ (x_i − x̄)(x_i − x̄)ᵀ` and the mean.
pub fn scatter_sums<T: Scalar>(data: ArrayView2<'_, T>) -> (Array2<T>, Array1<T>) {
    let d = data.ncols();
    let mean = column_means(data);
    let mut s = Array2::<T>::zeros((d, d));
    let mut centered = Array1::<T>::zeros(d);
    for row in data.rows() {
        centered.assign(&row);
        centered -= &mean;
        for a in 0..d {
            let ca = centered[a];
            for b in a..d {
                s[[a, b]] = s[[a, b]] + ca * centered[b];
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            s[[a, b]] = s[[b, a]];
        }
    }
    (s, mean)
}

/// Sample covariance with denominator `n − 1`.
pub fn sample_covariance<T: Scalar>(data: ArrayView2<'_, T>) -> Result<Array2<T>> {
    let n = data.nrows();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "covariance needs at least 2 observations, got {n}"
        )));
    }
    let (s, _) = scatter_sums(data);
    let denom = T::from_usize_lossy(n - 1);
    Ok(s.mapv(|x| x / denom))
}

/// Per-coordinate sample variances with denominator `n − 1`.
pub fn sample_variances<T: Scalar>(data: ArrayView2<'_, T>) -> Result<Array1<T>> {
    let n = data.nrows();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "variance needs at least 2 observations, got {n}"
        )));
    }
    let mean = column_means(data);
    let mut var = Array1::<T>::zeros(data.ncols());
    for row in data.rows() {
        for ((v, &x), &m) in var.iter_mut().zip(row.iter()).zip(mean.iter()) {
            let c = x - m;
            *v = *v + c * c;
        }
    }
    let denom = T::from_usize_lossy(n - 1);
    var.mapv_inplace(|v| v / denom);
    Ok(var)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn eigen_reconstructs_matrix() {
        let a = array![[4.0, 1.0, 0.5], [1.0, 3.0, -0.2], [0.5, -0.2, 2.0]];
        let (vals, vecs) = symmetric_eigen(a.view()).unwrap();
        assert!(vals[0] <= vals[1] && vals[1] <= vals[2]);
        let recon = vecs.dot(&Array2::from_diag(&vals)).dot(&vecs.t());
        for (x, y) in recon.iter().zip(a.iter()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
        let orth = vecs.t().dot(&vecs);
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(orth[[i, j]], e, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn eigen_of_diagonal_is_sorted_diagonal() {
        let a = array![[3.0f32, 0.0], [0.0, 1.0]];
        let (vals, _) = symmetric_eigen(a.view()).unwrap();
        assert_eq!(vals.to_vec(), vec![1.0, 3.0]);
    }

    #[test]
    fn cholesky_solves_spd_system() {
        let a = array![[4.0, 2.0], [2.0, 3.0]];
        let l = cholesky(a.view()).unwrap();
        let x = cholesky_solve(l.view(), array![2.0, 1.0].view());
        let back = a.dot(&x);
        assert_abs_diff_eq!(back[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(back[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = array![[1.0, 2.0], [2.0, 1.0]];
        assert!(matches!(cholesky(a.view()), Err(Error::Numerical(_))));
    }

    #[test]
    fn covariance_uses_n_minus_one() {
        let x = array![[0.0], [2.0], [4.0]];
        let c = sample_covariance(x.view()).unwrap();
        assert_abs_diff_eq!(c[[0, 0]], 4.0, epsilon = 1e-12);
        let v = sample_variances(x.view()).unwrap();
        assert_abs_diff_eq!(v[0], 4.0, epsilon = 1e-12);
    }
}
