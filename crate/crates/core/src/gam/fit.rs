//! Penalized multinomial log-likelihood and its damped Newton maximizer.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Scalar;

/// Penalized multinomial log-likelihood over a fixed design matrix.
///
/// Parameters are a `(J−1) × P` matrix `β`; class `J` (index `J−1`) is the
/// reference with linear predictor zero. Column 0 of the design is the
/// intercept and is not penalized:
///
/// `ℓ(β) = Σ_i [η_{i,y_i} − log(1 + Σ_k exp η_ik)] − (λ/2) Σ_{k, a>0} β_ka²`.
#[derive(Debug, Clone)]
pub struct PenalizedLikelihood<'a, T> {
    design: ArrayView2<'a, T>,
    labels: &'a [usize],
    num_classes: usize,
    lambda: T,
}

impl<'a, T: Scalar> PenalizedLikelihood<'a, T> {
    pub fn new(design: ArrayView2<'a, T>, labels: &'a [usize], num_classes: usize, lambda: T) -> Result<Self> {
        if design.nrows() != labels.len() {
            return Err(Error::Shape { expected: design.nrows(), found: labels.len() });
        }
        if num_classes < 2 {
            return Err(Error::InvalidLabels("need at least two classes".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::InvalidLabels(format!("label {bad} out of range")));
        }
        if !(lambda >= T::zero()) {
            return Err(Error::InvalidParameter("lambda must be non-negative".into()));
        }
        Ok(PenalizedLikelihood { design, labels, num_classes, lambda })
    }

    pub fn num_params(&self) -> usize {
        (self.num_classes - 1) * self.design.ncols()
    }

    pub fn param_shape(&self) -> (usize, usize) {
        (self.num_classes - 1, self.design.ncols())
    }

    fn linear_predictors(&self, beta: ArrayView2<'_, T>, row: ArrayView1<'_, T>, eta: &mut [T]) {
        for (k, e) in eta.iter_mut().enumerate() {
            *e = beta.row(k).iter().zip(row.iter()).fold(T::zero(), |acc, (&b, &x)| acc + b * x);
        }
    }

    fn penalty(&self, beta: ArrayView2<'_, T>) -> T {
        let mut s = T::zero();
        for row in beta.rows() {
            for &b in row.iter().skip(1) {
                s += b * b;
            }
        }
        T::lit(0.5) * self.lambda * s
    }

    pub fn value(&self, beta: ArrayView2<'_, T>) -> T {
        let k = self.num_classes - 1;
        let mut eta = vec![T::zero(); k];
        let mut ll = T::zero();
        for (row, &y) in self.design.rows().into_iter().zip(self.labels) {
            self.linear_predictors(beta, row, &mut eta);
            let top = eta.iter().copied().fold(T::zero(), T::max);
            let lse = top + eta.iter().fold((-top).exp(), |acc, &e| acc + (e - top).exp()).ln();
            let own = if y < k { eta[y] } else { T::zero() };
            ll += own - lse;
        }
        ll - self.penalty(beta)
    }

    /// Class probabilities for every observation (`n × J`).
    pub fn probabilities(&self, beta: ArrayView2<'_, T>) -> Array2<T> {
        let k = self.num_classes - 1;
        let mut eta = vec![T::zero(); k];
        let mut out = Array2::zeros((self.design.nrows(), self.num_classes));
        for (row, mut p) in self.design.rows().into_iter().zip(out.rows_mut()) {
            self.linear_predictors(beta, row, &mut eta);
            softmax_with_reference(&eta, p.as_slice_mut().expect("contiguous"));
        }
        out
    }

    pub fn gradient(&self, beta: ArrayView2<'_, T>) -> Array2<T> {
        let (k, p) = self.param_shape();
        let probs = self.probabilities(beta);
        let mut g = Array2::<T>::zeros((k, p));
        for ((row, pr), &y) in self.design.rows().into_iter().zip(probs.rows()).zip(self.labels) {
            for c in 0..k {
                let resid = if y == c { T::one() } else { T::zero() } - pr[c];
                if resid != T::zero() {
                    g.row_mut(c).scaled_add(resid, &row);
                }
            }
        }
        for c in 0..k {
            for a in 1..p {
                g[[c, a]] -= self.lambda * beta[[c, a]];
            }
        }
        g
    }

    /// Negative Hessian (observed information plus penalty), indexed by `c·P + a`.
    pub fn information(&self, beta: ArrayView2<'_, T>) -> Array2<T> {
        let (k, p) = self.param_shape();
        let probs = self.probabilities(beta);
        let dim = k * p;
        let mut h = Array2::<T>::zeros((dim, dim));
        let mut w = vec![T::zero(); k * k];
        for (row, pr) in self.design.rows().into_iter().zip(probs.rows()) {
            for c in 0..k {
                for e in 0..k {
                    let delta = if c == e { pr[c] } else { T::zero() };
                    w[c * k + e] = delta - pr[c] * pr[e];
                }
            }
            for c in 0..k {
                for e in c..k {
                    let wce = w[c * k + e];
                    if wce == T::zero() {
                        continue;
                    }
                    for a in 0..p {
                        let xa = row[a] * wce;
                        if xa == T::zero() {
                            continue;
                        }
                        let r = c * p + a;
                        for b in 0..p {
                            h[[r, e * p + b]] += xa * row[b];
                        }
                    }
                }
            }
        }
        // fill the lower block triangle from symmetry
        for c in 0..k {
            for e in 0..c {
                for a in 0..p {
                    for b in 0..p {
                        h[[c * p + a, e * p + b]] = h[[e * p + b, c * p + a]];
                    }
                }
            }
        }
        for c in 0..k {
            for a in 1..p {
                h[[c * p + a, c * p + a]] += self.lambda;
            }
        }
        h
    }
}

/// Writes `softmax(η_1..η_{J−1}, 0)` into `out` (length `J`).
pub(crate) fn softmax_with_reference<T: Scalar>(eta: &[T], out: &mut [T]) {
    let top = eta.iter().copied().fold(T::zero(), T::max);
    let mut total = T::zero();
    for (o, &e) in out.iter_mut().zip(eta.iter()) {
        *o = (e - top).exp();
        total += *o;
    }
    let last = out.len() - 1;
    out[last] = (-top).exp();
    total += out[last];
    out.iter_mut().for_each(|o| *o /= total);
}

/// Newton iteration settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions<T> {
    pub max_iter: usize,
    pub grad_tol: T,
    pub max_halvings: usize,
}

impl<T: Scalar> Default for NewtonOptions<T> {
    fn default() -> Self {
        NewtonOptions { max_iter: 100, grad_tol: T::lit(1e-6), max_halvings: 40 }
    }
}

/// Result of a Newton run.
#[derive(Debug, Clone)]
pub struct NewtonFit<T> {
    pub beta: Array2<T>,
    pub objective: T,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after each accepted step (first entry is the starting value).
    pub trace: Vec<T>,
}

/// Maximizes the penalized likelihood by damped Newton steps from `β = 0`.
pub fn newton_maximize<T: Scalar>(obj: &PenalizedLikelihood<'_, T>, opts: NewtonOptions<T>) -> Result<NewtonFit<T>> {
    let (k, p) = obj.param_shape();
    let mut beta = Array2::<T>::zeros((k, p));
    let mut f = obj.value(beta.view());
    let mut trace = vec![f];
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..opts.max_iter {
        let g = obj.gradient(beta.view());
        if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite likelihood or gradient".into()));
        }
        let gmax = g.iter().fold(T::zero(), |m, &x| m.max(x.abs()));
        if gmax < opts.grad_tol {
            converged = true;
            break;
        }
        iterations += 1;
        let info = obj.information(beta.view());
        let chol = linalg::cholesky(info.view())
            .map_err(|_| Error::Numerical("singular penalized Hessian".into()))?;
        let flat_g = Array1::from_iter(g.iter().copied());
        let step = linalg::cholesky_solve(chol.view(), flat_g.view());
        let step = step.into_shape_with_order((k, p)).expect("parameter shape");
        let mut scale = T::one();
        let mut accepted = false;
        for _ in 0..=opts.max_halvings {
            let cand = &beta + &step.mapv(|s| s * scale);
            let fc = obj.value(cand.view());
            if fc.is_finite() && fc >= f {
                let improved = fc > f;
                beta = cand;
                f = fc;
                trace.push(f);
                accepted = improved;
                break;
            }
            scale *= T::lit(0.5);
        }
        if !accepted {
            // no strict improvement is possible at working precision
            let g = obj.gradient(beta.view());
            converged = g.iter().fold(T::zero(), |m, &x| m.max(x.abs())) < opts.grad_tol;
            break;
        }
    }
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::Numerical("non-finite coefficients".into()));
    }
    Ok(NewtonFit { beta, objective: f, iterations, converged, trace })
}
