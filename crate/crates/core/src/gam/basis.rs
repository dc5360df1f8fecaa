//! Per-feature basis expansions: raw linear columns and clamped B-splines.

use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Clamped B-spline basis on `[lo, hi]` with the given interior knots.
///
/// Evaluation outside `[lo, hi]` uses the boundary value, so the fitted
/// additive components are constant beyond the training range. The
/// recursion runs on `u = (x − lo)/(hi − lo)`, so features whose values are
/// all tiny (LSPD in high dimension) evaluate as well as features near one.
#[derive(Debug, Clone, PartialEq)]
pub struct BSpline<T> {
    degree: usize,
    lo: T,
    hi: T,
    interior: Vec<T>,
    knots: Vec<T>,
    unit_knots: Vec<T>,
}

impl<T: Scalar> BSpline<T> {
    pub fn new(degree: usize, lo: T, hi: T, interior: Vec<T>) -> Result<Self> {
        if degree == 0 {
            return Err(Error::InvalidParameter("spline degree must be at least 1".into()));
        }
        let width = hi - lo;
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() || !width.is_finite() || width < T::min_positive_value() {
            return Err(Error::DegenerateFeature(format!("empty spline range [{lo}, {hi}]")));
        }
        let unit = |k: T| (k - lo) / width;
        let mut prev = T::zero();
        for &k in &interior {
            let u = unit(k);
            if !(u > prev) || !(u < T::one()) {
                return Err(Error::DegenerateFeature("interior knots must be strictly increasing inside the range".into()));
            }
            prev = u;
        }
        let mut knots = vec![lo; degree + 1];
        knots.extend_from_slice(&interior);
        knots.extend(std::iter::repeat_n(hi, degree + 1));
        let mut unit_knots = vec![T::zero(); degree + 1];
        unit_knots.extend(interior.iter().map(|&k| unit(k)));
        unit_knots.extend(std::iter::repeat_n(T::one(), degree + 1));
        Ok(BSpline { degree, lo, hi, interior, knots, unit_knots })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn range(&self) -> (T, T) {
        (self.lo, self.hi)
    }

    pub fn interior_knots(&self) -> &[T] {
        &self.interior
    }

    /// Full knot vector including the repeated boundary knots.
    pub fn knots(&self) -> &[T] {
        &self.knots
    }

    /// Number of basis functions (`interior + degree + 1`).
    pub fn num_basis(&self) -> usize {
        self.interior.len() + self.degree + 1
    }

    /// All basis functions at `x` (clamped to the range); they sum to one.
    pub fn eval_full(&self, x: T) -> Vec<T> {
        let mut out = vec![T::zero(); self.num_basis()];
        let (span, vals) = self.nonzero(x);
        for (r, v) in vals.into_iter().enumerate() {
            out[span - self.degree + r] = v;
        }
        out
    }

    /// Nonzero basis values at `x`: returns the knot span `i` and `N_{i−p..=i}(x)`.
    fn nonzero(&self, x: T) -> (usize, Vec<T>) {
        let p = self.degree;
        let x = if x.is_nan() { self.lo } else { x.max(self.lo).min(self.hi) };
        let x = ((x - self.lo) / (self.hi - self.lo)).max(T::zero()).min(T::one());
        let nb = self.num_basis();
        let span = if x >= T::one() {
            nb - 1
        } else {
            // largest i in [p, nb-1] with knots[i] <= x
            let mut lo = p;
            let mut hi = nb;
            while hi - lo > 1 {
                let mid = (lo + hi) / 2;
                if self.unit_knots[mid] <= x {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo
        };
        let mut n = vec![T::zero(); p + 1];
        let mut left = vec![T::zero(); p + 1];
        let mut right = vec![T::zero(); p + 1];
        n[0] = T::one();
        for j in 1..=p {
            left[j] = x - self.unit_knots[span + 1 - j];
            right[j] = self.unit_knots[span + j] - x;
            let mut saved = T::zero();
            for r in 0..j {
                let temp = n[r] / (right[r + 1] + left[j - r]);
                n[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            n[j] = saved;
        }
        (span, n)
    }
}

/// Expansion applied to one depth feature.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureBasis<T> {
    /// The raw feature value as a single column.
    Linear,
    /// B-spline basis with the first function dropped (absorbed by the intercept).
    Spline(BSpline<T>),
}

impl<T: Scalar> FeatureBasis<T> {
    /// Number of design columns this feature contributes.
    pub fn width(&self) -> usize {
        match self {
            FeatureBasis::Linear => 1,
            FeatureBasis::Spline(s) => s.num_basis() - 1,
        }
    }

    /// Writes the design columns for value `x` into `out` (length [`FeatureBasis::width`]).
    pub fn eval_into(&self, x: T, out: &mut [T]) {
        match self {
            FeatureBasis::Linear => out[0] = x,
            FeatureBasis::Spline(s) => {
                out.iter_mut().for_each(|o| *o = T::zero());
                let (span, vals) = s.nonzero(x);
                let first = span - s.degree;
                for (r, v) in vals.into_iter().enumerate() {
                    let k = first + r;
                    if k > 0 {
                        out[k - 1] = v;
                    }
                }
            }
        }
    }
}

/// Type-7 (linear interpolation) quantile of sorted data.
fn quantile_sorted<T: Scalar>(sorted: &[T], q: f64) -> T {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = T::lit(pos - i as f64);
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

fn quantile_knots<T: Scalar>(sorted: &[T], count: usize) -> Vec<T> {
    (1..=count)
        .map(|k| quantile_sorted(sorted, k as f64 / (count + 1) as f64))
        .collect()
}

/// Builds the basis for one training column and evaluates its `n × df` design block.
///
/// `df = 1` is the raw column. For `df ≥ 2` the basis is a clamped B-spline of
/// degree `min(3, df)` with `df − degree` interior knots at equally spaced
/// quantiles of the training values; the first of its `df + 1` functions is
/// dropped so the block has `df` columns and no intercept collinearity.
pub fn build_basis<T: Scalar>(values: ArrayView1<'_, T>, df: usize) -> Result<(FeatureBasis<T>, Array2<T>)> {
    if df == 0 {
        return Err(Error::InvalidParameter("df must be at least 1".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidData("non-finite feature value".into()));
    }
    let basis = if df == 1 {
        FeatureBasis::Linear
    } else {
        let mut sorted: Vec<T> = values.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        let mut distinct = sorted.clone();
        distinct.dedup();
        if distinct.len() < df + 1 {
            return Err(Error::DegenerateFeature(format!(
                "{} distinct values, need at least {}",
                distinct.len(),
                df + 1
            )));
        }
        let degree = df.min(3);
        let count = df - degree;
        let lo = sorted[0];
        let hi = sorted[sorted.len() - 1];
        let spline = BSpline::new(degree, lo, hi, quantile_knots(&sorted, count))
            .or_else(|_| BSpline::new(degree, lo, hi, quantile_knots(&distinct, count)))?;
        FeatureBasis::Spline(spline)
    };
    let width = basis.width();
    let mut block = Array2::zeros((values.len(), width));
    let mut buf = vec![T::zero(); width];
    for (mut row, &v) in block.rows_mut().into_iter().zip(values.iter()) {
        basis.eval_into(v, &mut buf);
        row.iter_mut().zip(&buf).for_each(|(o, &b)| *o = b);
    }
    Ok((basis, block))
}
