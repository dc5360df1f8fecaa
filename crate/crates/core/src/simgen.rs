//! Simulated two-class designs E1–E5 and their Bayes rules.
//!
//! * E1: ½N(0, I) + ½N(0, 10I) against N(0, 5I).
//! * E2: ½U(0,1) + ½U(2,3) against ½U(1,2) + ½U(3,4), where `U(a,b)` is
//!   uniform on the shell `a ≤ ‖x‖ ≤ b`.
//! * E3: N(0, I) against N(1, 4I).
//! * E4: equal mixtures of N(c·1, ¼I) over `c ∈ {0,2,4}` against `c ∈ {1,3,5}`.
//! * E5: independent exponentials with scales `d/(d−i+1)` against scales
//!   `d/(2i)`, the second class shifted by `δ = m₁ − m₂ + (1/d)·1` so its mean
//!   exceeds the first class mean by `1/d` in every coordinate.
//!
//! Priors are equal. Class `j` (0-based) draws from `ChaCha8Rng` seeded with
//! the dataset seed on stream `j`; each point consumes, in order, the
//! mixture choice (one `bool` for two components, one `random_range(0..3)`
//! for E4), then its coordinates: `d` standard normals (ziggurat) for
//! Gaussian designs, `d` normals plus one uniform for shells, `d` unit
//! exponentials for E5.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, ArrayViewMut1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;

use crate::dataset::LabeledDataset;
use crate::error::{check_dim, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExampleId {
    E1,
    E2,
    E3,
    E4,
    E5,
}

impl fmt::Display for ExampleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ExampleId::E1 => "E1",
            ExampleId::E2 => "E2",
            ExampleId::E3 => "E3",
            ExampleId::E4 => "E4",
            ExampleId::E5 => "E5",
        };
        f.write_str(s)
    }
}

impl FromStr for ExampleId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().trim_start_matches('E') {
            "1" => Ok(ExampleId::E1),
            "2" => Ok(ExampleId::E2),
            "3" => Ok(ExampleId::E3),
            "4" => Ok(ExampleId::E4),
            "5" => Ok(ExampleId::E5),
            _ => Err(Error::InvalidParameter(format!("unknown example '{s}'"))),
        }
    }
}

/// A design and its dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ExampleSpec {
    pub id: ExampleId,
    pub d: usize,
}

const LN_2PI: f64 = 1.837_877_066_409_345_5;

impl ExampleSpec {
    pub fn new(id: ExampleId, d: usize) -> Result<Self> {
        if d < 1 {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        Ok(ExampleSpec { id, d })
    }

    pub fn num_classes(&self) -> usize {
        2
    }

    pub fn priors(&self) -> [f64; 2] {
        [0.5, 0.5]
    }

    /// Exponential scales of class `class` in E5.
    pub fn exponential_scales(&self, class: usize) -> Vec<f64> {
        let d = self.d as f64;
        (1..=self.d)
            .map(|i| if class == 0 { d / (d - i as f64 + 1.0) } else { d / (2.0 * i as f64) })
            .collect()
    }

    /// Location shift added to E5 class 2.
    pub fn e5_shift(&self) -> Vec<f64> {
        let inv_d = 1.0 / self.d as f64;
        self.exponential_scales(0)
            .iter()
            .zip(self.exponential_scales(1))
            .map(|(m1, m2)| m1 - m2 + inv_d)
            .collect()
    }

    /// Mean vector of class `class`.
    pub fn class_mean(&self, class: usize) -> Array1<f64> {
        let d = self.d;
        match self.id {
            ExampleId::E1 | ExampleId::E2 => Array1::zeros(d),
            ExampleId::E3 => Array1::from_elem(d, if class == 0 { 0.0 } else { 1.0 }),
            ExampleId::E4 => Array1::from_elem(d, if class == 0 { 2.0 } else { 3.0 }),
            ExampleId::E5 => {
                let s = self.exponential_scales(class);
                if class == 0 {
                    Array1::from(s)
                } else {
                    Array1::from_iter(s.iter().zip(self.e5_shift()).map(|(m, delta)| m + delta))
                }
            }
        }
    }

    fn draw_into<R: Rng>(&self, class: usize, rng: &mut R, mut out: ArrayViewMut1<'_, f64>) {
        match self.id {
            ExampleId::E1 => {
                let sd = if class == 0 {
                    if rng.random::<bool>() { 1.0 } else { 10f64.sqrt() }
                } else {
                    5f64.sqrt()
                };
                out.iter_mut().for_each(|v| *v = sd * rng.sample::<f64, _>(StandardNormal));
            }
            ExampleId::E2 => {
                let inner = rng.random::<bool>();
                let r1 = match (class, inner) {
                    (0, true) => 0.0,
                    (0, false) => 2.0,
                    (_, true) => 1.0,
                    (_, false) => 3.0,
                };
                shell_into(r1, r1 + 1.0, rng, out);
            }
            ExampleId::E3 => {
                let (mu, sd) = if class == 0 { (0.0, 1.0) } else { (1.0, 2.0) };
                out.iter_mut().for_each(|v| *v = mu + sd * rng.sample::<f64, _>(StandardNormal));
            }
            ExampleId::E4 => {
                let c = 2.0 * rng.random_range(0..3) as f64 + if class == 0 { 0.0 } else { 1.0 };
                out.iter_mut().for_each(|v| *v = c + 0.5 * rng.sample::<f64, _>(StandardNormal));
            }
            ExampleId::E5 => {
                let scales = self.exponential_scales(class);
                let shift = if class == 0 { vec![0.0; self.d] } else { self.e5_shift() };
                for ((v, s), delta) in out.iter_mut().zip(scales).zip(shift) {
                    *v = delta + s * rng.sample::<f64, _>(Exp1);
                }
            }
        }
    }

    /// Log density of class `class` at `x` (`−∞` outside the support).
    pub fn log_density(&self, class: usize, x: ArrayView1<'_, f64>) -> f64 {
        let d = self.d as f64;
        let r2 = x.dot(&x);
        let ln_normal = |var: f64, sq: f64| -0.5 * d * (LN_2PI + var.ln()) - sq / (2.0 * var);
        match self.id {
            ExampleId::E1 => {
                if class == 0 {
                    log_mix(&[ln_normal(1.0, r2), ln_normal(10.0, r2)])
                } else {
                    ln_normal(5.0, r2)
                }
            }
            ExampleId::E2 => {
                let r = r2.sqrt();
                let starts: [f64; 2] = if class == 0 { [0.0, 2.0] } else { [1.0, 3.0] };
                let parts: Vec<f64> = starts.iter().map(|&a| shell_log_density(self.d, a, a + 1.0, r)).collect();
                log_mix(&parts)
            }
            ExampleId::E3 => {
                if class == 0 {
                    ln_normal(1.0, r2)
                } else {
                    let sq: f64 = x.iter().map(|v| (v - 1.0) * (v - 1.0)).sum();
                    ln_normal(4.0, sq)
                }
            }
            ExampleId::E4 => {
                let offset = if class == 0 { 0.0 } else { 1.0 };
                let parts: Vec<f64> = (0..3)
                    .map(|k| {
                        let c = 2.0 * k as f64 + offset;
                        ln_normal(0.25, x.iter().map(|v| (v - c) * (v - c)).sum())
                    })
                    .collect();
                log_mix(&parts)
            }
            ExampleId::E5 => {
                let scales = self.exponential_scales(class);
                let shift = if class == 0 { vec![0.0; self.d] } else { self.e5_shift() };
                let mut ll = 0.0;
                for ((&v, s), delta) in x.iter().zip(scales).zip(shift) {
                    let e = v - delta;
                    if e < 0.0 {
                        return f64::NEG_INFINITY;
                    }
                    ll += -s.ln() - e / s;
                }
                ll
            }
        }
    }
}

/// `log(mean(exp(parts)))`: an equal-weight mixture.
fn log_mix(parts: &[f64]) -> f64 {
    let top = parts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return top;
    }
    top + (parts.iter().map(|p| (p - top).exp()).sum::<f64>() / parts.len() as f64).ln()
}

/// `log` volume of the unit ball in `d` dimensions.
fn ln_unit_ball_volume(d: usize) -> f64 {
    // V_0 = 1, V_1 = 2, V_k = V_{k−2}·2π/k
    let mut v = if d % 2 == 0 { 0.0 } else { 2f64.ln() };
    let mut k = if d % 2 == 0 { 2 } else { 3 };
    while k <= d {
        v += (2.0 * std::f64::consts::PI / k as f64).ln();
        k += 2;
    }
    v
}

/// Log density of the uniform law on `a ≤ ‖x‖ ≤ b` at radius `r`.
fn shell_log_density(d: usize, a: f64, b: f64, r: f64) -> f64 {
    if r < a || r > b {
        return f64::NEG_INFINITY;
    }
    // log(b^d − a^d) = d·ln b + ln(1 − (a/b)^d)
    let df = d as f64;
    -(ln_unit_ball_volume(d) + df * b.ln() + (-(a / b).powf(df)).ln_1p())
}

fn shell_into<R: Rng>(r1: f64, r2: f64, rng: &mut R, mut out: ArrayViewMut1<'_, f64>) {
    let d = out.len() as f64;
    loop {
        out.iter_mut().for_each(|v| *v = rng.sample::<f64, _>(StandardNormal));
        let norm = out.dot(&out).sqrt();
        if norm > 0.0 {
            out.mapv_inplace(|v| v / norm);
            break;
        }
    }
    let u: f64 = rng.random();
    // r = (r1^d + U(r2^d − r1^d))^{1/d}, scaled by r2 to avoid overflow
    let rho_d = (r1 / r2).powf(d);
    let r = r2 * (rho_d + u * (1.0 - rho_d)).powf(1.0 / d);
    out.mapv_inplace(|v| v * r);
}

/// One point uniform on the shell `r1 ≤ ‖x‖ ≤ r2` in `d` dimensions.
pub fn sample_uniform_shell(d: usize, r1: f64, r2: f64, seed: u64) -> Result<Array1<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_shell_with(d, r1, r2, &mut rng)
}

/// Shell draw from a caller-supplied generator.
pub fn sample_shell_with<R: Rng>(d: usize, r1: f64, r2: f64, rng: &mut R) -> Result<Array1<f64>> {
    if !(r1 >= 0.0 && r1 < r2 && r2.is_finite()) {
        return Err(Error::InvalidParameter(format!("need 0 ≤ r1 < r2, got r1={r1}, r2={r2}")));
    }
    if d < 1 {
        return Err(Error::InvalidParameter("dimension must be at least 1".into()));
    }
    let mut out = Array1::zeros(d);
    shell_into(r1, r2, rng, out.view_mut());
    Ok(out)
}

/// `n_per_class` draws from each class: class 1 rows first, then class 2.
pub fn generate(spec: &ExampleSpec, n_per_class: usize, seed: u64) -> Result<LabeledDataset<f64>> {
    if n_per_class < 1 {
        return Err(Error::InvalidParameter("need at least one point per class".into()));
    }
    let j = spec.num_classes();
    let mut x = Array2::zeros((j * n_per_class, spec.d));
    let mut labels = Vec::with_capacity(j * n_per_class);
    for class in 0..j {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(class as u64);
        for i in 0..n_per_class {
            spec.draw_into(class, &mut rng, x.row_mut(class * n_per_class + i));
            labels.push(class);
        }
    }
    LabeledDataset::new(x, labels, j)
}

/// Class maximizing `π_j f_j(x)`; class 1 (index 0) on ties and outside every support.
pub fn bayes_label(spec: &ExampleSpec, x: ArrayView1<'_, f64>) -> Result<usize> {
    check_dim(spec.d, x.len())?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidData("non-finite point".into()));
    }
    let priors = spec.priors();
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (j, p) in priors.iter().enumerate() {
        let s = p.ln() + spec.log_density(j, x);
        if s > best_score {
            best = j;
            best_score = s;
        }
    }
    Ok(best)
}

/// Monte Carlo Bayes risk with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskEstimate {
    pub risk: f64,
    pub se: f64,
    pub draws: usize,
}

/// Bayes risk from `n_per_class` draws per class.
pub fn bayes_risk_mc(spec: &ExampleSpec, n_per_class: usize, seed: u64) -> Result<RiskEstimate> {
    let data = generate(spec, n_per_class, seed)?;
    let wrong = (0..data.len())
        .into_par_iter()
        .map(|i| bayes_label(spec, data.row(i)).map(|y| usize::from(y != data.labels()[i])))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum::<usize>();
    let n = data.len() as f64;
    let risk = wrong as f64 / n;
    Ok(RiskEstimate { risk, se: (risk * (1.0 - risk) / n).sqrt(), draws: data.len() })
}
