//! Plain-text model records.
//!
//! ```text
//! gamodel v1 J=<J> df=<df> lambda=<λ>
//! fit iterations=<n> converged=<bool>
//! feature <i> linear
//! feature <i> spline degree=<p> lo=<lo> hi=<hi> knots=<k1>,<k2>,...
//! coef <j> <β_j0> <β_j1> ...
//! ```
//!
//! Feature and coefficient rows are 1-based and in order; numbers use
//! shortest round-trip exponent notation.

use std::fmt::Write as _;

use ndarray::Array2;

use super::{BSpline, BasisSpec, FeatureBasis, GamModel};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const MAGIC: &str = "gamodel";
const VERSION: &str = "v1";

impl<T: Scalar> GamModel<T> {
    pub fn to_record(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{MAGIC} {VERSION} J={} df={} lambda={:e}", self.num_classes, self.df, self.lambda);
        let _ = writeln!(s, "fit iterations={} converged={}", self.iterations, self.converged);
        for (i, f) in self.basis.features.iter().enumerate() {
            match f {
                FeatureBasis::Linear => {
                    let _ = writeln!(s, "feature {} linear", i + 1);
                }
                FeatureBasis::Spline(sp) => {
                    let (lo, hi) = sp.range();
                    let knots: Vec<String> = sp.interior_knots().iter().map(|k| format!("{k:e}")).collect();
                    let _ = writeln!(
                        s,
                        "feature {} spline degree={} lo={lo:e} hi={hi:e} knots={}",
                        i + 1,
                        sp.degree(),
                        knots.join(",")
                    );
                }
            }
        }
        for (j, row) in self.coefficients.rows().into_iter().enumerate() {
            let _ = write!(s, "coef {}", j + 1);
            for v in row.iter() {
                let _ = write!(s, " {v:e}");
            }
            s.push('\n');
        }
        s
    }

    pub fn from_record(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines.next().ok_or_else(|| bad("empty record"))?;
        let mut parts = header.split_whitespace();
        if parts.next() != Some(MAGIC) {
            return Err(bad("missing gamodel header"));
        }
        match parts.next() {
            Some(VERSION) => {}
            Some(v) => return Err(bad(&format!("unsupported version {v}"))),
            None => return Err(bad("missing version")),
        }
        let num_classes: usize = parse(kv(parts.next(), "J")?)?;
        let df: usize = parse(kv(parts.next(), "df")?)?;
        let lambda: T = parse(kv(parts.next(), "lambda")?)?;
        if num_classes < 2 {
            return Err(bad("J must be at least 2"));
        }

        let fit_line = lines.next().ok_or_else(|| bad("missing fit line"))?;
        let mut fp = fit_line.split_whitespace();
        if fp.next() != Some("fit") {
            return Err(bad("expected fit line"));
        }
        let iterations: usize = parse(kv(fp.next(), "iterations")?)?;
        let converged: bool = parse(kv(fp.next(), "converged")?)?;

        let mut features = Vec::with_capacity(num_classes);
        for i in 0..num_classes {
            let line = lines.next().ok_or_else(|| bad("missing feature line"))?;
            let mut p = line.split_whitespace();
            if p.next() != Some("feature") || p.next() != Some(&(i + 1).to_string()) {
                return Err(bad(&format!("expected feature {}", i + 1)));
            }
            let f = match p.next() {
                Some("linear") => FeatureBasis::Linear,
                Some("spline") => {
                    let degree: usize = parse(kv(p.next(), "degree")?)?;
                    let lo: T = parse(kv(p.next(), "lo")?)?;
                    let hi: T = parse(kv(p.next(), "hi")?)?;
                    let knots_s = kv(p.next(), "knots")?;
                    let knots = knots_s
                        .split(',')
                        .filter(|s| !s.is_empty())
                        .map(parse::<T>)
                        .collect::<Result<Vec<_>>>()?;
                    FeatureBasis::Spline(BSpline::new(degree, lo, hi, knots)?)
                }
                other => return Err(bad(&format!("unknown feature kind {other:?}"))),
            };
            features.push(f);
        }
        let basis = BasisSpec { features };
        let width = basis.width();
        let mut coefficients = Array2::<T>::zeros((num_classes - 1, width));
        for j in 0..num_classes - 1 {
            let line = lines.next().ok_or_else(|| bad("missing coefficient row"))?;
            let mut p = line.split_whitespace();
            if p.next() != Some("coef") || p.next() != Some(&(j + 1).to_string()) {
                return Err(bad(&format!("expected coef {}", j + 1)));
            }
            let vals = p.map(parse::<T>).collect::<Result<Vec<_>>>()?;
            if vals.len() != width {
                return Err(Error::Shape { expected: width, found: vals.len() });
            }
            for (a, v) in vals.into_iter().enumerate() {
                coefficients[[j, a]] = v;
            }
        }
        if lines.next().is_some() {
            return Err(bad("trailing content"));
        }
        Ok(GamModel { basis, coefficients, num_classes, df, lambda, iterations, converged })
    }
}

fn bad(msg: &str) -> Error {
    Error::InvalidData(format!("model record: {msg}"))
}

fn kv<'a>(tok: Option<&'a str>, key: &str) -> Result<&'a str> {
    let tok = tok.ok_or_else(|| bad(&format!("missing {key}")))?;
    tok.strip_prefix(key)
        .and_then(|r| r.strip_prefix('='))
        .ok_or_else(|| bad(&format!("expected {key}=..., found {tok}")))
}

fn parse<V: std::str::FromStr>(s: &str) -> Result<V> {
    s.parse().map_err(|_| bad(&format!("cannot parse '{s}'")))
}
