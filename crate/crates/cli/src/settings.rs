//! Run settings assembled from an optional `key=value` file and command-line flags.
//!
//! Keys mirror the long flag names (`n-train` and `n_train` are the same key).
//! Flags are applied after the file, so they win.

use std::path::{Path, PathBuf};

use lspd::experiment::ClassifierKind;
use lspd::multiscale::{CvMode, FitFeatures, DEFAULT_CAUCHY_SCALE, DEFAULT_M};
use lspd::numerics::ScatterPolicy;
use lspd::simgen::ExampleId;
use lspd::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub example: Vec<ExampleId>,
    pub d: Vec<usize>,
    pub n_train: usize,
    pub n_test: usize,
    pub reps: usize,
    pub classifiers: Option<Vec<ClassifierKind>>,
    pub seed: u64,
    pub scatter: ScatterPolicy,
    pub m: usize,
    pub cauchy_scale: f64,
    pub df: usize,
    pub lambda: f64,
    pub cv_mode: CvMode,
    pub fit_features: FitFeatures,
    pub out: Option<PathBuf>,
    pub fixed_seeds: bool,
    pub data: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub query: Option<PathBuf>,
    pub label_column: String,
    pub delimiter: u8,
    pub train_frac: f64,
    /// Monte Carlo draws per class for `bayes-risk`.
    pub n: usize,
    pub draws: usize,
    /// `None` for SPD, `Some(A)` for LSPD at `h = √d/A`.
    pub h_rule: Option<f64>,
    pub h: Vec<f64>,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            example: vec![ExampleId::E1],
            d: vec![5],
            n_train: 100,
            n_test: 250,
            reps: 10,
            classifiers: None,
            seed: 1,
            scatter: ScatterPolicy::Auto,
            m: DEFAULT_M,
            cauchy_scale: DEFAULT_CAUCHY_SCALE,
            df: 5,
            lambda: 1e-3,
            cv_mode: CvMode::LooFeatures,
            fit_features: FitFeatures::LeaveOneOut,
            out: None,
            fixed_seeds: false,
            data: None,
            test: None,
            query: None,
            label_column: "label".into(),
            delimiter: b',',
            train_frac: 0.5,
            n: 100_000,
            draws: 200,
            h_rule: None,
            h: Vec::new(),
        }
    }
}

fn usage(msg: String) -> Error {
    Error::InvalidParameter(msg)
}

fn num<V: std::str::FromStr>(key: &str, v: &str) -> Result<V> {
    v.trim().parse().map_err(|_| usage(format!("{key}: cannot parse '{v}'")))
}

fn list<V: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<V>> {
    let out = v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| num(key, s)).collect::<Result<Vec<V>>>()?;
    if out.is_empty() {
        return Err(usage(format!("{key}: empty list")));
    }
    Ok(out)
}

fn parse_h_rule(v: &str) -> Result<Option<f64>> {
    let t = v.trim().to_ascii_lowercase();
    if t == "spd" {
        return Ok(None);
    }
    let a = t.strip_prefix("a=").ok_or_else(|| usage(format!("h-rule: expected 'spd' or 'A=<value>', got '{v}'")))?;
    Ok(Some(num("h-rule", a)?))
}

impl Settings {
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let k = key.trim().trim_start_matches("--").replace('-', "_").to_ascii_lowercase();
        let v = value.trim();
        match k.as_str() {
            "example" => self.example = list(key, v)?,
            "d" => self.d = list(key, v)?,
            "n_train" => self.n_train = num(key, v)?,
            "n_test" => self.n_test = num(key, v)?,
            "reps" => self.reps = num(key, v)?,
            "classifiers" => self.classifiers = Some(ClassifierKind::parse_list(v)?),
            "seed" => self.seed = num(key, v)?,
            "scatter" => self.scatter = v.parse()?,
            "m" => self.m = num(key, v)?,
            "cauchy_scale" => self.cauchy_scale = num(key, v)?,
            "df" => self.df = num(key, v)?,
            "lambda" => self.lambda = num(key, v)?,
            "cv_mode" => self.cv_mode = v.parse()?,
            "fit_features" => self.fit_features = v.parse()?,
            "out" => self.out = Some(PathBuf::from(v)),
            "fixed_seeds" => self.fixed_seeds = num(key, v)?,
            "data" => self.data = Some(PathBuf::from(v)),
            "test" => self.test = Some(PathBuf::from(v)),
            "query" => self.query = Some(PathBuf::from(v)),
            "label_column" => self.label_column = v.to_string(),
            "delimiter" => {
                let d = match v {
                    "\\t" | "tab" => b'\t',
                    s if s.len() == 1 => s.as_bytes()[0],
                    _ => return Err(usage(format!("delimiter must be a single character, got '{v}'"))),
                };
                self.delimiter = d;
            }
            "train_frac" => self.train_frac = num(key, v)?,
            "n" => self.n = num(key, v)?,
            "draws" => self.draws = num(key, v)?,
            "h_rule" => self.h_rule = parse_h_rule(v)?,
            "h" => self.h = list(key, v)?,
            _ => return Err(usage(format!("unknown setting '{key}'"))),
        }
        Ok(())
    }

    /// Applies `key=value` lines; blank lines and `#` comments are skipped.
    pub fn apply_file_text(&mut self, text: &str, origin: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| usage(format!("{origin}:{}: expected key=value", i + 1)))?;
            self.apply(k, v).map_err(|e| usage(format!("{origin}:{}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn load(config: Option<&Path>, overrides: &[(&'static str, String)]) -> Result<Self> {
        let mut s = Settings::default();
        if let Some(path) = config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            s.apply_file_text(&text, &path.display().to_string())?;
        }
        for (k, v) in overrides {
            s.apply(k, v)?;
        }
        Ok(s)
    }

    pub fn single_example(&self) -> Result<ExampleId> {
        match self.example.as_slice() {
            [e] => Ok(*e),
            _ => Err(usage("exactly one example expected".into())),
        }
    }

    pub fn single_d(&self) -> Result<usize> {
        match self.d.as_slice() {
            [d] => Ok(*d),
            _ => Err(usage("exactly one dimension expected".into())),
        }
    }
}
