//! Subcommand bodies. Tables go to stdout and, with `--out`, to files.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Axis;

use lspd::baselines::BaselineConfig;
use lspd::dataset::{load_csv, load_points, CsvSchema, LabeledDataset};
use lspd::depth::DepthScale;
use lspd::experiment::{hdlss_sweep, run_experiment, ClassifierKind, ExperimentConfig, ExperimentReport};
use lspd::gam::GamConfig;
use lspd::multiscale::{fit_reference, MultiscaleConfig};
use lspd::simgen::{bayes_risk_mc, ExampleSpec};
use lspd::{Error, Result};

use crate::settings::Settings;

fn model_config(s: &Settings) -> MultiscaleConfig<f64> {
    MultiscaleConfig {
        m: s.m,
        cauchy_scale: s.cauchy_scale,
        gam: GamConfig::new(s.df, s.lambda),
        seed: s.seed,
        cv_mode: s.cv_mode,
        scatter: s.scatter,
        fit_features: s.fit_features,
    }
}

fn fill_run(cfg: &mut ExperimentConfig, s: &Settings, default: &[ClassifierKind]) {
    cfg.reps = s.reps;
    cfg.seed = s.seed;
    cfg.fixed_rep_seeds = s.fixed_seeds;
    cfg.classifiers = s.classifiers.clone().unwrap_or_else(|| default.to_vec());
    cfg.multiscale = model_config(s);
    cfg.baseline = BaselineConfig { scatter: s.scatter, ..BaselineConfig::default() };
}

fn emit_report(report: &ExperimentReport, s: &Settings) -> Result<()> {
    print!("{}", report.to_text());
    if let Some(dir) = &s.out {
        report.write_to(dir)?;
    }
    Ok(())
}

fn write_out(s: &Settings, name: &str, text: &str) -> Result<()> {
    if let Some(dir) = &s.out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(name), text)?;
    }
    Ok(())
}

pub fn simulate(s: &Settings) -> Result<()> {
    let spec = ExampleSpec::new(s.single_example()?, s.single_d()?)?;
    let mut cfg = ExperimentConfig::simulated(spec);
    cfg.n_train = s.n_train;
    cfg.n_test = s.n_test;
    fill_run(&mut cfg, s, &ClassifierKind::ALL);
    emit_report(&run_experiment(&cfg)?, s)
}

fn schema(s: &Settings) -> CsvSchema {
    CsvSchema { label_column: s.label_column.clone(), delimiter: s.delimiter }
}

fn load_table(path: &Path, s: &Settings) -> Result<(LabeledDataset<f64>, usize)> {
    let got = load_csv::<f64>(path, &schema(s)).map_err(|e| with_path(e, path))?;
    if got.dropped_rows > 0 {
        eprintln!("{}: dropped {} rows with missing values", path.display(), got.dropped_rows);
    }
    Ok((got.data, got.dropped_rows))
}

fn with_path(e: Error, path: &Path) -> Error {
    match e {
        Error::Ingest(m) => Error::Ingest(format!("{}: {m}", path.display())),
        Error::Io(m) => Error::Io(format!("{}: {m}", path.display())),
        other => other,
    }
}

/// Re-indexes `test` labels by the class names of `train`.
fn align_classes(train: &LabeledDataset<f64>, test: LabeledDataset<f64>) -> Result<LabeledDataset<f64>> {
    let names = train.class_names();
    let labels = test
        .labels()
        .iter()
        .map(|&y| {
            let name = &test.class_names()[y];
            names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::InvalidData(format!("test class '{name}' does not occur in the training table")))
        })
        .collect::<Result<Vec<_>>>()?;
    LabeledDataset::with_names(test.x().to_owned(), labels, names.to_vec())
}

pub fn bench(s: &Settings) -> Result<()> {
    let path = s.data.as_deref().ok_or_else(|| Error::InvalidParameter("bench needs --data".into()))?;
    let (data, dropped) = load_table(path, s)?;
    let test = match &s.test {
        Some(p) => Some(align_classes(&data, load_table(p, s)?.0)?),
        None => None,
    };
    let name = path.file_stem().map_or_else(|| "table".to_string(), |n| n.to_string_lossy().into_owned());
    let mut cfg = ExperimentConfig::table(&name, data, test);
    cfg.train_frac = s.train_frac;
    let default: Vec<ClassifierKind> = ClassifierKind::ALL.into_iter().filter(|&k| k != ClassifierKind::Bayes).collect();
    fill_run(&mut cfg, s, &default);
    let mut report = run_experiment(&cfg)?;
    report.provenance.push(("dropped_rows".into(), dropped.to_string()));
    emit_report(&report, s)
}

pub fn bayes_risk(s: &Settings) -> Result<()> {
    let mut out = String::from("example,d,n_per_class,risk_pct,se_pct\n");
    for &id in &s.example {
        for &d in &s.d {
            let spec = ExampleSpec::new(id, d)?;
            let r = bayes_risk_mc(&spec, s.n, s.seed)?;
            let _ = writeln!(out, "{id},{d},{},{:.4},{:.4}", s.n, 100.0 * r.risk, 100.0 * r.se);
        }
    }
    print!("{out}");
    write_out(s, "bayes_risk.csv", &out)
}

pub fn hdlss(s: &Settings) -> Result<()> {
    let rows = hdlss_sweep(&s.d, s.n_train, s.draws, s.h_rule, s.seed)?;
    let mut out = String::from("d,h,z1,z2,limit1,limit2,max_abs_gap\n");
    for r in rows {
        let gap = (&r.empirical - &r.limit).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let h = r.h.map_or_else(|| "spd".to_string(), |h| format!("{h:.6}"));
        let _ = writeln!(
            out,
            "{},{h},{:.6},{:.6},{:.6},{:.6},{gap:.6}",
            r.d, r.empirical[0], r.empirical[1], r.limit[0], r.limit[1]
        );
    }
    print!("{out}");
    write_out(s, "hdlss.csv", &out)
}

pub fn depth(s: &Settings) -> Result<()> {
    let data_path = s.data.as_deref().ok_or_else(|| Error::InvalidParameter("depth needs --data".into()))?;
    let query_path = s.query.as_deref().ok_or_else(|| Error::InvalidParameter("depth needs --query".into()))?;
    let (train, _) = load_table(data_path, s)?;
    let queries = load_points::<f64>(query_path, &schema(s)).map_err(|e| with_path(e, query_path))?;
    if queries.ncols() != train.dim() {
        return Err(Error::Shape { expected: train.dim(), found: queries.ncols() });
    }
    if let Some(h) = s.h.iter().find(|h| !(**h > 0.0 && h.is_finite())) {
        return Err(Error::InvalidParameter(format!("bandwidth must be positive and finite, got {h}")));
    }
    let reference = fit_reference(&train, s.scatter)?;
    let names = train.class_names();
    let mut scales = vec![DepthScale::Spd];
    scales.extend(s.h.iter().map(|&h| DepthScale::Lspd(h)));
    let mut out = String::from("point");
    for sc in &scales {
        for n in names {
            match sc {
                DepthScale::Spd => {
                    let _ = write!(out, ",spd_{n}");
                }
                DepthScale::Lspd(h) => {
                    let _ = write!(out, ",lspd_{n}_h{h}");
                }
            }
        }
    }
    out.push('\n');
    for (i, x) in queries.axis_iter(Axis(0)).enumerate() {
        let _ = write!(out, "{}", i + 1);
        let profiles = reference.profiles(x)?;
        for &sc in &scales {
            for v in reference.assemble(&profiles, sc).values.iter() {
                let _ = write!(out, ",{v:.10e}");
            }
        }
        out.push('\n');
    }
    print!("{out}");
    write_out(s, "depth.csv", &out)
}
