use std::path::Path;
use std::process::{Command, Output};

use lspd::simgen::{generate, ExampleId, ExampleSpec};

fn lspd_cmd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lspd")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_table(path: &Path, id: ExampleId, d: usize, n: usize, seed: u64) {
    generate(&ExampleSpec::new(id, d).unwrap(), n, seed).unwrap().save_csv(path).unwrap();
}

const FAST: [&str; 10] = ["--n-train", "30", "--n-test", "40", "--reps", "2", "--M", "3", "--df", "3"];

#[test]
fn simulate_writes_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let mut args = vec!["simulate", "--example", "E3", "--d", "3", "--classifiers", "SPD,LSPD,LDA,BAYES"];
        args.extend(FAST);
        args.extend(["--out", out.to_str().unwrap()]);
        let o = lspd_cmd(&args);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["report.txt", "report.csv", "raw_errors.csv"] {
        let x = std::fs::read(a.join(f)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let csv = std::fs::read_to_string(a.join("report.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("classifier,mean_error_pct,se_pct,efficiency"));
    assert_eq!(lines.count(), 4);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# small run\nexample=E4\nd=2\nn-train=25\nn-test=20\nreps=3\nclassifiers=LDA\nseed=9\n").unwrap();
    let o = lspd_cmd(&["simulate", "--config", cfg.to_str().unwrap(), "--reps", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("# example=E4"));
    assert!(text.contains("# reps=2"));
    assert!(text.contains("# seed=9"));
    assert!(text.contains("LDA"));

    std::fs::write(&cfg, "colour=red\n").unwrap();
    let o = lspd_cmd(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn exit_codes() {
    assert_eq!(lspd_cmd(&["simulate", "--nope"]).status.code(), Some(1));
    assert_eq!(lspd_cmd(&["simulate", "--d", "zero"]).status.code(), Some(1));
    assert_eq!(lspd_cmd(&["bench"]).status.code(), Some(1));
    assert_eq!(lspd_cmd(&["bench", "--data", "/definitely/missing.csv"]).status.code(), Some(2));
    assert_eq!(lspd_cmd(&["--help"]).status.code(), Some(0));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "x1,label\n1,a\nfoo,b\n").unwrap();
    let o = lspd_cmd(&["bench", "--data", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
}

#[test]
fn bench_on_a_table() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("e3.csv");
    write_table(&data, ExampleId::E3, 3, 40, 5);
    let o = lspd_cmd(&[
        "bench", "--data", data.to_str().unwrap(), "--train-frac", "0.6", "--reps", "3", "--M", "3", "--df", "3",
        "--classifiers", "SPD,QDA,KNN",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("# source=table:e3"));
    assert!(text.contains("sd over repetitions"));

    // a fixed test table gives a single split with binomial errors
    let test = dir.path().join("test.csv");
    write_table(&test, ExampleId::E3, 3, 30, 6);
    let o = lspd_cmd(&["bench", "--data", data.to_str().unwrap(), "--test", test.to_str().unwrap(), "--classifiers", "LDA"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("binomial"));

    let o = lspd_cmd(&["bench", "--data", data.to_str().unwrap(), "--classifiers", "BAYES"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bayes_risk_and_hdlss_tables() {
    let o = lspd_cmd(&["bayes-risk", "--example", "E2,E3", "--d", "2", "--n", "2000"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.lines().any(|l| l.starts_with("E2,2,2000,0.0000,")), "{text}");
    assert_eq!(text.lines().count(), 3);

    let o = lspd_cmd(&["hdlss", "--d", "50,200", "--n-train", "60", "--draws", "10"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("d,h,z1,z2,limit1,limit2,max_abs_gap\n"));
    assert!(text.contains("0.292893,0.552786"));
}

#[test]
fn depth_of_query_points() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("train.csv");
    write_table(&data, ExampleId::E1, 2, 30, 1);
    let query = dir.path().join("q.csv");
    std::fs::write(&query, "a,b\n0,0\n3,-1\n").unwrap();
    let out = dir.path().join("out");
    let o = lspd_cmd(&[
        "depth", "--data", data.to_str().unwrap(), "--query", query.to_str().unwrap(), "--h", "0.5,2", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out.join("depth.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("point,spd_1,spd_2,lspd_1_h0.5,lspd_2_h0.5,lspd_1_h2,lspd_2_h2"));
    let first: Vec<f64> = lines.next().unwrap().split(',').skip(1).map(|v| v.parse().unwrap()).collect();
    assert_eq!(first.len(), 6);
    assert!(first[..2].iter().all(|v| (0.0..=1.0).contains(v)));
    assert!(first.iter().all(|v| *v >= 0.0));

    let o = lspd_cmd(&["depth", "--data", data.to_str().unwrap(), "--query", query.to_str().unwrap(), "--h", "-1"]);
    assert_eq!(o.status.code(), Some(1));
}
