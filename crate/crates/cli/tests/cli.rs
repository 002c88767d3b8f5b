use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn svardag(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_svardag")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = svardag(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_string()
}

fn simulate(dir: &TempDir, extra: &[&str]) -> String {
    let (x, w, a) = (p(dir, "x.csv"), p(dir, "w.csv"), p(dir, "a.csv"));
    let mut args = vec!["simulate", "--out-x", &x, "--out-w", &w, "--out-a", &a];
    args.extend_from_slice(extra);
    ok(&args)
}

fn value<'a>(stdout: &'a str, key: &str) -> &'a str {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("{key} missing in {stdout}"))
}

#[test]
fn simulate_shapes_and_determinism() {
    let dir = TempDir::new().unwrap();
    let out = simulate(&dir, &["--nodes", "3", "--lags", "2", "--samples", "5", "--avg-degree-w", "1", "--seed", "4"]);
    let radius: f64 = value(&out, "companion_radius").parse().unwrap();
    assert!(radius < 1.0);
    let x = fs::read_to_string(p(&dir, "x.csv")).unwrap();
    let lines: Vec<&str> = x.lines().collect();
    assert_eq!(lines[0], "x0,x1,x2");
    assert_eq!(lines.len(), 6);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 3));
    assert_eq!(fs::read_to_string(p(&dir, "w.csv")).unwrap().lines().count(), 3);
    assert_eq!(fs::read_to_string(p(&dir, "a.csv")).unwrap().lines().count(), 6);

    let again = TempDir::new().unwrap();
    simulate(&again, &["--nodes", "3", "--lags", "2", "--samples", "5", "--avg-degree-w", "1", "--seed", "4"]);
    for f in ["x.csv", "w.csv", "a.csv"] {
        assert_eq!(fs::read(p(&dir, f)).unwrap(), fs::read(p(&again, f)).unwrap(), "{f}");
    }
}

#[test]
fn learn_end_to_end_with_metrics() {
    let dir = TempDir::new().unwrap();
    simulate(&dir, &["--nodes", "10", "--lags", "2", "--samples", "2000", "--seed", "1"]);
    let (x, w, a) = (p(&dir, "x.csv"), p(&dir, "w.csv"), p(&dir, "a.csv"));
    let (wh, ah, summary) = (p(&dir, "w_hat.csv"), p(&dir, "a_hat.csv"), p(&dir, "summary.txt"));
    let out = ok(&[
        "learn", "--input", &x, "--lags", "2", "--out-w", &wh, "--out-a", &ah, "--summary", &summary, "--true-w", &w,
        "--true-a", &a,
    ]);
    let h: f64 = value(&out, "h_final").parse().unwrap();
    assert!(h <= 1e-8);
    for key in ["nfe_w", "nfe_a", "f1_w", "precision_w", "recall_w", "f1_a"] {
        let v: f64 = value(&out, key).parse().unwrap();
        assert!(v.is_finite() && v >= 0.0, "{key}={v}");
    }
    assert!(value(&out, "outer_iterations").parse::<usize>().unwrap() >= 1);
    assert!(out.contains("outer,score,h,lagrangian,alpha,c,inner_iterations"));
    assert_eq!(fs::read_to_string(&summary).unwrap(), out.split("nfe_w=").next().unwrap());
    assert_eq!(fs::read_to_string(&wh).unwrap().lines().count(), 10);
    assert_eq!(fs::read_to_string(&ah).unwrap().lines().count(), 20);
}

#[test]
fn static_path_and_baseline() {
    let dir = TempDir::new().unwrap();
    simulate(&dir, &["--nodes", "5", "--lags", "0", "--samples", "500", "--avg-degree-w", "2"]);
    let (x, ah) = (p(&dir, "x.csv"), p(&dir, "a_hat.csv"));
    let out = ok(&["learn", "--input", &x, "--lags", "0", "--out-a", &ah]);
    assert!(value(&out, "h_final").parse::<f64>().unwrap() <= 1e-8);
    assert_eq!(fs::read_to_string(&ah).unwrap(), "");
    let out = ok(&["learn", "--input", &x, "--lags", "1", "--method", "baseline"]);
    assert_eq!(value(&out, "method"), "dynotears-style");
}

#[test]
fn config_file_precedence() {
    let dir = TempDir::new().unwrap();
    let cfg = p(&dir, "run.cfg");
    fs::write(&cfg, "# shared settings\nnodes = 4\nlags=1\nsamples = 7\navg-degree-w = 1\n").unwrap();
    simulate(&dir, &["--config", &cfg]);
    let x = fs::read_to_string(p(&dir, "x.csv")).unwrap();
    assert_eq!(x.lines().count(), 8);
    assert_eq!(x.lines().next().unwrap(), "x0,x1,x2,x3");
    // flags beat the file
    simulate(&dir, &["--config", &cfg, "--samples", "9"]);
    assert_eq!(fs::read_to_string(p(&dir, "x.csv")).unwrap().lines().count(), 10);

    fs::write(&cfg, "nodes = 4\nlambda_w 3\n").unwrap();
    let out = svardag(&["simulate", "--config", &cfg, "--out-x", &p(&dir, "y.csv")]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("run.cfg:2:"));
}

#[test]
fn errors_name_the_file() {
    let dir = TempDir::new().unwrap();
    let missing = p(&dir, "missing.csv");
    let out = svardag(&["learn", "--input", &missing]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains(&missing));

    let bad = p(&dir, "bad.csv");
    fs::write(&bad, "a,b\n1,2\n3\n").unwrap();
    let out = svardag(&["learn", "--input", &bad, "--lags", "0"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains(&format!("{bad}:3:")), "{err}");

    fs::write(&bad, "1,2\n3,4\n").unwrap();
    let out = svardag(&["learn", "--input", &bad, "--lags", "2"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("insufficient samples"));
}

#[test]
fn benchmark_csv_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let run = |name: &str| {
        let out = p(&dir, name);
        let args = [
            "benchmark", "--sweep", "samples", "--values", "200,400", "--realizations", "2", "--nodes", "5", "--lags",
            "1", "--avg-degree-w", "2", "--methods", "cvx", "--no-runtime", "--out", &out,
        ];
        ok(&args);
        fs::read_to_string(out).unwrap()
    };
    let first = run("a.csv");
    assert_eq!(first, run("b.csv"));
    let mut lines = first.lines();
    assert_eq!(lines.next(), Some("value,method,metric,median,p25,p75,mean_runtime_s"));
    assert_eq!(lines.count(), 2 * 8);
    assert!(first.lines().skip(1).all(|l| l.ends_with(",NaN") && l.contains(",cvx,")));

    let out = svardag(&["benchmark", "--sweep", "edges", "--values", "1", "--out", &p(&dir, "c.csv")]);
    assert!(!out.status.success());
    assert!(!Path::new(&p(&dir, "c.csv")).exists());
}
