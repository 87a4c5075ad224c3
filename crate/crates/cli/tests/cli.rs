use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use egw_core::solvers::SolveReport;
use serde_json::Value;
use tempfile::TempDir;

fn egw(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_egw"))
        .args(args)
        .output()
        .expect("failed to run egw")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("terminated by signal")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Fixture {
    dir: TempDir,
    mu0: PathBuf,
    mu1: PathBuf,
}

fn fixture() -> Fixture {
    let dir = TempDir::new().unwrap();
    let mu0 = write(
        dir.path(),
        "mu0.json",
        r#"{"dim": 1, "points": [[-1.4], [1.2]], "weights": [0.4, 0.6]}"#,
    );
    let mu1 = write(dir.path(), "mu1.csv", "w,x1\n0.4,-1.01\n0.6,1.31\n");
    Fixture { dir, mu0, mu1 }
}

fn path(f: &Fixture, name: &str) -> PathBuf {
    f.dir.path().join(name)
}

#[test]
fn single_atoms_give_forced_plan() {
    let f = fixture();
    let a = write(
        f.dir.path(),
        "a.json",
        r#"{"dim": 2, "points": [[0.3, 1.0]], "weights": [1.0]}"#,
    );
    let b = write(
        f.dir.path(),
        "b.json",
        r#"{"dim": 1, "points": [[2.0]], "weights": [1.0]}"#,
    );
    let plan = path(&f, "plan.csv");
    let o = egw(&[
        "solve",
        s(&a),
        s(&b),
        "--eps",
        "1",
        "--plan",
        s(&plan),
        "--quiet",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(&plan).unwrap();
    assert_eq!(text, "i,j,mass\n0,0,1.0\n");
}

#[test]
fn auto_picks_fgm_on_convex_instance() {
    let f = fixture();
    let report = path(&f, "report.json");
    // threshold 16 sqrt(M4 M4) ~ 39.1 for these centered measures
    let o = egw(&[
        "solve",
        s(&f.mu0),
        s(&f.mu1),
        "--eps",
        "45",
        "--algo",
        "auto",
        "--report",
        s(&report),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["algorithm"], "fgm");
    assert_eq!(v["convexity"], "certified_convex");
    assert!(stdout(&o).contains("S_eps"));
}

#[test]
fn missing_eps_is_a_validation_error() {
    let f = fixture();
    let o = egw(&["solve", s(&f.mu0), s(&f.mu1)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("--eps"), "{}", stderr(&o));

    let o = egw(&["solve", s(&f.mu0), s(&f.mu1), "--json-errors"]);
    assert_eq!(code(&o), 2);
    let v: Value = serde_json::from_str(stderr(&o).trim()).unwrap();
    assert_eq!(v["error"], "validation");
    assert_eq!(v["exit_code"], 2);
}

#[test]
fn exit_codes_for_bad_inputs() {
    let f = fixture();
    let missing = path(&f, "nope.json");
    let o = egw(&["solve", s(&missing), s(&f.mu1), "--eps", "1"]);
    assert_eq!(code(&o), 4, "{}", stderr(&o));

    let bad = write(
        f.dir.path(),
        "bad.json",
        r#"{"dim": 1, "points": [[0.0]], "weights": [0.5]}"#,
    );
    let o = egw(&["solve", s(&bad), s(&f.mu1), "--eps", "1"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));

    let o = egw(&["solve", s(&f.mu0), s(&f.mu1), "--eps", "-1"]);
    assert_eq!(code(&o), 2);

    // The kernel overflows at this eps.
    let o = egw(&["sinkhorn", s(&f.mu0), s(&f.mu1), "--eps", "1e-4"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

#[test]
fn report_roundtrip_and_plan_marginals() {
    let f = fixture();
    let (report, plan, trace) = (path(&f, "r.json"), path(&f, "p.csv"), path(&f, "t.csv"));
    let o = egw(&[
        "solve",
        s(&f.mu0),
        s(&f.mu1),
        "--eps",
        "45",
        "--report",
        s(&report),
        "--plan",
        s(&plan),
        "--trace",
        s(&trace),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let text = std::fs::read_to_string(&report).unwrap();
    let parsed: SolveReport = serde_json::from_str(&text).unwrap();
    assert_eq!(serde_json::to_string_pretty(&parsed).unwrap() + "\n", text);

    let mut rows = [0.0; 2];
    let mut total = 0.0;
    let mut reader = csv::Reader::from_path(&plan).unwrap();
    assert_eq!(reader.headers().unwrap(), vec!["i", "j", "mass"]);
    for rec in reader.records() {
        let rec = rec.unwrap();
        let i: usize = rec[0].parse().unwrap();
        let m: f64 = rec[2].parse().unwrap();
        rows[i] += m;
        total += m;
    }
    assert!((total - 1.0).abs() <= 1e-9);
    let viol = parsed.certificate.marginal_violation.max(1e-15);
    assert!((rows[0] - 0.4).abs() <= viol + 1e-15);
    assert!((rows[1] - 0.6).abs() <= viol + 1e-15);

    let trace_text = std::fs::read_to_string(&trace).unwrap();
    let mut lines = trace_text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "iter,phi,residual,envelope,delta_sup,sinkhorn_iters"
    );
    assert_eq!(lines.count(), parsed.trace.len());
}

#[test]
fn sinkhorn_subcommand() {
    let f = fixture();
    let (plan, cert) = (path(&f, "p.csv"), path(&f, "c.json"));
    let o = egw(&[
        "sinkhorn",
        s(&f.mu0),
        s(&f.mu1),
        "--eps",
        "5",
        "--aux",
        "[[0.01]]",
        "--delta",
        "1e-6",
        "--out",
        s(&plan),
        "--cert",
        s(&cert),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&cert).unwrap()).unwrap();
    for key in [
        "delta_hilbert",
        "delta_sup",
        "iterations",
        "lambda_k",
        "marginal_violation",
        "converged",
        "certified",
    ] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["certified"], true);
    assert!(v["delta_hilbert"].as_f64().unwrap() <= 1e-6);

    let o = egw(&[
        "sinkhorn",
        s(&f.mu0),
        s(&f.mu1),
        "--eps",
        "5",
        "--gamma",
        "1e-9",
        "--delta",
        "1e-6",
    ]);
    assert_eq!(code(&o), 2);

    let o = egw(&[
        "sinkhorn",
        s(&f.mu0),
        s(&f.mu1),
        "--eps",
        "5",
        "--log-domain",
        "--cert",
        s(&cert),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&cert).unwrap()).unwrap();
    assert_eq!(v["certified"], false);

    let o = egw(&[
        "sinkhorn",
        s(&f.mu0),
        s(&f.mu1),
        "--eps",
        "5",
        "--aux",
        "[[0.1, 0.2]]",
    ]);
    assert_eq!(code(&o), 2);
}

fn debias_value(o: &Output) -> f64 {
    let line = stdout(o)
        .lines()
        .find(|l| l.starts_with("debiased"))
        .unwrap()
        .to_string();
    line.split_whitespace().last().unwrap().parse().unwrap()
}

#[test]
fn debias_same_file_is_exactly_zero() {
    let f = fixture();
    let cloud = write(
        f.dir.path(),
        "cloud.json",
        r#"{"dim": 2, "points": [[0.1, 0.2], [-0.3, 0.1], [0.2, -0.25], [0.0, 0.3]], "weights": [0.1, 0.2, 0.3, 0.4]}"#,
    );
    let o = egw(&["debias", s(&cloud), s(&cloud), "--eps", "0.05"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(debias_value(&o), 0.0);
}

fn save_png(path: &Path, side: u32, pixels: &[(u32, u32, u8)]) {
    let mut img = image::GrayImage::new(side, side);
    for &(x, y, v) in pixels {
        img.put_pixel(x, y, image::Luma([v]));
    }
    img.save(path).unwrap();
}

#[test]
fn debias_images_under_rotation() {
    let f = fixture();
    let png = path(&f, "shape.png");
    save_png(
        &png,
        8,
        &[
            (2, 1, 200),
            (3, 1, 255),
            (2, 2, 255),
            (3, 2, 150),
            (2, 3, 230),
            (2, 4, 255),
            (3, 4, 180),
            (4, 4, 230),
            (5, 4, 128),
            (5, 5, 80),
        ],
    );
    let same = egw(&[
        "debias",
        s(&png),
        s(&png),
        "--eps",
        "0.02",
        "--grad-tol",
        "1e-10",
    ]);
    assert_eq!(code(&same), 0, "{}", stderr(&same));
    let scale: f64 = stdout(&same)
        .lines()
        .find(|l| l.starts_with("S_eps(mu0, mu0)"))
        .unwrap()
        .split_whitespace()
        .last()
        .unwrap()
        .parse()
        .unwrap();
    let rot = egw(&[
        "debias",
        s(&png),
        s(&png),
        "--eps",
        "0.02",
        "--grad-tol",
        "1e-10",
        "--rotate",
        "90",
    ]);
    assert_eq!(code(&rot), 0, "{}", stderr(&rot));
    assert!(
        debias_value(&rot).abs() <= 1e-5 * scale.abs(),
        "{}",
        stdout(&rot)
    );

    let skew = egw(&[
        "debias",
        s(&png),
        s(&png),
        "--eps",
        "0.02",
        "--rotate",
        "45",
        "--pad",
        "2",
    ]);
    assert_eq!(code(&skew), 0, "{}", stderr(&skew));
    assert!(debias_value(&skew).is_finite());
}

#[test]
fn benchmark_is_reproducible() {
    let f = fixture();
    let (a, b) = (path(&f, "a.csv"), path(&f, "b.csv"));
    let run = |out: &Path| {
        egw(&[
            "benchmark",
            "--sizes",
            "8,16",
            "--trials",
            "2",
            "--grad-tol",
            "1e-6",
            "--seed",
            "3",
            "--jobs",
            "2",
            "--out",
            s(out),
            "--quiet",
        ])
    };
    assert_eq!(code(&run(&a)), 0);
    assert_eq!(code(&run(&b)), 0);
    // Every column but the trailing wall time is deterministic.
    let body = |p: &Path| -> Vec<String> {
        std::fs::read_to_string(p)
            .unwrap()
            .lines()
            .map(|l| l.rsplit_once(',').unwrap().0.to_string())
            .collect()
    };
    let (ra, rb) = (body(&a), body(&b));
    assert_eq!(ra, rb);
    assert_eq!(ra.len(), 5);
    assert!(ra[0].starts_with("d,N,trial,eps"));
    assert!(ra[1..].iter().all(|r| r.ends_with(",converged")));

    let o = egw(&[
        "benchmark",
        "--sizes",
        "8,16",
        "--trials",
        "2",
        "--time-budget",
        "0",
    ]);
    assert_eq!(code(&o), 0);
    let rows: Vec<String> = stdout(&o).lines().skip(1).map(str::to_owned).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.contains("budget_exceeded")));

    let o = egw(&["benchmark", "--sizes", "16,8"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn sweep_rows_and_validation() {
    let f = fixture();
    let cloud = write(
        f.dir.path(),
        "cloud.json",
        r#"{"dim": 2, "points": [[0.1, 0.2], [-0.3, 0.1], [0.2, -0.25]], "weights": [0.2, 0.3, 0.5]}"#,
    );
    let out = path(&f, "sweep.csv");
    let o = egw(&[
        "sweep",
        s(&f.mu0),
        s(&cloud),
        "--eps-list",
        "1.0,0.5",
        "--grad-tol",
        "1e-6",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    let header: Vec<&str> = lines[0].split(',').collect();
    assert_eq!(header.iter().filter(|h| h.starts_with("a_")).count(), 2);
    assert_eq!(lines[1].split(',').count(), header.len());

    let o = egw(&[
        "sweep",
        s(&f.mu0),
        s(&cloud),
        "--eps-start",
        "1",
        "--eps-factor",
        "1.5",
        "--eps-count",
        "3",
    ]);
    assert_eq!(code(&o), 2);
    let o = egw(&["sweep", s(&f.mu0), s(&cloud), "--eps-list", "0.5,1.0"]);
    assert_eq!(code(&o), 2);
    let o = egw(&[
        "sweep",
        s(&f.mu0),
        s(&cloud),
        "--eps-start",
        "1",
        "--eps-factor",
        "0.5",
        "--eps-count",
        "2",
        "--grad-tol",
        "1e-6",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 3);
}

#[test]
fn validate_reports_each_file() {
    let f = fixture();
    let o = egw(&["validate", s(&f.mu0), s(&f.mu1)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let lines: Vec<Value> = stdout(&o)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0]["ok"], true);
    assert_eq!(lines[1]["dim"], 1);

    let zero = write(f.dir.path(), "zero.csv", "w,x1\n0.0,1.0\n1.0,2.0\n");
    let o = egw(&["validate", s(&zero)]);
    assert_eq!(code(&o), 2);
    let o = egw(&["validate", s(&zero), "--drop-zero-mass"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}
