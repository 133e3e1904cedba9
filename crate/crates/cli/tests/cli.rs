use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_polyspec"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn polygon(dir: &Path, name: &str, vertices: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, format!("{{\"vertices\": {vertices}}}")).unwrap();
    p
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn csv_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

#[test]
fn square_spectrum_matches_closed_form() {
    let dir = TempDir::new().unwrap();
    let sq = polygon(dir.path(), "square.json", "[[0,0],[1,0],[1,1],[0,1]]");
    let out = run(&[
        "spectrum",
        "--polygon",
        sq.to_str().unwrap(),
        "--bc",
        "dirichlet",
        "--k",
        "4",
        "--refine",
        "4",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("index,eigenvalue,residual\n"));
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 4);
    assert!((rows[0][1] - 2.0 * PI * PI).abs() < 0.01 * 2.0 * PI * PI);
}

#[test]
fn outside_curvature_disc_is_invalid_input() {
    let dir = TempDir::new().unwrap();
    let p = polygon(dir.path(), "far.json", "[[1,1],[2,1],[2,2],[1,2]]");
    let out = run(&[
        "spectrum",
        "--kappa",
        "-0.5",
        "--polygon",
        p.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("OutsideDomain"));
}

#[test]
fn bowtie_is_invalid_input() {
    let dir = TempDir::new().unwrap();
    let p = polygon(dir.path(), "bowtie.json", "[[0,0],[1,1],[1,0],[0,1]]");
    let out = run(&["spectrum", "--polygon", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("SelfIntersecting"));
}

#[test]
fn missing_and_malformed_files_are_invalid_input() {
    let dir = TempDir::new().unwrap();
    let out = run(&[
        "spectrum",
        "--polygon",
        dir.path().join("none.json").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"points\": []}").unwrap();
    let out = run(&["spectrum", "--polygon", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("MalformedJson"));
}

#[test]
fn numeric_options_are_checked_before_work() {
    let dir = TempDir::new().unwrap();
    let sq = polygon(dir.path(), "square.json", "[[0,0],[1,0],[1,1],[0,1]]");
    for args in [
        ["--k", "0"],
        ["--metric-scale", "-1"],
        ["--refine", "12"],
        ["--h", "0"],
    ] {
        let out = run(&[
            "spectrum",
            "--polygon",
            sq.to_str().unwrap(),
            args[0],
            args[1],
        ]);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn width_sweep_finds_crossing_at_unit_height() {
    let dir = TempDir::new().unwrap();
    let a = polygon(dir.path(), "a.json", "[[0,0],[1,0],[1,0.8],[0,0.8]]");
    let b = polygon(dir.path(), "b.json", "[[0,0],[1,0],[1,1.2],[0,1.2]]");
    let csv = dir.path().join("branches.csv");
    let out = run(&[
        "sweep",
        "--polygon",
        a.to_str().unwrap(),
        "--target",
        b.to_str().unwrap(),
        "--samples",
        "41",
        "--k",
        "4",
        "--output",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("param,branch_0,branch_1,branch_2,branch_3\n"));
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 41);
    // smallest sampled gap between the second and third eigenvalue at s = 0.8 + 0.4 t = 1
    let closest = rows
        .iter()
        .min_by(|x, y| ((x[3] - x[2]) / x[2]).total_cmp(&((y[3] - y[2]) / y[2])))
        .unwrap();
    assert!((closest[0] - 0.5).abs() < 1e-12);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("branches.gap.json")).unwrap())
            .unwrap();
    assert_eq!(report["j"], 2);
    assert!((report["param*"].as_f64().unwrap() - 0.5).abs() < 1e-3);
}

#[test]
fn constant_path_gives_flat_branches() {
    let dir = TempDir::new().unwrap();
    let p = polygon(dir.path(), "p.json", "[[0,0],[1,0],[1.2,0.9],[0.1,0.7]]");
    let out = run(&[
        "sweep",
        "--polygon",
        p.to_str().unwrap(),
        "--target",
        p.to_str().unwrap(),
        "--samples",
        "5",
        "--k",
        "3",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let rows = csv_rows(&String::from_utf8(out.stdout).unwrap());
    for b in 1..4 {
        for r in &rows {
            assert!((r[b] - rows[0][b]).abs() <= 1e-8 * rows[0][b]);
        }
    }
}

#[test]
fn kappa_below_limit_is_rejected() {
    let dir = TempDir::new().unwrap();
    let p = polygon(dir.path(), "p.json", "[[-1,-1],[1,-1],[1,1],[-1,1]]");
    let out = run(&[
        "sweep",
        "--polygon",
        p.to_str().unwrap(),
        "--kappa-from",
        "-1",
        "--kappa-to",
        "0.5",
        "--samples",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("KappaOutOfRange"));
}

#[test]
fn kappa_sweep_writes_branches_and_report() {
    let dir = TempDir::new().unwrap();
    let p = polygon(
        dir.path(),
        "p.json",
        "[[-0.5,-0.5],[0.5,-0.5],[0.5,0.5],[-0.5,0.5]]",
    );
    let report = dir.path().join("gap.json");
    let out = run(&[
        "sweep",
        "--polygon",
        p.to_str().unwrap(),
        "--kappa-from",
        "-0.5",
        "--kappa-to",
        "1",
        "--samples",
        "4",
        "--k",
        "3",
        "--refine",
        "1",
        "--gap-report",
        report.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let rows = csv_rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0][0], -0.5);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(report).unwrap()).unwrap();
    assert!(v.get("gap*").is_some() && v.get("discretization_error_estimate").is_some());
}

#[test]
fn validate_suites() {
    let out = run(&["validate", "rectangle"]);
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .starts_with("PASS  1 rectangle"));
    let out = run(&["validate", "pullback"]);
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .contains("max deviation"));
    assert_eq!(run(&["validate", "unknown"]).status.code(), Some(2));
}

#[test]
fn outputs_are_byte_identical_across_runs_and_thread_counts() {
    let dir = TempDir::new().unwrap();
    let p = polygon(dir.path(), "p.json", "[[0,0],[1,0],[1.2,0.9],[0.1,0.7]]");
    let args = [
        "spectrum",
        "--polygon",
        p.to_str().unwrap(),
        "--k",
        "6",
        "--kappa",
        "0.3",
        "--seed",
        "7",
        "--format",
        "json",
    ];
    let a = run(&args);
    let b = run(&args);
    let c = bin()
        .args(args)
        .env("POLYSPEC_THREADS", "1")
        .output()
        .unwrap();
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, c.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["eigenvalues"].as_array().unwrap().len(), 6);
    let bad = bin()
        .args(args)
        .env("POLYSPEC_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn probe_statistics_are_reproducible() {
    let args = [
        "probe",
        "--vertices",
        "4",
        "--count",
        "3",
        "--seed",
        "5",
        "--k",
        "4",
        "--h",
        "0.2",
    ];
    let a = run(&args);
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, run(&args).stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["gaps"].as_array().unwrap().len(), 3);
    let t = run(&[
        "probe",
        "--vertices",
        "3",
        "--count",
        "2",
        "--k",
        "3",
        "--h",
        "0.1",
    ]);
    assert!(t.status.success(), "{}", stderr(&t));
    assert!(stderr(&t).contains("note:"));
}

#[test]
fn delete_vertex_writes_branches_and_endpoint() {
    let dir = TempDir::new().unwrap();
    let p = polygon(
        dir.path(),
        "p.json",
        "[[0,0],[1,0],[1.3,0.6],[0.6,1.1],[-0.2,0.7]]",
    );
    let end = dir.path().join("end.json");
    let out = run(&[
        "delete-vertex",
        "--polygon",
        p.to_str().unwrap(),
        "--samples",
        "6",
        "--k",
        "3",
        "--refine",
        "2",
        "--endpoint",
        end.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(csv_rows(&String::from_utf8(out.stdout).unwrap()).len(), 6);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(end).unwrap()).unwrap();
    assert_eq!(v["vertices"].as_array().unwrap().len(), 5);
    let tri = polygon(dir.path(), "t.json", "[[0,0],[1,0],[0,1]]");
    assert_eq!(
        run(&["delete-vertex", "--polygon", tri.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn mesh_export() {
    let dir = TempDir::new().unwrap();
    let sq = polygon(dir.path(), "square.json", "[[0,0],[1,0],[1,1],[0,1]]");
    let out = run(&[
        "mesh",
        "--polygon",
        sq.to_str().unwrap(),
        "--structural",
        "--refine",
        "1",
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["triangles"].as_array().unwrap().len(), 8);
    assert_eq!(v["points"].as_array().unwrap().len(), 9);
    assert_eq!(v["boundary"].as_array().unwrap().len(), 8);
}
