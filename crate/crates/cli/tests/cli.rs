use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rs_epipolar::hierarchy::implicit_fit_residual;
use rs_epipolar::synth::error_rotation;
use rs_epipolar::ImagePoint;
use rsepi_cli::exit;
use rsepi_cli::files::CorrespondenceFile;
use rsepi_cli::json::{AuditReport, ErrorReport, ParamsJson, SolveReport};
use serde_json::Value;
use tempfile::TempDir;

fn rsepi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rsepi"))
        .args(args)
        .env("RUST_LOG", "info")
        .output()
        .expect("binary runs")
}

fn p(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn s(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn schema(name: &str) -> Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas").join(format!("{name}.schema.json"));
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn assert_valid(name: &str, doc: &Value) {
    let v = jsonschema::validator_for(&schema(name)).unwrap();
    let errors: Vec<String> = v.iter_errors(doc).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{name}: {errors:?}");
}

fn read_value(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn synth(dir: &TempDir, tag: &str, extra: &[&str]) -> (PathBuf, PathBuf) {
    let corr = p(dir, &format!("{tag}.txt"));
    let gt = p(dir, &format!("{tag}.json"));
    let mut args = vec!["synth", "--out", s(&corr), "--params", s(&gt)];
    args.extend_from_slice(extra);
    let out = rsepi(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    (corr, gt)
}

fn last_stderr_json(out: &Output) -> ErrorReport {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().expect("stderr has an error line");
    let v: Value = serde_json::from_str(line).unwrap();
    assert_valid("error", &v);
    serde_json::from_value(v).unwrap()
}

#[test]
fn synth_writes_loadable_files_and_valid_ground_truth() {
    let dir = TempDir::new().unwrap();
    let (corr, gt) = synth(&dir, "a", &[]);
    let text = std::fs::read_to_string(&corr).unwrap();
    let file = CorrespondenceFile::parse(&text).unwrap();
    assert!(file.rows.len() >= 20);
    assert_eq!(file.to_text(), text);
    assert_valid("params", &read_value(&gt));
}

#[test]
fn synth_is_deterministic_under_a_seed() {
    let dir = TempDir::new().unwrap();
    let (c1, g1) = synth(&dir, "a", &["--seed", "7", "--noise", "1e-4"]);
    let (c2, g2) = synth(&dir, "b", &["--seed", "7", "--noise", "1e-4"]);
    let (c3, _) = synth(&dir, "c", &["--seed", "8", "--noise", "1e-4"]);
    assert_eq!(std::fs::read(&c1).unwrap(), std::fs::read(&c2).unwrap());
    assert_eq!(std::fs::read(&g1).unwrap(), std::fs::read(&g2).unwrap());
    assert_ne!(std::fs::read(&c1).unwrap(), std::fs::read(&c3).unwrap());
}

#[test]
fn audit_passes_every_generated_point() {
    let dir = TempDir::new().unwrap();
    for model in ["perspective", "linear-rs", "uniform-rs"] {
        let (corr, gt) = synth(&dir, model, &["--model", model]);
        let out = rsepi(&["audit", s(&corr), "--params", s(&gt)]);
        assert!(out.status.success());
        let v: Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_valid("audit", &v);
        let r: AuditReport = serde_json::from_value(v).unwrap();
        assert_eq!(r.in_front, r.n_points, "{model}");
        assert_eq!(r.cheirality_fraction, 1.0);
    }
}

#[test]
fn linear_chain_recovers_rotation_from_synthetic_file() {
    let dir = TempDir::new().unwrap();
    let (corr, gt) = synth(&dir, "a", &[]);
    let result = p(&dir, "r.json");
    let out = rsepi(&["solve", s(&corr), "--chain", "linear", "--out", s(&result)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("model linear-rs, 100 correspondences, algorithm: linear 20-point"), "{stderr}");
    let v = read_value(&result);
    assert_valid("solve-result", &v);
    let r: SolveReport = serde_json::from_value(v).unwrap();
    let truth: ParamsJson = serde_json::from_value(read_value(&gt)).unwrap();
    let est = r.params.unwrap().to_params().unwrap();
    assert!(error_rotation(&est.rotation, &truth.to_params().unwrap().rotation) <= 1e-5);
}

#[test]
fn rolling_shutter_fit_of_global_shutter_data_has_negligible_velocity() {
    let dir = TempDir::new().unwrap();
    let (corr, _) = synth(&dir, "gs", &["--model", "perspective"]);
    let out = rsepi(&["solve", s(&corr), "--model", "linear-rs", "--chain", "nonlinear"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_valid("solve-result", &v);
    let r: SolveReport = serde_json::from_value(v).unwrap();
    let p = r.params.unwrap();
    let norm = |a: [f64; 3]| a.iter().map(|x| x * x).sum::<f64>().sqrt();
    assert!(norm(p.d1) <= 1e-4 && norm(p.d2) <= 1e-4, "{:?} {:?}", p.d1, p.d2);
}

#[test]
fn ransac_chain_reports_inlier_mask() {
    let dir = TempDir::new().unwrap();
    let (corr, _) = synth(&dir, "a", &["--points", "60"]);
    let out = rsepi(&["solve", s(&corr), "--chain", "ransac", "--final-threshold", "1e-14"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_valid("solve-result", &v);
    let r: SolveReport = serde_json::from_value(v).unwrap();
    assert_eq!(r.inliers.unwrap(), vec![true; 60]);
}

#[test]
fn too_few_points_exit_code_and_no_output() {
    let dir = TempDir::new().unwrap();
    let (corr, _) = synth(&dir, "a", &["--points", "10"]);
    let result = p(&dir, "r.json");
    let out = rsepi(&["solve", s(&corr), "--out", s(&result)]);
    assert_eq!(out.status.code(), Some(exit::INSUFFICIENT_POINTS));
    assert!(!result.exists());
    assert_eq!(last_stderr_json(&out).error, "insufficient-points");
}

#[test]
fn coincident_points_are_degenerate() {
    let dir = TempDir::new().unwrap();
    let (corr, _) = synth(&dir, "a", &[]);
    let mut file = CorrespondenceFile::load(&corr).unwrap();
    let first = file.rows[0];
    file.rows.iter_mut().for_each(|r| *r = first);
    file.save(&corr).unwrap();
    let out = rsepi(&["solve", s(&corr), "--chain", "linear"]);
    assert_eq!(out.status.code(), Some(exit::DEGENERATE));
    assert_eq!(last_stderr_json(&out).exit_code, exit::DEGENERATE);
}

#[test]
fn random_pairs_have_no_consensus() {
    let dir = TempDir::new().unwrap();
    let (corr, _) = synth(&dir, "a", &["--points", "200"]);
    let mut file = CorrespondenceFile::load(&corr).unwrap();
    // pair each first-image point with an unrelated second-image point
    let n = file.rows.len();
    let seconds: Vec<[f64; 2]> = file.rows.iter().map(|r| [r[2], r[3]]).collect();
    for (i, r) in file.rows.iter_mut().enumerate() {
        let j = (i * 7 + 3) % n;
        r[2] = seconds[j][0];
        r[3] = seconds[j][1];
    }
    file.save(&corr).unwrap();
    let out = rsepi(&["solve", s(&corr), "--chain", "ransac", "--threshold", "1e-8"]);
    assert_eq!(out.status.code(), Some(exit::NO_CONSENSUS), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn input_errors_use_the_io_exit_code() {
    let dir = TempDir::new().unwrap();
    let missing = p(&dir, "missing.txt");
    let out = rsepi(&["solve", s(&missing)]);
    assert_eq!(out.status.code(), Some(exit::IO));
    let garbage = p(&dir, "garbage.txt");
    std::fs::write(&garbage, "version 1\nmodel linear-rs\nhello\n").unwrap();
    let out = rsepi(&["solve", s(&garbage)]);
    assert_eq!(out.status.code(), Some(exit::IO));
    assert_eq!(last_stderr_json(&out).error, "parse");
}

#[test]
fn usage_errors_exit_with_two() {
    let out = rsepi(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(exit::USAGE));
    assert_eq!(last_stderr_json(&out).error, "usage");
    assert!(rsepi(&["solve", "--help"]).status.success());
    assert_eq!(rsepi(&["solve", "x.txt", "--chain", "magic"]).status.code(), Some(exit::USAGE));
    assert_eq!(rsepi(&["sweep", "--kind", "noise", "--csv", "a", "--json", "b"]).status.code(), Some(exit::USAGE));
}

fn curve_points(csv: &str) -> Vec<Vec<ImagePoint>> {
    let mut curves: Vec<Vec<ImagePoint>> = Vec::new();
    for line in csv.lines().filter(|l| !l.starts_with('#')).skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let id: usize = f[0].parse().unwrap();
        if curves.len() <= id {
            curves.resize(id + 1, Vec::new());
        }
        curves[id].push(ImagePoint::new(f[1].parse().unwrap(), f[2].parse().unwrap()));
    }
    curves
}

#[test]
fn curves_have_the_degree_of_their_model() {
    let dir = TempDir::new().unwrap();
    for (model, degree, tol) in [("perspective", 1, 1e-10), ("linear-rs", 2, 1e-8), ("uniform-rs", 3, 1e-8)] {
        let (corr, gt) = synth(&dir, model, &["--model", model, "--points", "20", "--w-scale", "3e-4"]);
        let out = rsepi(&["curves", "--params", s(&gt), "--points", s(&corr), "--samples", "60"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let csv = String::from_utf8(out.stdout).unwrap();
        assert!(csv.starts_with(&format!("# model={model} degree={degree}")));
        let curves = curve_points(&csv);
        let mut checked = 0;
        for pts in curves.iter().filter(|c| c.len() >= 12) {
            assert!(implicit_fit_residual(pts, degree) <= tol, "{model}");
            checked += 1;
        }
        assert!(checked >= 5, "{model}: only {checked} curves inside the image");
    }
}

#[test]
fn curves_accept_a_matrix_file() {
    let dir = TempDir::new().unwrap();
    let (corr, _) = synth(&dir, "a", &["--points", "5"]);
    let result = p(&dir, "r.json");
    assert!(rsepi(&["solve", s(&corr), "--chain", "linear", "--out", s(&result)]).status.code() == Some(exit::INSUFFICIENT_POINTS));
    let (corr, _) = synth(&dir, "b", &[]);
    assert!(rsepi(&["solve", s(&corr), "--chain", "linear", "--out", s(&result)]).status.success());
    let matrix = p(&dir, "m.json");
    let r = read_value(&result);
    assert_valid("matrix", &r["matrix"]);
    std::fs::write(&matrix, r["matrix"].to_string()).unwrap();
    let out = rsepi(&["curves", "--matrix", s(&matrix), "--points", s(&corr)]);
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("# model=linear-rs degree=2"));
}

#[test]
fn sweep_writes_reports_deterministically() {
    let dir = TempDir::new().unwrap();
    let run = |tag: &str| {
        let csv = p(&dir, &format!("{tag}.csv"));
        let json = p(&dir, &format!("{tag}.json"));
        let out = rsepi(&[
            "sweep", "--kind", "velocity", "--grid", "1e-3,1e-4", "--trials", "3", "--points", "40", "--noise", "1e-4", "--csv",
            s(&csv), "--json", s(&json),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        (std::fs::read_to_string(csv).unwrap(), read_value(&json))
    };
    let (csv, json) = run("a");
    assert_valid("sweep-report", &json);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("sweep_value,trial,model,e_R,e_T,F_angle,status"));
    assert_eq!(lines.count(), 12);
    assert_eq!(json["aggregates"].as_array().unwrap().len(), 4);
    assert_eq!(run("b"), (csv, json));
}
