//! End-to-end runs of the command-line binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use elastrm::artifacts::decode_operator;
use serde_json::Value;

const MATERIAL: &str = "[material]\nkappa_p = 1.0471975511965976\nkappa_s = 1.9634954084936207\n";

fn scenes_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenes")
}

fn run(scene: &Path, task: &str, out: &Path, extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_elastrm"))
        .args(["--scene", scene.to_str().unwrap(), "--task", task, "--out", out.to_str().unwrap()])
        .args(extra)
        .output()
        .unwrap()
}

fn write_scene(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("scene.toml");
    fs::write(&p, body).unwrap();
    p
}

fn report(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

fn error_report(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("error.json")).unwrap()).unwrap()
}

#[test]
fn forward_on_single_sphere_meets_boundary_condition() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&scenes_dir().join("ex1.toml"), "forward", tmp.path(), &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(tmp.path());
    assert!(r["boundary_residual"].as_f64().unwrap() <= 1e-5);
    let csv = fs::read_to_string(tmp.path().join("far_field.csv")).unwrap();
    assert!(csv.starts_with(&format!("# config_hash={}", r["config_hash"].as_str().unwrap())));
    assert_eq!(csv.lines().count(), 2 + 231);
}

#[test]
fn missing_inputs_are_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&tmp.path().join("absent.toml"), "forward", &tmp.path().join("o"), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_report(&tmp.path().join("o"))["kind"], "config");

    let scene = write_scene(
        tmp.path(),
        &format!("{MATERIAL}\n[[particle]]\ncenter = [0.0, 0.0, 0.0]\nradius = 0.5\nsmatrix = \"nope.esmx\"\n"),
    );
    let out = run(&scene, "operator", &tmp.path().join("o"), &[]);
    assert_eq!(out.status.code(), Some(2));
    let e: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(e["message"].as_str().unwrap().contains("nope.esmx"));

    // forward needs an incident wave
    let scene = write_scene(tmp.path(), &format!("{MATERIAL}\n[[particle]]\ncenter = [0.0, 0.0, 0.0]\nradius = 0.5\n"));
    assert_eq!(run(&scene, "forward", &tmp.path().join("o"), &[]).status.code(), Some(2));
    // unknown keys are rejected
    let scene = write_scene(tmp.path(), &format!("{MATERIAL}radius = 2.0\n"));
    assert_eq!(run(&scene, "asymptotics", &tmp.path().join("o"), &[]).status.code(), Some(2));
    // bad flag values
    let scene = scenes_dir().join("small_sphere.toml");
    assert_eq!(run(&scene, "asymptotics", &tmp.path().join("o"), &["--tol", "0"]).status.code(), Some(2));
    assert_eq!(run(&scene, "asymptotics", &tmp.path().join("o"), &["--noise", "-1"]).status.code(), Some(2));
}

#[test]
fn overlapping_spheres_are_rejected_before_computation() {
    let tmp = tempfile::tempdir().unwrap();
    let scene = write_scene(
        tmp.path(),
        &format!("{MATERIAL}\n[[particle]]\ncenter = [0.0, 0.0, 0.0]\nradius = 0.5\n\n[[particle]]\ncenter = [0.8, 0.0, 0.0]\nradius = 0.5\n"),
    );
    let out_dir = tmp.path().join("o");
    let out = run(&scene, "operator", &out_dir, &[]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_report(&out_dir)["kind"], "input");
    let names: Vec<_> = fs::read_dir(&out_dir).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names, vec!["error.json"]);
}

#[test]
fn solver_failure_exits_with_three() {
    let tmp = tempfile::tempdir().unwrap();
    let scene = write_scene(
        tmp.path(),
        &format!("order = 2\n\n{MATERIAL}\n[[particle]]\ncenter = [0.0, 0.0, 0.0]\nradius = 0.5\n\n[[particle]]\ncenter = [2.0, 0.0, 0.0]\nradius = 0.5\n\n[incident]\ndirection = [0.0, 0.0, 1.0]\npolarization = [1.0, 0.0, 0.0]\n"),
    );
    // a tolerance far below machine precision cannot be reached
    let out = run(&scene, "forward", &tmp.path().join("o"), &["--tol", "1e-300"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let e = error_report(&tmp.path().join("o"));
    assert_eq!(e["kind"], "solver");
    assert!(!e["history"].as_array().unwrap().is_empty());
}

fn two_sphere_scene(dir: &Path) -> PathBuf {
    write_scene(
        dir,
        &format!("order = 4\n\n{MATERIAL}\n[[particle]]\ncenter = [0.0, 0.0, 0.0]\nradius = 0.5\n\n[[particle]]\ncenter = [2.0, 1.0, 0.0]\nradius = 0.5\n\n[imaging]\nlo = [-1.0, -1.0, -1.0]\nhi = [3.0, 2.0, 1.0]\nspacing = 0.25\n"),
    )
}

#[test]
fn outputs_are_byte_identical_for_fixed_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let scene = two_sphere_scene(tmp.path());
    let flags = ["--ntheta", "6", "--nphi", "12", "--seed", "9"];
    for task in ["operator", "image"] {
        let (a, b) = (tmp.path().join(format!("{task}_a")), tmp.path().join(format!("{task}_b")));
        assert!(run(&scene, task, &a, &flags).status.success());
        assert!(run(&scene, task, &b, &flags).status.success());
        let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        assert!(names.len() >= 3);
        for n in names {
            assert_eq!(fs::read(a.join(&n)).unwrap(), fs::read(b.join(&n)).unwrap(), "{task}/{n:?}");
        }
    }
    // a different seed changes the noisy operator
    let c = tmp.path().join("c");
    assert!(run(&scene, "operator", &c, &["--ntheta", "6", "--nphi", "12", "--seed", "10"]).status.success());
    assert_ne!(
        fs::read(c.join("operator.bin")).unwrap(),
        fs::read(tmp.path().join("operator_a/operator.bin")).unwrap()
    );
}

#[test]
fn operator_file_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let scene = two_sphere_scene(tmp.path());
    let out = tmp.path().join("o");
    assert!(run(&scene, "operator", &out, &["--ntheta", "5", "--nphi", "10", "--noise", "0"]).status.success());
    let r = report(&out);
    let op = decode_operator(&fs::read(out.join("operator.bin")).unwrap()).unwrap();
    assert_eq!(op.hash, r["config_hash"].as_str().unwrap());
    assert_eq!((op.n_theta, op.n_phi), (5, 10));
    assert_eq!(op.entries.len(), 150 * 150);
    assert_eq!(op.noise, 0.0);
    assert!(decode_operator(&fs::read(out.join("report.json")).unwrap()).is_err());
    let spectrum = fs::read_to_string(out.join("spectrum.csv")).unwrap();
    assert_eq!(spectrum.lines().count(), 2 + 150);
}

#[test]
fn asymptotics_table_reports_exact_shear_eigenvalue() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(run(&scenes_dir().join("small_sphere.toml"), "asymptotics", tmp.path(), &[]).status.success());
    let r = report(tmp.path());
    let rows = r["rows"].as_array().unwrap();
    for row in rows.iter().filter(|row| row["quantity"].as_str().unwrap().ends_with("_exact")) {
        assert!(row["relative_error"].as_f64().unwrap() < 1e-10, "{row}");
    }
    assert_eq!(rows.len(), 2 + 4 + 4);
}

#[test]
fn selective_task_reports_decreasing_residuals() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(run(&scenes_dir().join("point_scatterers.toml"), "selective", tmp.path(), &[]).status.success());
    let r = report(tmp.path());
    assert_eq!(r["monotone"], true);
    let expected = r["self_value_expected"].as_f64().unwrap();
    assert!((r["self_value"][0].as_f64().unwrap() - expected).abs() < 1e-10 * expected);
}

#[test]
fn image_task_localizes_five_spheres() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&scenes_dir().join("ex4.toml"), "image", tmp.path(), &["--seed", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(tmp.path());
    assert_eq!(r["top_maxima_localized"], true, "{}", r["centers"]);
    let hdr = fs::read_to_string(tmp.path().join("image.hdr")).unwrap();
    assert!(hdr.contains(r["config_hash"].as_str().unwrap()));
}
