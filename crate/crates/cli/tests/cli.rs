use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use aniso_core::hardy_atoms::{construct_special_function, special_atom, AtomSpec, AtomVariant, Locality};
use aniso_core::littlewood_paley::{Grid, GridFunction};
use aniso_core::{ExpansiveMatrix, StepQuasiNorm};
use nalgebra::DVector;
use serde_json::Value;

fn aniso(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aniso")).args(args).output().expect("binary runs")
}

fn scratch() -> tempfile::TempDir {
    tempfile::tempdir().unwrap()
}

fn matrix_file(dir: &Path, name: &str, rows: &str) -> String {
    let d = rows.matches('[').count() - 1;
    let path = dir.join(name);
    fs::write(&path, format!("{{\"d\": {d}, \"rows\": {rows}}}")).unwrap();
    path.display().to_string()
}

fn function_file(dir: &Path, name: &str, f: &GridFunction) -> String {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string(&f.to_json()).unwrap()).unwrap();
    path.display().to_string()
}

fn s(p: &Path) -> String {
    p.display().to_string()
}

#[test]
fn classify_reports_both_verdicts() {
    let dir = scratch();
    let a = matrix_file(dir.path(), "a.json", "[[2, 0], [0, 4]]");
    let b = matrix_file(dir.path(), "b.json", "[[4, 0], [0, 2]]");
    let out = aniso(&["classify", "--matrix-a", &a, "--matrix-b", &b, "--adjoint", "--out", &s(dir.path())]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["verdict"], "NotCoarselyEquivalent");
    for key in ["slope", "r2", "s_series", "max_J", "max_I"] {
        assert!(v.get(key).is_some(), "{key}");
    }
    assert!(dir.path().join("classify.json").exists());

    let a2 = matrix_file(dir.path(), "a2.json", "[[2, 0], [0, 2]]");
    let b2 = matrix_file(dir.path(), "b2.json", "[[4, 0], [0, 4]]");
    let out = aniso(&["classify", "--matrix-a", &a2, "--matrix-b", &b2, "--out", &s(dir.path())]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["verdict"], "CoarselyEquivalent");
}

#[test]
fn validation_errors_exit_2() {
    let dir = scratch();
    let a = matrix_file(dir.path(), "a.json", "[[2, 0], [0, 4]]");
    let bad = matrix_file(dir.path(), "bad.json", "[[0.5, 0], [0, 4]]");
    let out = aniso(&["classify", "--matrix-a", &a, "--matrix-b", &bad, "--out", &s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not expansive"));

    let missing = aniso(&["rho", "--matrix", "/nonexistent/m.json", "--points", "p.csv"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = aniso(&["classify", "--frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert!(aniso(&["--help"]).status.success());
}

#[test]
fn rho_csv_matches_library() {
    let dir = scratch();
    let m = matrix_file(dir.path(), "m.json", "[[2, 1], [0, 3]]");
    fs::write(dir.path().join("pts.csv"), "x1,x2\n1,0\n0,0\n-0.3,2.5\n40,-7\n").unwrap();
    let target = dir.path().join("rho.csv");
    let out = aniso(&["rho", "--matrix", &m, "--points", &s(&dir.path().join("pts.csv")), "--out", &s(&target)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&target).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x1,x2,rho,index"));
    let q = StepQuasiNorm::new(&ExpansiveMatrix::from_rows(&[vec![2.0, 1.0], vec![0.0, 3.0]]).unwrap()).unwrap();
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        let x = DVector::from_vec(vec![f[0].parse().unwrap(), f[1].parse().unwrap()]);
        assert_eq!(f[2].parse::<f64>().unwrap(), q.rho(&x).unwrap());
        if f[2] == "0" {
            assert_eq!(f[3], "");
        } else {
            assert_eq!(f[3].parse::<i64>().unwrap(), q.ball_index(&x).unwrap());
        }
    }
}

#[test]
fn cover_lists_index_sets() {
    let dir = scratch();
    let a = matrix_file(dir.path(), "a.json", "[[2, 0], [0, 4]]");
    let out = aniso(&["cover", "--matrix", &a, "--i-max", "5", "--out", &s(dir.path())]);
    assert!(out.status.success());
    let text = fs::read_to_string(dir.path().join("cover.csv")).unwrap();
    assert_eq!(text.lines().next(), Some("i,set,size"));
    assert_eq!(text.lines().count(), 7);
    // every cover element meets itself
    for (i, line) in text.lines().skip(1).enumerate() {
        let set = line.split(',').nth(1).unwrap();
        assert!(set.split(';').any(|j| j == i.to_string()));
    }
}

#[test]
fn tlnorm_appends_rows() {
    let dir = scratch();
    let a = matrix_file(dir.path(), "a.json", "[[2]]");
    let grid = Grid::new(1, 256, 4.0).unwrap();
    let f = GridFunction::from_real_fn(&grid, |x| (-4.0 * x[0] * x[0]).exp());
    let input = function_file(dir.path(), "f.json", &f);
    let args = ["tlnorm", "--matrix", &a, "--alpha", "0", "--p", "2", "--q", "2", "--i-max", "4", "--input", &input];
    for _ in 0..2 {
        let out = aniso(&[&args[..], &["--out", &s(dir.path())]].concat());
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(String::from_utf8_lossy(&out.stdout).trim().parse::<f64>().unwrap() > 0.0);
    }
    let text = fs::read_to_string(dir.path().join("tlnorm.csv")).unwrap();
    assert_eq!(text.lines().next(), Some("input,alpha,p,q,i_max,n,L,residual,tl_norm"));
    assert_eq!(text.lines().count(), 3);

    let inf = aniso(&[&args[..7], &["--q", "inf", "--i-max", "4", "--input", &input, "--out", &s(dir.path())]].concat());
    assert!(inf.status.success(), "{}", String::from_utf8_lossy(&inf.stderr));

    let wrong = aniso(&[&args[..], &["--grid-n", "512", "--out", &s(dir.path())]].concat());
    assert_eq!(wrong.status.code(), Some(2));
}

#[test]
fn hpnorm_numeric_limit_exits_3() {
    let dir = scratch();
    let a = matrix_file(dir.path(), "a.json", "[[2]]");
    let fine = Grid::new(1, 1024, 4.0).unwrap();
    let f = GridFunction::from_real_fn(&fine, |x| (-4.0 * x[0] * x[0]).exp());
    let input = function_file(dir.path(), "f.json", &f);
    let out = aniso(&["hpnorm", "--matrix", &a, "--p", "0.5", "--j-max", "2", "--input", &input, "--out", &s(dir.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let local: f64 = String::from_utf8_lossy(&out.stdout).trim().parse().unwrap();
    let out = aniso(&[
        "hpnorm", "--matrix", &a, "--p", "0.5", "--j-max", "2", "--input", &input, "--nonlocal", "--out", &s(dir.path()),
    ]);
    let nonlocal: f64 = String::from_utf8_lossy(&out.stdout).trim().parse().unwrap();
    assert!(nonlocal >= local);

    // too coarse to resolve the kernel at scale 0
    let coarse = Grid::new(1, 32, 4.0).unwrap();
    let g = function_file(dir.path(), "g.json", &GridFunction::from_real_fn(&coarse, |x| (-x[0] * x[0]).exp()));
    let out = aniso(&["hpnorm", "--matrix", &a, "--p", "0.5", "--input", &g, "--out", &s(dir.path())]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn special_function_and_atom_validation() {
    let dir = scratch();
    let target = dir.path().join("f0.json");
    let out = aniso(&["atoms", "special", "--d", "1", "--s", "2", "--out", &s(&target)]);
    assert!(out.status.success());
    let f0: Value = serde_json::from_str(&fs::read_to_string(&target).unwrap()).unwrap();
    assert_eq!(f0["coefficients"].as_array().unwrap().len(), 3);

    let a = matrix_file(dir.path(), "a.json", "[[2]]");
    let e = ExpansiveMatrix::scalar(1, 2.0).unwrap();
    let spec = AtomSpec {
        p: 0.5,
        s: 2,
        center: vec![0.3],
        scale: 0,
        variant: AtomVariant::Standard,
        locality: Locality::Nonlocal,
    };
    let spec_path = dir.path().join("spec.json");
    fs::write(&spec_path, serde_json::to_string(&spec).unwrap()).unwrap();
    let grid = Grid::new(1, 1 << 14, 2.0).unwrap();
    let atom = special_atom(&construct_special_function(1, 2, None).unwrap(), &spec, &e, &grid).unwrap();
    let input = function_file(dir.path(), "atom.json", &atom);
    let out = aniso(&["atoms", "validate", "--spec", &s(&spec_path), "--input", &input, "--matrix", &a, "--out", &s(dir.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["passes"], true);
}

#[test]
fn weakstar_writes_csv_and_json() {
    let dir = scratch();
    let out = aniso(&["experiment", "weakstar", "--n", "10,100", "--out", &s(dir.path())]);
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.path().join("weakstar_weakstar.csv")).unwrap();
    assert_eq!(
        csv.lines().next(),
        Some("n,g,pairing,pairing_exact,limit,error,l1_norm,support_measure,support_bound")
    );
    assert_eq!(csv.lines().count(), 1 + 2 * 4);
    let summary: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("weakstar_summary.json")).unwrap()).unwrap();
    assert!(summary["version"].as_str().unwrap().starts_with('v'));

    let out = aniso(&["experiment", "weakstar", "--n", "10", "--format", "json", "--seed", "9", "--out", &s(dir.path())]);
    assert!(out.status.success());
    let report: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("weakstar.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 9);
    assert_eq!(report["tables"][0][1]["columns"][2]["provenance"], "measured");
}

#[test]
fn khintchine_is_deterministic_across_thread_counts() {
    let run = |threads: &str, dir: &PathBuf| {
        let out = Command::new(env!("CARGO_BIN_EXE_aniso"))
            .env("ANISO_THREADS", threads)
            .args(["experiment", "khintchine", "--K", "2,4", "--seed", "3", "--out", &s(dir)])
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        fs::read_to_string(dir.join("khintchine_khintchine.csv")).unwrap()
    };
    let (d1, d2) = (scratch(), scratch());
    let one = run("1", &d1.path().to_path_buf());
    let four = run("4", &d2.path().to_path_buf());
    assert_eq!(one, four);
    assert!(one.starts_with("K,geometric,exhaustive,mean_norm_p,ratio_q1,ratio_q2,ratio_q4"));
}

#[test]
fn blowup_emits_tables() {
    let dir = scratch();
    let out = aniso(&["experiment", "blowup", "--k", "1,2", "--grid-n", "256", "--out", &s(dir.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("blowup_blowup.csv")).unwrap();
    assert!(csv.starts_with("k,j1,d_k,c_k,delta_k,j_max,log_norm,log_lower_bound"));
    assert!(String::from_utf8_lossy(&out.stdout).contains("slope_predicted"));
}
