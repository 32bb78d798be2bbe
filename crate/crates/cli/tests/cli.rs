use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn edgefem(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_edgefem"))
        .args(args)
        .args(["--out", dir.to_str().unwrap()])
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

#[test]
fn help_lists_subcommands_and_flags() {
    let out = Command::new(env!("CARGO_BIN_EXE_edgefem"))
        .arg("--help")
        .output()
        .unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    for word in [
        "solve",
        "study",
        "factors",
        "export-vtk",
        "--config",
        "--set",
        "--out",
        "--threads",
        "--seed",
        "Exit codes",
    ] {
        assert!(text.contains(word), "{word}");
    }
}

#[test]
fn invalid_configuration_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        code(&edgefem(dir.path(), &["solve", "--set", "levels=[]"])),
        2
    );
    assert_eq!(
        code(&edgefem(dir.path(), &["solve", "--set", "no_such_key=1"])),
        2
    );
    assert_eq!(
        code(&edgefem(
            dir.path(),
            &["solve", "--config", "/nonexistent/study.toml"]
        )),
        2
    );
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "omega = -1.0\n").unwrap();
    assert_eq!(
        code(&edgefem(
            dir.path(),
            &["factors", "--config", bad.to_str().unwrap()]
        )),
        2
    );
}

#[test]
fn resonant_frequency_exits_with_code_three() {
    let dir = tempfile::tempdir().unwrap();
    // first discrete cavity eigenvalue at n = 2 is about 17.0636
    let omega = format!("omega={}", (17.0636f64 * 1.002).sqrt());
    let out = edgefem(
        dir.path(),
        &["solve", "--set", "levels=[2]", "--set", &omega],
    );
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("17.06"));
}

#[test]
fn solve_writes_coefficients_vtk_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = edgefem(dir.path(), &["solve", "--set", "levels=[1, 2]"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("solve.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("level,n,h,ndof"));
    let residual: f64 = lines[2].split(',').nth(5).unwrap().parse().unwrap();
    assert!(residual < 1e-10);
    let vtk = fs::read_to_string(dir.path().join("solution_n2.vtk")).unwrap();
    assert!(vtk.contains("UNSTRUCTURED_GRID") && vtk.contains("VECTORS E_h double"));
    let coeffs = fs::read_to_string(dir.path().join("solution_n2.txt")).unwrap();
    let ndof: usize = lines[2].split(',').nth(3).unwrap().parse().unwrap();
    assert_eq!(coeffs.lines().count(), ndof);
}

#[test]
fn factors_are_reproducible_and_scale_with_frequency() {
    let dir = tempfile::tempdir().unwrap();
    let run = |extra: &[&str]| -> serde_json::Value {
        let mut args = vec![
            "factors",
            "--seed",
            "5",
            "--set",
            "levels=[2]",
            "--set",
            "surrogate_levels=1",
        ];
        args.extend_from_slice(extra);
        let out = edgefem(dir.path(), &args);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        serde_json::from_str(&fs::read_to_string(dir.path().join("factors.json")).unwrap()).unwrap()
    };
    let a = run(&[]);
    let b = run(&[]);
    assert_eq!(a["reports"], b["reports"]);
    let slow = run(&["--set", "omega=0.1"]);
    let g1 = a["reports"][0]["gamma_div"].as_f64().unwrap();
    let g2 = slow["reports"][0]["gamma_div"].as_f64().unwrap();
    assert!((g2 / g1 - 0.1).abs() < 1e-6, "{g1} {g2}");
    assert_eq!(a["reports"][0]["c_st_source"], "oracle");
}

#[test]
fn study_writes_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = edgefem(
        dir.path(),
        &[
            "study",
            "--threads",
            "2",
            "--set",
            "levels=[1, 2]",
            "--set",
            "surrogate_levels=1",
        ],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("study.csv")).unwrap();
    assert_eq!(String::from_utf8(out.stdout).unwrap(), csv);
    assert!(csv.starts_with("level,n,h,ndof,omega,err_energy"));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("study.json")).unwrap()).unwrap();
    assert_eq!(json["schema_version"], 1);
    assert_eq!(json["reports"].as_array().unwrap().len(), 2);
}

#[test]
fn config_file_and_overrides_combine() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("study.toml");
    fs::write(&cfg, "levels = [1]\nomega = 1.0\n").unwrap();
    assert_eq!(
        code(&edgefem(
            dir.path(),
            &["export-vtk", "--config", cfg.to_str().unwrap()]
        )),
        2
    );
    fs::write(&cfg, "schema_version = 1\nomega = 1.0\nsolution = \"ms1\"\nlevels = [1, 2]\n[domain]\nmin = [0.0, 0.0, 0.0]\nmax = [2.0, 1.0, 1.0]\n").unwrap();
    let out = edgefem(
        dir.path(),
        &[
            "export-vtk",
            "--config",
            cfg.to_str().unwrap(),
            "--set",
            "levels=[3]",
        ],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!dir.path().join("mesh_n1.vtk").exists());
    let vtk = fs::read_to_string(dir.path().join("mesh_n3.vtk")).unwrap();
    assert!(vtk.contains("CELLS 162 810") && vtk.contains("CELL_TYPES 162"));
    assert!(vtk.contains("\n2 1 1\n"));
}
