use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_toeplitz-spectra"))
}

fn input(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../inputs").join(name)
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out").arg(out).output().expect("binary runs")
}

fn json(out: &Path, task: &str) -> serde_json::Value {
    let text = std::fs::read_to_string(out.join(format!("{task}.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn spectrum_of_the_off_diagonal_symbol() {
    let dir = tempfile::tempdir().unwrap();
    let sym = input("off_diagonal.toml");
    let o = run(&["--symbol", sym.to_str().unwrap(), "--task", "spectrum"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report = std::fs::read_to_string(dir.path().join("REPORT.txt")).unwrap();
    assert!(report.contains("essential spectrum: [-3, -1] U [1, 3]"), "{report}");
    assert!(report.contains("[tolerances]") && report.contains("eig.boundary_gate"));

    let v = json(dir.path(), "spectrum");
    let ess = v["sections"][0]["data"]["essential_spectrum"].as_array().unwrap();
    let want = [(-3.0, -1.0), (1.0, 3.0)];
    assert_eq!(ess.len(), 2);
    for (iv, (a, b)) in ess.iter().zip(want) {
        assert!((iv[0].as_f64().unwrap() - a).abs() <= 1e-6);
        assert!((iv[1].as_f64().unwrap() - b).abs() <= 1e-6);
    }
    assert_eq!(v["config"]["grid"], 2048);
}

#[test]
fn gap_eigenvalue_of_the_toeplitz_chain() {
    let dir = tempfile::tempdir().unwrap();
    let sym = input("off_diagonal.toml");
    let o = run(
        &["--symbol", sym.to_str().unwrap(), "--task", "gap-eigs", "--gap=-1:1", "--L", "256"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(dir.path(), "gap-eigs");
    let pairs = v["sections"][0]["data"][0]["eigenpairs"].as_array().unwrap();
    assert_eq!(pairs.len(), 1);
    assert!(pairs[0]["value"].as_f64().unwrap().abs() <= 1e-8);
    assert_eq!(pairs[0]["multiplicity"], 1);
    // the eigenvector is exported as vector records
    let vec = std::fs::read_to_string(dir.path().join("gap-eigs-vector-0.txt")).unwrap();
    let recs = toeplitz_spectra::formats::parse_vector(&vec, 2).unwrap();
    assert!(!recs.is_empty());
}

#[test]
fn configuration_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let sym = input("off_diagonal.toml");
    let sym = sym.to_str().unwrap();
    let missing = run(&["--symbol", "/nonexistent/symbol.toml", "--task", "bands"], dir.path());
    assert_eq!(missing.status.code(), Some(2));
    for bad in [
        vec!["--symbol", sym, "--task", "bands", "--L", "9000"],
        vec!["--symbol", sym, "--task", "bands", "--K", "1000"],
        vec!["--symbol", sym, "--task", "bands", "--K", "16384"],
        vec!["--symbol", sym, "--task", "warp"],
        vec!["--symbol", sym, "--task", "gap-eigs", "--gap", "1:0"],
        vec!["--symbol", sym, "--task", "classify"],
        vec!["--symbol", sym, "--task", "bands", "--seed", "xyz"],
    ] {
        let o = run(&bad, dir.path());
        assert_eq!(o.status.code(), Some(2), "{bad:?}");
    }
    let garbled = dir.path().join("bad.toml");
    std::fs::write(&garbled, "block_size = 2\n[[coeff]]\nj = 0\nentries = [[1, 0]]\n").unwrap();
    let o = run(&["--symbol", garbled.to_str().unwrap(), "--task", "bands"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numeric_failure_names_the_operation() {
    let dir = tempfile::tempdir().unwrap();
    let sym = input("off_diagonal.toml");
    // the gap overlaps a band
    let o = run(
        &["--symbol", sym.to_str().unwrap(), "--task", "gap-eigs", "--gap=-2:0", "--L", "64"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("eig::gap_eigenvalues"), "{err}");
    let report = std::fs::read_to_string(dir.path().join("REPORT.txt")).unwrap();
    assert!(report.contains("FAILED in eig::gap_eigenvalues"));
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let sym = input("cos.toml");
    let v = input("rank_one.toml");
    let args = [
        "--symbol",
        sym.to_str().unwrap(),
        "--perturbation",
        v.to_str().unwrap(),
        "--task",
        "lap-sweep",
        "--L",
        "1024",
        "--energy",
        "0.3",
    ];
    assert_eq!(run(&args, a.path()).status.code(), Some(0));
    assert_eq!(run(&args, b.path()).status.code(), Some(0));
    let names = ["REPORT.txt", "lap-sweep.json", "lap-sweep.csv"];
    for n in names {
        let x = std::fs::read(a.path().join(n)).unwrap();
        let y = std::fs::read(b.path().join(n)).unwrap();
        assert!(x == y, "{n} differs");
    }
}

#[test]
fn classification_report() {
    let dir = tempfile::tempdir().unwrap();
    let sym = input("cos.toml");
    let v = input("exponential.toml");
    let o = run(
        &["--symbol", sym.to_str().unwrap(), "--perturbation", v.to_str().unwrap(), "--task", "classify", "--kmax", "10"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let d = &json(dir.path(), "classify")["sections"][0]["data"];
    assert_eq!(d["c11"]["verdict"], "pass");
    assert_eq!(d["compact"]["verdict"], "pass");
    assert_eq!(d["r_grid"].as_array().unwrap().len(), 11);
    let csv = std::fs::read_to_string(dir.path().join("classify.csv")).unwrap();
    assert!(csv.starts_with("r,dyadic_norm,dyadic_upper,n_v,p_v\n"));
}

#[test]
fn propagation_and_wave_operators() {
    let dir = tempfile::tempdir().unwrap();
    let sym = input("cos.toml");
    let v = input("rank_one.toml");
    let state = input("state.txt");
    let common = ["--symbol", sym.to_str().unwrap(), "--perturbation", v.to_str().unwrap(), "--L", "512"];
    let mut args = common.to_vec();
    args.extend(["--task", "propagate", "--tmax", "50", "--state", state.to_str().unwrap()]);
    let o = run(&args, dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let d = &json(dir.path(), "propagate")["sections"][0]["data"];
    assert!(d["decay"]["slope"].as_f64().unwrap() < -0.5);
    let n0 = 1.5f64.sqrt();
    for n in d["state"]["norms"].as_array().unwrap() {
        assert!((n.as_f64().unwrap() - n0).abs() <= 1e-6);
    }

    let mut args = common.to_vec();
    args.extend(["--task", "wave-op"]);
    let o = run(&args, dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let d = &json(dir.path(), "wave-op")["sections"][0]["data"];
    assert_eq!(d["completeness"]["verdict"], "pass");
    assert_eq!(d["bound_states"].as_array().unwrap().len(), 1);
}

#[test]
fn full_report_on_a_flat_band() {
    let dir = tempfile::tempdir().unwrap();
    let sym = input("flat_band.toml");
    let o = run(&["--symbol", sym.to_str().unwrap(), "--task", "full-report", "--L", "256"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(dir.path(), "full-report");
    let sections = v["sections"].as_array().unwrap();
    let by_name = |n: &str| sections.iter().find(|s| s["name"] == n).unwrap();
    assert_eq!(by_name("classify")["status"]["status"], "skipped");
    // the mu floor at this window leaves no room for a sweep
    assert_eq!(by_name("lap-sweep")["status"]["status"], "skipped");
    assert_eq!(by_name("spectrum")["data"]["flat_bands"][0], 0.0);
    let tau = by_name("thresholds")["data"]["tau"].as_array().unwrap();
    assert!(tau.iter().any(|t| t.as_f64().unwrap().abs() < 1e-12));
    for r in by_name("mourre-check")["data"].as_array().unwrap() {
        assert!(r["lower_bound"].as_f64().unwrap() >= 0.9);
    }
    let report = std::fs::read_to_string(dir.path().join("REPORT.txt")).unwrap();
    assert!(report.contains("flat band (infinitely degenerate eigenvalue): 0"));
}
