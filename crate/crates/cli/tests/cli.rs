//! End-to-end CLI checks: exit codes, reproducibility, output formats.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_codimlab"))
}

#[test]
fn paper_checks_pass_and_reruns_are_hash_identical() {
    let dir1 = std::env::temp_dir().join("codimlab-test-pc1");
    let dir2 = std::env::temp_dir().join("codimlab-test-pc2");
    for d in [&dir1, &dir2] {
        let _ = std::fs::remove_dir_all(d);
    }
    let out1 = bin()
        .args(["paper-checks", "--profile", "flat-codim2", "--outdir"])
        .arg(&dir1)
        .output()
        .unwrap();
    assert!(out1.status.success(), "{}", String::from_utf8_lossy(&out1.stderr));
    let stdout = String::from_utf8_lossy(&out1.stdout);
    assert!(stdout.contains("PASS"), "expected PASS rows:\n{stdout}");
    assert!(!stdout.contains("FAIL"));

    let out2 = bin()
        .args(["paper-checks", "--profile", "flat-codim2", "--outdir"])
        .arg(&dir2)
        .output()
        .unwrap();
    assert!(out2.status.success());
    let m1 = std::fs::read_to_string(dir1.join("manifest.json")).unwrap();
    let m2 = std::fs::read_to_string(dir2.join("manifest.json")).unwrap();
    assert_eq!(m1, m2, "manifests must be byte-identical across reruns");
}

#[test]
fn invalid_gamma_is_a_config_error_naming_the_range() {
    let out = bin()
        .args([
            "solve",
            "--geometry",
            "flat:d=1,n=3,extent=4,h=0.05",
            "--gamma",
            "1.5",
            "--grid",
            "16",
            "--out",
        ])
        .arg(std::env::temp_dir().join("codimlab-test-field.csv"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("(-1, 1)"), "error should name the open interval: {err}");
}

#[test]
fn unknown_generator_is_a_config_error() {
    let out = bin()
        .args(["geometry", "--geometry", "torus:r=1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn geometry_roundtrip_through_csv() {
    let csv_path = std::env::temp_dir().join("codimlab-test-atoms.csv");
    let out = bin()
        .args(["geometry", "--geometry", "cantor:level=3,n=3", "--out"])
        .arg(&csv_path)
        .output()
        .unwrap();
    assert!(out.status.success());
    // Load the CSV back as a geometry.
    let spec = format!("{}:d=1,n=3", csv_path.display());
    let out2 = bin().args(["geometry", "--json", "--geometry", &spec]).output().unwrap();
    assert!(out2.status.success());
    let v: serde_json::Value =
        serde_json::from_slice(&out2.stdout).expect("json summary");
    assert_eq!(v["count"], 64);
}

#[test]
fn counterexample_emits_csv() {
    let path = std::env::temp_dir().join("codimlab-test-ce.csv");
    let out = bin()
        .args(["counterexample", "--r-list", "100,1000", "--out"])
        .arg(&path)
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("R,I"));
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn dbeta_writes_field_columns() {
    let pts = std::env::temp_dir().join("codimlab-test-pts.csv");
    std::fs::write(&pts, "0.0,0.5,0.0\n0.1,0.0,0.9\n").unwrap();
    let out_path = std::env::temp_dir().join("codimlab-test-db.csv");
    let out = bin()
        .args(["dbeta", "--geometry", "flat:d=1,n=3,extent=5,h=0.02", "--beta", "1", "--points"])
        .arg(&pts)
        .arg("--out")
        .arg(&out_path)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&out_path).unwrap();
    let header = text.lines().next().unwrap();
    assert_eq!(header, "x1,x2,x3,d_beta,grad1,grad2,grad3,est_error");
    assert!(Path::new(&out_path).exists());
}

#[test]
fn print_config_is_valid_toml() {
    let out = bin().args(["print-config"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    let parsed: toml::Value = toml::from_str(&text).expect("valid toml");
    assert!(parsed.get("geometry").is_some());
    assert!(parsed.get("params").is_some());
}
