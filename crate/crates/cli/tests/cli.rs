use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_thinlayer"))
}

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).env_remove("THINLAYER_OUT").output().unwrap()
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

fn edited_quick(dir: &std::path::Path, edit: impl FnOnce(&mut serde_json::Value)) -> PathBuf {
    let raw = std::fs::read_to_string(configs().join("quick.json")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&raw).unwrap();
    edit(&mut v);
    let path = dir.join("edited.json");
    std::fs::write(&path, serde_json::to_string(&v).unwrap()).unwrap();
    path
}

#[test]
fn version_prints_and_exits_zero() {
    let out = run(&["version"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(text(&out.stdout).starts_with("thinlayer "));
}

#[test]
fn missing_config_is_a_validation_failure() {
    let out = run(&["run", "missing.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("missing.json"));
}

#[test]
fn unknown_flag_prints_usage() {
    let out = run(&["run", "--bogus", "x.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("Usage"));
    let out = run(&[]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn thermo_check_passes_on_default_config() {
    let cfg = configs().join("default.json");
    let out = run(&["thermo-check", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let s = text(&out.stdout);
    assert!(s.contains("Maxwell") && s.contains("C1=") && s.contains("all checks passed"), "{s}");
}

#[test]
fn limits_prints_csv() {
    let dir = tempfile::tempdir().unwrap();
    let detail = dir.path().join("limits.csv");
    let cfg = configs().join("quick.json");
    let out = run(&["limits", cfg.to_str().unwrap(), "-o", detail.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let s = text(&out.stdout);
    let mut lines = s.lines();
    assert_eq!(lines.next(), Some("eps,G1_err,G3_err,G4_err"));
    assert_eq!(lines.count(), 4);
    let d = std::fs::read_to_string(detail).unwrap();
    assert!(d.starts_with("eps,G1_err,G3_err,G4_err,G3_column_mean\n"));
}

#[test]
fn run_honours_output_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("quick.json");
    let out = bin()
        .args(["run", "-q", cfg.to_str().unwrap()])
        .env("THINLAYER_OUT", dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let table = std::fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    assert_eq!(table, text(&out.stdout));
    assert!(dir.path().join("eps_0.5/relent.csv").exists());
    assert!(dir.path().join("plane/diagnostics.csv").exists());
}

#[test]
fn invalid_configs_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cases: Vec<Box<dyn Fn(&mut serde_json::Value)>> = vec![
        Box::new(|v| v["eps_list"] = serde_json::json!([0.25, 0.5])),
        Box::new(|v| v["initial"]["recipe"] = "spiral".into()),
        Box::new(|v| v["gravity"]["beta"] = 0.5.into()),
        Box::new(|v| v["unexpected"] = 1.into()),
    ];
    for edit in cases {
        let path = edited_quick(dir.path(), edit);
        let out = run(&["run", path.to_str().unwrap(), "-o", dir.path().join("o").to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(1), "{}", text(&out.stderr));
    }
}

#[test]
fn odd_external_density_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let path = edited_quick(dir.path(), |v| v["external"]["shift"] = 0.3.into());
    let out = run(&["run", "-q", path.to_str().unwrap(), "-o", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = text(&out.stderr);
    assert!(err.contains("midplane vertical field"), "{err}");
    assert!(!dir.path().join("o/convergence.csv").exists());
}
