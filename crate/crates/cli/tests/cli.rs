use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn molchan(args: &[&str], cfg: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_molchan"))
        .args(args)
        .arg("--config")
        .arg(cfg)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("cfg.toml");
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn identity_capacity_is_one_bit() {
    let out = tempfile::tempdir().unwrap();
    let o = molchan(&["capacity", "--seed", "3"], &config("identity.toml"), out.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(out.path().join("summary.json")).unwrap()).unwrap();
    let keys: Vec<&str> = summary.as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(keys, ["command", "config_hash", "results", "seed", "trials"]);
    assert_eq!(summary["seed"], 3);
    assert_eq!(summary["results"]["mutual_information"], 1.0);
    assert_eq!(summary["results"]["c_star"]["0.05"], 1.0);
    let csv = fs::read_to_string(out.path().join("capacity_quantiles.csv")).unwrap();
    assert!(csv.starts_with("lambda,"), "{csv}");
}

#[test]
fn syntax_error_reports_position_and_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "seed = 1\n[channel]\nalphabet = = 2\n");
    let o = molchan(&["capacity", "--seed", "1"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("cfg.toml") && err.contains("line 3, column 12"), "{err}");
}

#[test]
fn unknown_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "seed = 1\n[channel]\nalphabets = 2\n");
    let o = molchan(&["capacity", "--seed", "1"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn oversized_window_is_a_guard_violation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "seed = 1\n[channel]\nkind = \"molecular\"\nn = 9\n");
    let o = molchan(&["adima-scan", "--seed", "1"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn outputs_do_not_depend_on_worker_count() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = config("reference.toml");
    for (dir, workers) in [(&a, "1"), (&b, "3")] {
        let o = molchan(&["perm-estimate", "--seed", "11", "--trials", "5000", "--workers", workers], &cfg, dir.path());
        assert!(o.status.success());
    }
    for name in ["perm_gamma.csv", "perm_outlier.csv", "summary.json"] {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap(),
            "{name}"
        );
    }
}
