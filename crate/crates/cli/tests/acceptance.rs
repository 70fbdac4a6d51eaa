//! Runs `paper-suite` on the reference configuration twice, once on one
//! worker and once on the default pool, and prints one line per
//! acceptance criterion.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use serde_json::Value;

const SEED: &str = "20240917";

/// Criteria that cannot be met at the pinned parameters. Their analysis
/// lives in the decisions ledger; everything else must pass.
const UNATTAINABLE: [u32; 2] = [8, 9];

/// Runtime budgets in seconds, by criterion.
const BUDGETS: [(u32, f64); 5] = [(1, 30.0), (2, 120.0), (4, 300.0), (8, 180.0), (9, 600.0)];
const TOTAL_BUDGET: f64 = 1800.0;

fn reference_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/reference.toml")
}

struct Run {
    code: Option<i32>,
    stderr: String,
    secs: f64,
}

fn run_suite(out: &Path, workers: Option<usize>) -> Run {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_molchan"));
    cmd.args(["paper-suite", "--seed", SEED, "--config"])
        .arg(reference_config())
        .arg("--out")
        .arg(out);
    if let Some(k) = workers {
        cmd.args(["--workers", &k.to_string()]);
    }
    let start = Instant::now();
    let output = cmd.output().expect("molchan runs");
    Run {
        code: output.status.code(),
        stderr: String::from_utf8_lossy(&output.stderr).into_owned(),
        secs: start.elapsed().as_secs_f64(),
    }
}

fn directory(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

fn timings(stderr: &str) -> BTreeMap<u32, f64> {
    stderr
        .lines()
        .filter_map(|l| {
            let mut parts = l.strip_prefix("timing ")?.split_whitespace();
            Some((parts.next()?.parse().ok()?, parts.next()?.parse().ok()?))
        })
        .collect()
}

#[test]
fn paper_suite() {
    let single = tempfile::tempdir().unwrap();
    let pooled = tempfile::tempdir().unwrap();
    let first = run_suite(single.path(), Some(1));
    let second = run_suite(pooled.path(), None);

    let report: Value = serde_json::from_slice(&fs::read(single.path().join("suite.json")).unwrap()).unwrap();
    let criteria = report["criteria"].as_array().unwrap();
    let mut failed = BTreeSet::new();
    for c in criteria {
        let id = c["id"].as_u64().unwrap() as u32;
        let passed = c["passed"].as_bool().unwrap();
        if !passed {
            failed.insert(id);
        }
        println!(
            "criterion {id:>2} {} {}: {}",
            if passed { "PASS" } else { "FAIL" },
            c["name"].as_str().unwrap(),
            c["detail"].as_str().unwrap()
        );
    }

    let identical = directory(single.path()) == directory(pooled.path());
    println!(
        "criterion 11 {} determinism across runs: outputs with --workers 1 and the default pool byte-identical",
        if identical { "PASS" } else { "FAIL" }
    );

    let times = timings(&first.stderr);
    let mut within = true;
    for (id, budget) in BUDGETS {
        let t = times.get(&id).copied().unwrap_or(f64::INFINITY);
        let ok = t < budget;
        within &= ok;
        println!("budget criterion {id:>2} {} {t:.1} s < {budget} s", if ok { "PASS" } else { "FAIL" });
    }
    let total_ok = first.secs < TOTAL_BUDGET && second.secs < TOTAL_BUDGET;
    println!(
        "budget total {} {:.1} s and {:.1} s < {TOTAL_BUDGET} s",
        if total_ok { "PASS" } else { "FAIL" },
        first.secs,
        second.secs
    );

    // The attainable halves of the partly unattainable criteria still hold.
    let values = |id: u32| &criteria.iter().find(|c| c["id"] == id).unwrap()["values"];
    let partial = [
        ("8 identities", values(8)["identity_ok"].as_bool()),
        ("8 noiseless", values(8)["noiseless_ok"].as_bool()),
        ("9 above capacity", values(9)["bsc_above_ok"].as_bool()),
        ("9 pinned ordering", values(9)["pinned_ok"].as_bool()),
    ];
    for (name, ok) in partial {
        println!("partial {name} {}", if ok == Some(true) { "PASS" } else { "FAIL" });
    }

    assert_eq!(first.code, Some(4), "{}", first.stderr);
    assert_eq!(second.code, Some(4), "{}", second.stderr);
    assert_eq!(failed, BTreeSet::from(UNATTAINABLE), "{}", first.stderr);
    assert!(identical);
    assert!(within && total_ok);
    assert!(partial.iter().all(|(_, ok)| *ok == Some(true)));
}

#[test]
fn trials_flag_rejected_for_suite() {
    let out = tempfile::tempdir().unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_molchan"))
        .args(["paper-suite", "--seed", "1", "--trials", "10", "--config"])
        .arg(reference_config())
        .arg("--out")
        .arg(out.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}
