use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn gwlab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gwlab"))
        .args(args)
        .arg("--output-dir")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn verify_battery_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = gwlab(
        &[
            "run",
            "verify",
            "--offspring",
            "0:0.25,2:0.75",
            "--reps",
            "100000",
            "--seed",
            "7",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let doc = read_json(&dir.path().join("verify.json"));
    let rows = doc["tables"]["battery"]["rows"].as_array().unwrap();
    assert!(rows.len() >= 6);
    for r in rows {
        assert!(r[6].as_f64().unwrap() < 3.0, "{r}");
    }
    assert_eq!(doc["summary"]["enumeration"][1]["tv_is_zero"], true);
}

#[test]
fn tail_survival_at_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = gwlab(
        &[
            "run",
            "tail",
            "--offspring",
            "geom:0.6667",
            "--depth",
            "14",
            "--reps",
            "10000",
            "--seed",
            "1",
            "--format",
            "csv",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("tail_tail.csv")).unwrap();
    let first = text
        .lines()
        .find(|l| !l.starts_with('#') && !l.starts_with('x'))
        .unwrap();
    let s0: f64 = first.split(',').nth(1).unwrap().parse().unwrap();
    // 1 - q = 1/2 up to the rounding of c, with standard error 0.005
    assert!((s0 - 0.5).abs() < 0.015, "S(0) = {s0}");
    for name in [
        "tail_tail.csv",
        "tail_gauge.csv",
        "tail_doubling.csv",
        "tail_summary.csv",
    ] {
        let t = std::fs::read_to_string(dir.path().join(name)).unwrap();
        for key in [
            "# config_hash=",
            "# seed=1",
            "# offspring=geom:0.6667",
            "# m=",
            "# q=",
            "# depth=14",
            "# reps=10000",
            "# w_truncation_depth=14",
        ] {
            assert!(t.contains(key), "{name} lacks {key}");
        }
    }
}

#[test]
fn binary_cover_costs_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = gwlab(
        &["run", "cover", "--offspring", "2:1.0", "--depth", "10", "--reps", "20"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let doc = read_json(&dir.path().join("cover.json"));
    assert_eq!(doc["summary"]["tree0"]["cost"].as_f64(), Some(1.0));
    assert_eq!(doc["summary"]["cost"]["mean"].as_f64(), Some(1.0));
    assert!(doc["summary"]["pairing"]["slope"]["mean"].as_f64().is_some());
}

#[test]
fn bad_offspring_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = gwlab(&["run", "tail", "--offspring", "0:0.3,1:0.8"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("1.1"), "{err}");
    let o = gwlab(&["run", "tail", "--offspring", "0:0.5,2:abc"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("abc"));
    let o = gwlab(&["run", "tail"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn critical_law_is_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let o = gwlab(&["run", "sample", "--offspring", "geom:0.5", "--reps", "3"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("not supercritical"));
    let doc = read_json(&dir.path().join("sample.json"));
    assert_eq!(doc["meta"]["hyp_holds"], false);
    assert_eq!(doc["meta"]["m"].as_f64(), Some(1.0));
    let o = gwlab(&["run", "spine", "--offspring", "geom:0.5"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "run",
        "thin",
        "--offspring",
        "0:0.25,2:0.75",
        "--n0",
        "3",
        "--reps",
        "2000",
        "--seed",
        "5",
    ];
    assert_eq!(gwlab(&args, dir.path()).status.code(), Some(0));
    let a = std::fs::read(dir.path().join("thin.json")).unwrap();
    assert_eq!(gwlab(&args, dir.path()).status.code(), Some(0));
    let b = std::fs::read(dir.path().join("thin.json")).unwrap();
    assert_eq!(a, b);

    // the thread count changes nothing but the recorded setting
    let other = tempfile::tempdir().unwrap();
    let mut one = args.to_vec();
    one.extend(["--threads", "1"]);
    assert_eq!(gwlab(&one, other.path()).status.code(), Some(0));
    let x = read_json(&dir.path().join("thin.json"));
    let y = read_json(&other.path().join("thin.json"));
    assert_eq!(x["tables"], y["tables"]);
    assert_eq!(x["summary"], y["summary"]);
    assert_eq!(x["meta"]["config_hash"], y["meta"]["config_hash"]);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "offspring = \"0:0.25,2:0.75\"\nseed = 11\ndepth = 4\nreps = 5\n").unwrap();
    let o = gwlab(
        &["run", "sample", "--config", cfg.to_str().unwrap(), "--depth", "3"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let doc = read_json(&dir.path().join("sample.json"));
    assert_eq!(doc["meta"]["config"]["depth"], 3);
    assert_eq!(doc["meta"]["config"]["seed"], 11);
    assert_eq!(doc["meta"]["config"]["reps"], 5);
    let trees = std::fs::read_to_string(dir.path().join("trees.jsonl")).unwrap();
    assert_eq!(trees.lines().filter(|l| l.starts_with("{\"depth\"")).count(), 5);

    std::fs::write(&cfg, "offspring = \"0:0.25,2:0.75\"\nsede = 11\n").unwrap();
    let o = gwlab(&["run", "sample", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn spine_bounds_and_thin_run() {
    let dir = tempfile::tempdir().unwrap();
    let a = ["--offspring", "0:0.25,2:0.75", "--seed", "3"];
    let spine = gwlab(
        &[&["run", "spine"][..], &a, &["--reps", "200", "--tail-reps", "5000"]].concat(),
        dir.path(),
    );
    assert_eq!(
        spine.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&spine.stderr)
    );
    let doc = read_json(&dir.path().join("spine.json"));
    assert!(doc["summary"]["kappa_hat"].as_f64().unwrap() > 1.0);
    assert_eq!(doc["meta"]["w_truncation_depth"], 12);

    let bounds = gwlab(
        &[&["run", "bounds"][..], &a, &["--reps", "20000", "--tail-reps", "20000"]].concat(),
        dir.path(),
    );
    assert_eq!(bounds.status.code(), Some(0));
    let doc = read_json(&dir.path().join("bounds.json"));
    assert_eq!(doc["tables"]["bounds"]["rows"].as_array().unwrap().len(), 20);
    assert_eq!(doc["summary"]["c0"].as_f64(), Some(1.0));

    let thin = gwlab(&[&["run", "thin"][..], &a, &["--reps", "2000"]].concat(), dir.path());
    assert_eq!(thin.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&thin.stderr).contains("threshold is 0"));
    let doc = read_json(&dir.path().join("thin.json"));
    assert_eq!(doc["summary"]["vacuous"], true);
}
