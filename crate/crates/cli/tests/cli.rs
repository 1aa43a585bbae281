use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mislab(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mislab"))
        .args(args)
        .env("MISLAB_OUT_DIR", out)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn chernoff_prints_bound_and_exact_tail() {
    let tmp = tempfile::tempdir().unwrap();
    let o = mislab(tmp.path(), &["chernoff", "--lambda", "10", "--x", "10"]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(s.contains("bound = 0.02101"), "{s}");
    assert!(s.contains("exact tail = 0.00345"), "{s}");
    assert!(tmp.path().join("chernoff-seed1/chernoff.json").exists());
}

#[test]
fn validate_reports_condition_table() {
    let tmp = tempfile::tempdir().unwrap();
    let o = mislab(tmp.path(), &["validate"]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(s.contains("condition o(N): consistent"), "{s}");
    assert!(s.contains("B(N)/N"));
    let csv = fs::read_to_string(tmp.path().join("validate-seed1/condition.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn zero_horizon_gives_one_snapshot() {
    let tmp = tempfile::tempdir().unwrap();
    let o = mislab(tmp.path(), &["simulate", "--set", "horizon.T=0", "--seed", "5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(tmp.path().join("simulate-seed5/path-0.csv")).unwrap();
    let data: Vec<_> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(data.len(), 2, "header plus one snapshot:\n{csv}");
}

#[test]
fn config_errors_exit_with_2() {
    let tmp = tempfile::tempdir().unwrap();
    let o = mislab(tmp.path(), &["simulate", "--set", "alpha=1"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.contains("unknown key 'alpha'"));

    let cfg = tmp.path().join("bad.ini");
    fs::write(&cfg, "n = 16\nrates.beta = -2\n").unwrap();
    let o = mislab(tmp.path(), &["couple", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));

    let o = mislab(tmp.path(), &["couple", "--config", "/nonexistent/run.ini"]);
    assert_eq!(o.status.code(), Some(2));

    let o = mislab(tmp.path(), &["walkers", "--set", "kernel.gamma=0.5", "--trials", "2"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn budget_exceeded_exits_with_3() {
    let tmp = tempfile::tempdir().unwrap();
    let o = mislab(tmp.path(), &["simulate", "--set", "max_events=5"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("max_events"));
}

#[test]
fn help_lists_every_key() {
    let tmp = tempfile::tempdir().unwrap();
    for sub in ["simulate", "couple", "equivalence", "hydro", "chernoff", "walkers", "validate"] {
        let s = stdout(&mislab(tmp.path(), &[sub, "--help"]));
        for spec in mislab::io::SCHEMA {
            assert!(s.contains(spec.key), "{sub} help misses {}", spec.key);
        }
    }
}

fn read_outputs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    manifest["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| {
            let name = f["name"].as_str().unwrap().to_string();
            let bytes = fs::read(dir.join(&name)).unwrap();
            assert_eq!(mislab::io::sha256_hex(&bytes), f["sha256"].as_str().unwrap());
            (name, bytes)
        })
        .collect()
}

#[test]
fn outputs_do_not_depend_on_jobs_and_rerun_from_echo() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["equivalence", "--trials", "40", "--set", "equivalence.ns=16,32", "--seed", "3"];
    assert!(mislab(a.path(), &[&args[..], &["--jobs", "1"]].concat()).status.success());
    assert!(mislab(b.path(), &[&args[..], &["--jobs", "3"]].concat()).status.success());
    let first = read_outputs(&a.path().join("equivalence-seed3"));
    assert_eq!(first, read_outputs(&b.path().join("equivalence-seed3")));

    let c = tempfile::tempdir().unwrap();
    let echo = a.path().join("equivalence-seed3/config.ini");
    assert!(mislab(c.path(), &["equivalence", "--config", echo.to_str().unwrap()]).status.success());
    assert_eq!(first, read_outputs(&c.path().join("equivalence-seed3")));
}

#[test]
fn couple_writes_difference_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let o = mislab(tmp.path(), &["couple", "--set", "n=32", "--set", "kernel.variant=long_jump", "--grid", "4"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(tmp.path().join("couple-seed1/coupled.csv")).unwrap();
    let header = csv.lines().find(|l| !l.starts_with('#')).unwrap();
    assert!(header.contains("D1") && header.contains("D2"), "{header}");
}
