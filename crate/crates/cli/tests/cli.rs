use std::path::Path;
use std::process::{Command, Output};

fn thermoporo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_thermoporo")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn preset_emit_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fault.toml");
    let o = thermoporo(&["preset", "fault_shear", "--emit", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("preset = \"fault_shear\""));
    let o = thermoporo(&["preset", "fault_shear", "--emit", "-"]);
    assert_eq!(stdout(&o), text);
}

#[test]
fn run_then_audit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        "preset = \"consolidation\"\n[domain]\nnx = 4\nny = 4\n[solver]\nt_end = 0.002\ndt = 0.001\n[outputs]\nsnapshot_every = 1\n",
    );
    let run_dir = dir.path().join("run");
    let o = thermoporo(&["run", &cfg, "--out", run_dir.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("2 steps"), "{}", stdout(&o));
    for f in ["ledger.csv", "ledger_detail.csv", "run_manifest.toml"] {
        assert!(run_dir.join(f).exists(), "{f}");
    }
    let o = thermoporo(&["audit", run_dir.to_str().unwrap()]);
    let text = stdout(&o);
    assert!(o.status.success(), "{text}");
    assert!(text.lines().all(|l| l.starts_with("PASS ")), "{text}");
    assert!(text.contains("weak residuals"));
}

#[test]
fn mesh_and_step_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", "preset = \"heat_only\"\n[solver]\nt_end = 0.0\n");
    let run_dir = dir.path().join("run");
    let o = thermoporo(&["run", &cfg, "--out", run_dir.to_str().unwrap(), "--mesh", "3", "5", "--dt", "0.5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest = std::fs::read_to_string(run_dir.join("run_manifest.toml")).unwrap();
    assert!(manifest.contains("nx = 3") && manifest.contains("ny = 5"), "{manifest}");
    assert!(manifest.contains("dt = 0.5"));
    let o = thermoporo(&["run", &cfg, "--out", run_dir.to_str().unwrap(), "--dt", "-1"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn invalid_input_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad_q = write_config(dir.path(), "q.toml", "[material]\nq = 2.0\n");
    let o = thermoporo(&["run", &bad_q, "--out", dir.path().join("r").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("A.a"), "{}", stderr(&o));

    let syntax = write_config(dir.path(), "s.toml", "[solver\n");
    assert_eq!(thermoporo(&["run", &syntax]).status.code(), Some(2));

    let o = thermoporo(&["preset", "granite", "--emit", "-"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_files_exit_with_four() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent");
    assert_eq!(thermoporo(&["run", missing.join("c.toml").to_str().unwrap()]).status.code(), Some(4));
    assert_eq!(thermoporo(&["audit", missing.to_str().unwrap()]).status.code(), Some(4));
}

#[test]
fn sweep_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        "preset = \"heat_only\"\n[domain]\nnx = 2\nny = 2\n[solver]\nt_end = 0.002\ndt = 0.001\n",
    );
    let out = dir.path().join("sweep");
    let o = thermoporo(&["sweep", &cfg, "--h-levels", "2", "--dt-levels", "2", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let runs = std::fs::read_to_string(out.join("sweep_runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 5);
    let diffs = std::fs::read_to_string(out.join("sweep_differences.csv")).unwrap();
    assert!(diffs.lines().any(|l| l.starts_with("h,0,1,")));
    assert!(diffs.lines().any(|l| l.starts_with("dt,0,1,")));
}
