use std::path::Path;
use std::process::{Command, Output};

fn medrelax(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_medrelax"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, body: &str) {
    std::fs::write(dir.join("run.toml"), body).unwrap();
}

#[test]
fn oracle_run_writes_table_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    write_config(
        dir.path(),
        "pipeline = \"oracle\"\n[model]\nfamily = \"commuting_ising\"\n[sweep]\nsites = [3]\nbetas = [0.5, 1.0]\n",
    );
    let out = medrelax(&["run", "--config", "run.toml"], dir.path());
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let table = std::fs::read_to_string(dir.path().join("out/free_energy.csv")).unwrap();
    assert!(table.starts_with("model_id,params,quantity,value,bound,pass\n"));
    assert_eq!(
        table
            .lines()
            .filter(|l| l.contains(",free_energy,"))
            .count(),
        2
    );
    assert!(!table.contains("created"));
    let manifest = std::fs::read_to_string(dir.path().join("out/manifest.json")).unwrap();
    assert!(manifest.contains("created_unix"));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    write_config(
        dir.path(),
        "pipeline = \"med\"\n[model]\nfamily = \"tfim\"\n[sweep]\nsites = [4]\nradii = []\n",
    );
    let out = medrelax(&["run", "--config", "run.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty"));

    write_config(dir.path(), "pipeline = \"oracle\"\n[model\n");
    assert_eq!(
        medrelax(&["run", "--config", "run.toml"], dir.path())
            .status
            .code(),
        Some(2)
    );

    write_config(
        dir.path(),
        "pipeline = \"oracle\"\n[model]\npath = \"missing.toml\"\n",
    );
    assert_eq!(
        medrelax(&["run", "--config", "run.toml"], dir.path())
            .status
            .code(),
        Some(2)
    );

    assert_eq!(
        medrelax(&["run", "--config", "absent.toml"], dir.path())
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn size_cap_exits_3_and_can_be_raised() {
    let dir = tempfile::tempdir().unwrap();
    write_config(
        dir.path(),
        "pipeline = \"oracle\"\n[model]\nfamily = \"free\"\n[sweep]\nsites = [5]\n",
    );
    let capped = medrelax(
        &["run", "--config", "run.toml", "--max-sites", "4"],
        dir.path(),
    );
    assert_eq!(capped.status.code(), Some(3));
    let raised = medrelax(
        &["run", "--config", "run.toml", "--max-sites", "5"],
        dir.path(),
    );
    assert_eq!(raised.status.code(), Some(0));
}

#[test]
fn unconverged_solver_exits_4_with_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    write_config(
        dir.path(),
        "pipeline = \"med\"\nwrite_trace = true\n[model]\nfamily = \"tfim\"\n[sweep]\nsites = [4]\nradii = [2]\n[solver]\nmax_iters = 2\n",
    );
    let out = medrelax(&["run", "--config", "run.toml"], dir.path());
    assert_eq!(out.status.code(), Some(4));
    assert!(dir.path().join("out/med.csv").is_file());
    let trace = std::fs::read_to_string(dir.path().join("out/traces/tfim_n4_b1_l2.csv")).unwrap();
    assert!(trace.starts_with("iteration,fmed,residual,step\n"));
}

#[test]
fn scan_writes_decay_and_cmi_tables() {
    let dir = tempfile::tempdir().unwrap();
    write_config(
        dir.path(),
        "pipeline = \"oracle\"\n[model]\nfamily = \"tfim\"\n[sweep]\nsites = [6]\nbetas = [0.5]\n",
    );
    let out = medrelax(
        &["scan", "--config", "run.toml", "--out", "scans"],
        dir.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let cmi = std::fs::read_to_string(dir.path().join("scans/cmi.csv")).unwrap();
    assert!(cmi.starts_with("model_id,distance,value\n"));
    let decay = std::fs::read_to_string(dir.path().join("scans/decay.csv")).unwrap();
    assert!(decay.starts_with("model_id,width,value\n"));
}

#[test]
fn rounding_and_end_to_end_pipelines() {
    let dir = tempfile::tempdir().unwrap();
    for pipeline in ["rounding", "end_to_end"] {
        write_config(
            dir.path(),
            &format!(
                "pipeline = \"{pipeline}\"\nout = \"{pipeline}\"\n[model]\nfamily = \"commuting_ising\"\n[sweep]\nsites = [4]\nradii = [1]\n"
            ),
        );
        let out = medrelax(&["run", "--config", "run.toml"], dir.path());
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    assert!(dir
        .path()
        .join("rounding/rounding/ising_n4_b1_l1.json")
        .is_file());
    let table = std::fs::read_to_string(dir.path().join("end_to_end/end_to_end.csv")).unwrap();
    assert!(table.lines().skip(1).all(|l| !l.ends_with(",false")));
}

#[test]
fn verify_filter_and_fault_injection() {
    let dir = tempfile::tempdir().unwrap();
    let clean = medrelax(&["verify", "--filter", "petz", "--out", "v"], dir.path());
    assert_eq!(clean.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&clean.stdout);
    assert_eq!(stdout.lines().count(), 5);
    assert!(stdout.lines().all(|l| l.starts_with("PASS petz.")));

    let faulty = medrelax(
        &[
            "verify",
            "--filter",
            "petz.recovery",
            "--inject-fault",
            "corrupt-marginal",
            "--out",
            "w",
        ],
        dir.path(),
    );
    assert_ne!(faulty.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&faulty.stdout).contains("FAIL petz.recovery_quality"));

    let none = medrelax(&["verify", "--filter", "nothing"], dir.path());
    assert_eq!(none.status.code(), Some(2));
}
