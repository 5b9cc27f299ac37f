//! Compiles a small C program against the generated header and the static library.

use std::path::{Path, PathBuf};
use std::process::Command;

fn target_dir() -> PathBuf {
    // tests run from target/<profile>/deps
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(Path::parent).unwrap().to_path_buf()
}

#[test]
fn header_declares_the_api() {
    let header =
        std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/medrelax.h"))
            .unwrap();
    for name in [
        "medrelax_last_error",
        "medrelax_gibbs_solve",
        "medrelax_med_solve",
        "medrelax_verify",
        "MEDRELAX_STATUS_SIZE_CAP",
        "typedef struct MedrelaxGibbs MedrelaxGibbs;",
    ] {
        assert!(header.contains(name), "{name} missing");
    }
}

#[test]
fn c_program_links_and_runs() {
    let lib = target_dir().join("libmedrelax_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!(
            "skipping: no C compiler or static library at {}",
            lib.display()
        );
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let manifest = env!("CARGO_MANIFEST_DIR");
    let status = Command::new("cc")
        .arg(format!("{manifest}/tests/c/smoke.c"))
        .arg(format!("-I{manifest}/include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with(env!("CARGO_PKG_VERSION")));
}
