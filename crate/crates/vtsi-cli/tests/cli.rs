//! End-to-end checks of the command-line interface.

use std::process::Command;

fn vtsi() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vtsi"))
}

#[test]
fn lists_cases() {
    let out = vtsi().args(["cases", "list"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["case1", "case2", "case3", "case4", "case5", "case6"] {
        assert!(text.contains(name), "missing {name} in: {text}");
    }
}

#[test]
fn run_writes_deterministic_csv() {
    let dir = tempfile::tempdir().unwrap();
    // Small override so the test stays quick.
    let args = [
        "run",
        "--case",
        "case2",
        "--elements",
        "8",
        "--dt",
        "0.002",
    ];
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for path in [&a, &b] {
        let out = vtsi()
            .args(args)
            .args(["--out", path.to_str().unwrap()])
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let ca = std::fs::read(&a).unwrap();
    let cb = std::fs::read(&b).unwrap();
    assert_eq!(ca, cb, "identical invocations must produce identical CSV");
    let text = String::from_utf8(ca).unwrap();
    let header = text.lines().nth(1).unwrap();
    assert!(header.starts_with("t,u:bridge:15,v:bridge:15,a:bridge:15"));
    assert!(header.ends_with("lambda_1,lambda_2"));
}

#[test]
fn run_from_config_file_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let show = vtsi().args(["cases", "show", "case3"]).output().unwrap();
    assert!(show.status.success());
    let cfg_path = dir.path().join("case3.toml");
    std::fs::write(&cfg_path, &show.stdout).unwrap();
    let out = vtsi()
        .args([
            "run",
            "--config",
            cfg_path.to_str().unwrap(),
            "--elements",
            "6",
            "--dt",
            "0.002",
            "--out",
        ])
        .arg(dir.path().join("trace.csv"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn rejects_bad_usage() {
    let out = vtsi().args(["run", "--case", "nope"]).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("unknown case"));

    let out = vtsi().args(["run"]).output().unwrap();
    assert!(!out.status.success());

    let out = vtsi()
        .args(["sweep", "--case", "case5", "--speeds", "oops"])
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[test]
fn converge_emits_summary_table() {
    let out = vtsi()
        .args([
            "converge",
            "--case",
            "case1",
            "--elements",
            "4,8",
            "--dts",
            "0.002",
            "--dt",
            "0.002",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("level,max_contact_force"));
    assert_eq!(text.lines().count(), 4); // header + N=4, N=8, dt=0.002
}
