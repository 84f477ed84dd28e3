use std::process::{Command, Output};

fn ccra(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ccra")).args(args).output().expect("run ccra")
}

#[test]
fn phy_sweep_output_is_byte_identical_across_runs_and_workers() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let base = ["phy-sweep", "--sweep", "alpha=0.21,1.0", "--trials", "3", "--seed", "5"];
    let mut args_a = base.to_vec();
    args_a.extend(["--workers", "1", "--out", a.to_str().unwrap()]);
    let mut args_b = base.to_vec();
    args_b.extend(["--workers", "2", "--out", b.to_str().unwrap()]);
    assert!(ccra(&args_a).status.success());
    assert!(ccra(&args_b).status.success());
    let (ta, tb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(ta, tb);
    let text = String::from_utf8(ta).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# ccra phy-sweep config_sha256="));
    assert!(lines.next().unwrap().starts_with("param,trials,ser"));
    assert_eq!(lines.count(), 2);
}

#[test]
fn de_writes_threshold_and_curve() {
    let out = ccra(&["de", "--sweep", "load_G=0:0.25:1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().next().unwrap().contains("threshold"));
    assert_eq!(text.lines().count(), 2 + 5);
}

#[test]
fn invalid_config_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.toml");
    std::fs::write(&p, "alpha = 1.5\n").unwrap();
    let out = ccra(&["bounds", "--config", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.toml");
    std::fs::write(&p, "alhpa = 0.2\n").unwrap();
    let out = ccra(&["bounds", "--config", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bad_sweep_grammar_is_a_config_error() {
    let out = ccra(&["phy-sweep", "--sweep", "alpha=0.1:0:1"]);
    assert_eq!(out.status.code(), Some(1));
}
