use std::path::Path;
use std::process::{Command, Output};

fn normfsi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_normfsi"))
        .env_remove("NORMFSI_BUDGET")
        .args(args)
        .output()
        .unwrap()
}

fn golden(name: &str, args: &[&str]) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    let want = std::fs::read_to_string(&path).unwrap();
    let out = normfsi(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8(out.stdout).unwrap(), want, "{name}");
}

#[test]
fn stationary_distributions() {
    golden("stationary_fig3.out", &["stationary", "--builtin", "fig3"]);
    golden("stationary_fig5.out", &["stationary", "--builtin", "fig5"]);
}

#[test]
fn fig7_shuffle_and_split() {
    golden(
        "shuffle_fig7.out",
        &["shuffle", "--builtin", "fig7-shuffler", "--x", "explicit:0011010001", "--y", "explicit:01000110001", "--n", "18"],
    );
    golden("split_fig7.out", &["split", "--builtin", "fig7-shuffler", "--z", "explicit:001011000101100010", "--n", "18"]);
}

#[test]
fn misc_outputs() {
    golden("construct_zero.out", &["construct-pair", "--steps", "0"]);
    golden("enumerate_two.out", &["enumerate-shufflers", "--count", "2"]);
    golden("generate_champernowne.out", &["generate", "--stream", "champernowne:10", "--n", "20"]);
    golden("normality_periodic.out", &["normality-stats", "--stream", "periodic:01", "--n", "10000", "--l-max", "2"]);
}

#[test]
fn exit_codes() {
    assert_eq!(normfsi(&["validate", "--builtin", "fig3"]).status.code(), Some(0));
    let bad = normfsi(&["validate", "--builtin", "fig2-shuffle"]);
    assert_eq!(bad.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("\"validation\""));
    assert_eq!(normfsi(&["stationary", "--builtin", "no-such"]).status.code(), Some(1));
    assert_eq!(normfsi(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(normfsi(&["--help"]).status.code(), Some(0));
    let refused = Command::new(env!("CARGO_BIN_EXE_normfsi"))
        .env("NORMFSI_BUDGET", "1048576")
        .args(["construct-pair", "--mode", "paper", "--steps", "3"])
        .output()
        .unwrap();
    assert_eq!(refused.status.code(), Some(2));
}

#[test]
fn normalize_round_trips() {
    let first = normfsi(&["normalize", "--builtin", "fig5"]);
    assert!(first.status.success());
    let tmp = std::env::temp_dir().join(format!("normfsi-golden-{}.json", std::process::id()));
    std::fs::write(&tmp, &first.stdout).unwrap();
    let second = normfsi(&["normalize", "--file", tmp.to_str().unwrap()]);
    std::fs::remove_file(&tmp).ok();
    assert_eq!(first.stdout, second.stdout);
}
