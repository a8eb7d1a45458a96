use std::path::Path;
use std::process::{Command, Output};

fn ckn(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ckn"))
        .current_dir(dir)
        .env_remove("CKN_LEDGER")
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn line<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines()
        .find_map(|l| l.trim().strip_prefix(key).map(str::trim))
        .unwrap_or_else(|| panic!("no {key} in {text}"))
}

#[test]
fn inline_constants_print_q_and_write_the_ledger() {
    let dir = tempfile::tempdir().unwrap();
    let out = ckn(dir.path(), &["constants", "--n", "3", "--p", "2"]);
    assert!(out.status.success(), "{out:?}");
    let text = stdout(&out);
    assert_eq!(line(&text, "q "), "6");
    assert_eq!(line(&text, "sharp_constant "), "2.340492275042011");
    assert!(dir.path().join("ledger.jsonl").exists());
    assert!(dir.path().join("results/constants.csv").exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(ckn(dir.path(), &["constants", "--n", "3"]).status.code(), Some(2));
    assert_eq!(ckn(dir.path(), &["run"]).status.code(), Some(2));
    assert_eq!(ckn(dir.path(), &["constants", "--n", "3", "--p", "4"]).status.code(), Some(2));

    std::fs::write(
        dir.path().join("bad.toml"),
        "id = \"x\"\noperation = \"constants\"\n[[params]]\nn = 3\na = 0.0\nb = 0.0\n",
    )
    .unwrap();
    let out = ckn(dir.path(), &["--config", "bad.toml", "run"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("params[0].p"));

    std::fs::write(
        dir.path().join("strict.toml"),
        "id = \"x\"\noperation = \"constants\"\n[[params]]\nn = 3\np = 2.0\na = 0.0\nb = 0.0\n[tolerances]\nq = 5.0\n",
    )
    .unwrap();
    assert_eq!(ckn(dir.path(), &["--config", "strict.toml", "run"]).status.code(), Some(4));
    assert_eq!(ckn(dir.path(), &["--config", "strict.toml", "slope-fit"]).status.code(), Some(2));

    std::fs::write(dir.path().join("broken.jsonl"), "{\n").unwrap();
    assert_eq!(ckn(dir.path(), &["--ledger", "broken.jsonl", "report"]).status.code(), Some(1));
}

#[test]
fn ledger_path_from_environment_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let run = |seed: &str| {
        Command::new(env!("CARGO_BIN_EXE_ckn"))
            .current_dir(dir.path())
            .env("CKN_LEDGER", "env-ledger.jsonl")
            .args(["--seed", seed, "--threads", "2", "ineq-const", "--case", "5", "--exponent", "2.5"])
            .output()
            .unwrap()
    };
    let (a, b) = (run("1"), run("1"));
    assert!(a.status.success(), "{a:?}");
    assert_eq!(line(&stdout(&a), "outputs_digest"), line(&stdout(&b), "outputs_digest"));
    assert_eq!(line(&stdout(&a), "inputs_digest"), line(&stdout(&b), "inputs_digest"));
    let out = Command::new(env!("CARGO_BIN_EXE_ckn"))
        .current_dir(dir.path())
        .env("CKN_LEDGER", "env-ledger.jsonl")
        .args(["report", "--filter", "module=critical"])
        .output()
        .unwrap();
    assert!(stdout(&out).starts_with("2 records"), "{out:?}");
    assert!(dir.path().join("results/summary.txt").exists());
}
