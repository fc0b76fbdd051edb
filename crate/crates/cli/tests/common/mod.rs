#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn golden_dir() -> PathBuf {
    fixtures().join("golden")
}

pub fn idsel() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_idsel"));
    cmd.env_remove("IDSEL_LOG").env_remove("RAYON_NUM_THREADS");
    cmd
}

pub fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("failed to launch idsel")
}

/// Runs and insists on success, returning stdout.
pub fn ok(cmd: &mut Command) -> String {
    let out = run(cmd);
    assert!(
        out.status.success(),
        "idsel failed with {:?}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("stdout is utf-8")
}

pub const SWEEP_ARGS: &[&str] = &[
    "--method",
    "random,rss,oc,lls",
    "--n-shots",
    "2,4,8",
    "--repeats",
    "5",
    "--seed",
    "3",
    "--min-cluster-size",
    "5",
    "--min-samples",
    "3",
    "--max-ngram",
    "1",
    "--beta",
    "0.15",
];

/// The golden simulate or evaluate run, writing its JSON report to `out`.
/// Inputs are passed relative to the fixture directory so nothing in the
/// output depends on where the checkout lives.
pub fn golden_command(kind: &str, out: &Path) -> Command {
    let mut cmd = idsel();
    cmd.current_dir(fixtures())
        .arg(kind)
        .args(["--corpus", "corpus.jsonl", "--embeddings", "embeddings.bin"])
        .args(SWEEP_ARGS)
        .arg("--out")
        .arg(out);
    if kind == "evaluate" {
        cmd.args(["--test-file", "test.jsonl"]);
    }
    cmd
}

/// Stdout and JSON report of one golden run.
pub fn golden_run(kind: &str, threads: Option<usize>) -> (String, String) {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join(format!("{kind}.json"));
    let mut cmd = golden_command(kind, &out);
    if let Some(t) = threads {
        cmd.env("RAYON_NUM_THREADS", t.to_string());
    }
    let stdout = ok(&mut cmd);
    (stdout, std::fs::read_to_string(&out).unwrap())
}

/// Stored golden outputs; `IDSEL_UPDATE_GOLDEN=1` rewrites them first.
pub fn golden(kind: &str) -> (String, String) {
    let dir = golden_dir();
    let txt = dir.join(format!("{kind}.txt"));
    let json = dir.join(format!("{kind}.json"));
    if std::env::var_os("IDSEL_UPDATE_GOLDEN").is_some() {
        let (stdout, report) = golden_run(kind, None);
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(&txt, stdout).unwrap();
        std::fs::write(&json, report).unwrap();
    }
    (
        std::fs::read_to_string(&txt).unwrap_or_else(|e| panic!("{}: {e}", txt.display())),
        std::fs::read_to_string(&json).unwrap_or_else(|e| panic!("{}: {e}", json.display())),
    )
}
