use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn txtwin(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_txtwin"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "warn")
        .env_remove("TXTWIN_CONFIG")
        .output()
        .expect("binary runs")
}

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn hash_dir(dir: &Path) -> Vec<(String, String)> {
    let mut entries: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    entries.sort();
    entries
        .iter()
        .map(|p| {
            let digest = Sha256::digest(std::fs::read(p).unwrap());
            let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
            (p.file_name().unwrap().to_string_lossy().into_owned(), hex)
        })
        .collect()
}

#[test]
fn stats_matches_golden_file() {
    let root = workspace_root();
    let out = txtwin(&["stats", "--scene", "configs/reference-scene.toml"], &root);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let golden = std::fs::read_to_string(root.join("crates/cli/tests/golden/reference-stats.txt")).unwrap();
    assert_eq!(String::from_utf8(out.stdout).unwrap(), golden);
}

#[test]
fn stats_jsonl_lines_parse() {
    let out = txtwin(&["stats", "--scene", "configs/reference-scene.toml", "--format", "jsonl"], &workspace_root());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 4);
    for line in text.lines() {
        serde_json::from_str::<serde_json::Value>(line).unwrap();
    }
}

#[test]
fn ingest_missing_file_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = txtwin(&["ingest", "missing.tsv"], dir.path());
    assert!(!out.status.success());
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.tsv"));
}

#[test]
fn unknown_subcommand_prints_usage() {
    let out = txtwin(&["frobnicate"], &workspace_root());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn simulate_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &str| ["simulate", "--nodes", "318", "--gpus", "2", "--ticks", "1", "--seed", "7", "--out", out].map(String::from);
    for out in ["a", "b"] {
        let a = args(out);
        let run = txtwin(&a.iter().map(String::as_str).collect::<Vec<_>>(), dir.path());
        assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    }
    let (a, b) = (hash_dir(&dir.path().join("a")), hash_dir(&dir.path().join("b")));
    assert_eq!(a.len(), 1);
    assert_eq!(a, b);
}

#[test]
fn ingest_then_replay() {
    let dir = tempfile::tempdir().unwrap();
    let sim = txtwin(&["simulate", "--nodes", "4", "--ticks", "3", "--seed", "3", "--out", "snaps"], dir.path());
    assert!(sim.status.success());
    let files = String::from_utf8(sim.stdout).unwrap();
    for file in files.lines() {
        let out = txtwin(&["ingest", file, "--history", "hist"], dir.path());
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(String::from_utf8_lossy(&out.stdout).contains("4 nodes"));
    }
    // Re-ingesting an old file is rejected: history only moves forward.
    let again = txtwin(&["ingest", files.lines().next().unwrap(), "--history", "hist"], dir.path());
    assert!(!again.status.success());

    let out = txtwin(&["replay", "--history", "hist"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let packets: Vec<serde_json::Value> = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(packets.len(), 3);
    assert_eq!(packets[0]["kind"], "full");
    assert_eq!(packets[1]["kind"], "delta");

    let missing = txtwin(&["replay", "--history", "nowhere"], dir.path());
    assert!(!missing.status.success());
    assert!(String::from_utf8_lossy(&missing.stderr).contains("nowhere"));
}
