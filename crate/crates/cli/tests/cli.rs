//! Surface tests for the binary: output formats and exit codes.

use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_morpho-hebb"))
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

fn trained_hierarchy(dir: &std::path::Path) -> PathBuf {
    let h = dir.join("h.json");
    let st = bin()
        .args(["train", "--input"])
        .arg(fixture("wordlist.txt"))
        .arg("--out")
        .arg(&h)
        .status()
        .unwrap();
    assert!(st.success());
    h
}

#[test]
fn tokenize_prints_segmentations_and_unique_footer() {
    let dir = tempfile::tempdir().unwrap();
    let h = trained_hierarchy(dir.path());
    let out = bin()
        .arg("tokenize")
        .arg("--hierarchy")
        .arg(&h)
        .args(["--string", "knowyes"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "know|yes");
    assert_eq!(lines[1], "unique: yes");
    assert!(lines[2].starts_with("summary command=tokenize"));

    let out = bin()
        .arg("tokenize")
        .arg("--hierarchy")
        .arg(&h)
        .args(["--string", "soldread"])
        .output()
        .unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("sold|read"));
    assert!(text.contains("sol|dread"));
    assert!(text.contains("unique: no"));
}

#[test]
fn exit_codes_follow_the_contract() {
    let dir = tempfile::tempdir().unwrap();
    let h = trained_hierarchy(dir.path());
    // 0: success
    let st = bin()
        .arg("tokenize")
        .arg("--hierarchy")
        .arg(&h)
        .args(["--string", "runt"])
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(0));
    // 1: consistency/verification failure (symbol outside the alphabet)
    let st = bin()
        .arg("tokenize")
        .arg("--hierarchy")
        .arg(&h)
        .args(["--string", "a1b"])
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(1));
    // 1: malformed document
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    let st = bin()
        .arg("tokenize")
        .arg("--hierarchy")
        .arg(&bad)
        .args(["--string", "runt"])
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(1));
    // 2: usage error
    let st = bin().arg("no-such-command").status().unwrap();
    assert_eq!(st.code(), Some(2));
    let st = bin().arg("tokenize").arg("--bogus-flag").status().unwrap();
    assert_eq!(st.code(), Some(2));
}

#[test]
fn stats_writes_csv_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["stats", "--input"])
        .arg(fixture("wordlist.txt"))
        .arg("--out-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let hist = std::fs::read_to_string(dir.path().join("histogram.csv")).unwrap();
    assert!(hist.starts_with("n,d_n\n"));
    assert!(hist.ends_with('\n'));
    let rf = std::fs::read_to_string(dir.path().join("rankfreq.csv")).unwrap();
    assert!(rf.starts_with("n,rank,gram,frequency\n"));
    let fit = std::fs::read_to_string(dir.path().join("fit.csv")).unwrap();
    assert!(fit.starts_with("mu,sigma,N,residual\n"));
    let summary = String::from_utf8(out.stdout).unwrap();
    assert!(summary.contains("summary command=stats"));
}

#[test]
fn generate_vocab_is_deterministic_and_one_word_per_line() {
    let dir = tempfile::tempdir().unwrap();
    let h = trained_hierarchy(dir.path());
    let gen = || {
        let out = bin()
            .arg("generate-vocab")
            .arg("--hierarchy")
            .arg(&h)
            .args(["--seed", "9", "--count", "25"])
            .output()
            .unwrap();
        assert!(out.status.success());
        String::from_utf8(out.stdout).unwrap()
    };
    let a = gen();
    assert_eq!(a, gen());
    let words: Vec<&str> = a
        .lines()
        .filter(|l| !l.starts_with("summary "))
        .collect();
    assert_eq!(words.len(), 25);
    assert!(words.iter().all(|w| w.chars().all(|c| c.is_ascii_lowercase())));
}
