//! Subcommand smoke tests against the compiled binary.

use std::fs;
use std::path::Path;
use std::process::Command;

fn phrasex() -> Command {
    Command::new(env!("CARGO_BIN_EXE_phrasex"))
}

fn build_fixture(dir: &Path) {
    let corpus = dir.join("corpus");
    fs::create_dir_all(&corpus).unwrap();
    let docs = [
        "not only that but the story goes on and on and on for ten more pages",
        "the story of the river that defines a boundary goes not only here but there",
        "not only that but nothing else matters in the story of the river",
        "that but not only the other way round for a change of pace in the river story",
    ];
    for (i, d) in docs.iter().enumerate() {
        fs::write(corpus.join(format!("d{i}.txt")), d).unwrap();
    }
    fs::write(
        dir.join("phrasex.conf"),
        "stop_size=8\nfrequent_size=6\nrare_doc_threshold=2\n",
    )
    .unwrap();
    let out = phrasex()
        .args([
            "build",
            "--corpus",
            corpus.to_str().unwrap(),
            "--out",
            dir.join("index").to_str().unwrap(),
            "--config",
            dir.join("phrasex.conf").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "build failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn build_search_stats_verify_bench_happy_path() {
    let tmp = tempfile::tempdir().unwrap();
    build_fixture(tmp.path());
    let index = tmp.path().join("index");

    // search: tab-separated matches plus a stats line
    let out = phrasex()
        .args([
            "search",
            "--index",
            index.to_str().unwrap(),
            "--query",
            "not only that but",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    let lines: Vec<&str> = stdout.lines().collect();
    assert!(lines.len() >= 2, "{stdout}");
    let first: Vec<&str> = lines[0].split('\t').collect();
    assert_eq!(first.len(), 3, "doc TAB span TAB positions: {stdout}");
    assert!(lines.last().unwrap().starts_with("# matches="));
    assert!(stdout.contains("postings_read="));

    // stats: one row per component
    let out = phrasex()
        .args(["stats", "--index", index.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    for needle in ["stop-phrase", "expanded", "basic", "baseline"] {
        assert!(stdout.contains(needle), "missing {needle} in {stdout}");
    }

    // verify: all checks pass
    let out = phrasex()
        .args(["verify", "--index", index.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("all checks passed"));

    // bench: small seeded run with a report file
    let report = tmp.path().join("report.tsv");
    let out = phrasex()
        .args([
            "bench",
            "--index",
            index.to_str().unwrap(),
            "--seed",
            "7",
            "--queries",
            "25",
            "--report",
            report.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "bench failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let tsv = fs::read_to_string(&report).unwrap();
    assert!(tsv.contains("system\tadditional\tpostings_mean"));
    assert!(tsv.contains("system\tbaseline\tpostings_mean"));
}

#[test]
fn single_stop_word_query_exits_with_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    build_fixture(tmp.path());
    let out = phrasex()
        .args([
            "search",
            "--index",
            tmp.path().join("index").to_str().unwrap(),
            "--query",
            "the",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unsupported query"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = phrasex().args(["search", "--frobnicate"]).output().unwrap();
    assert!(!out.status.success());
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn missing_index_fails_cleanly() {
    let out = phrasex()
        .args(["stats", "--index", "/nonexistent/phrasex-index"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}
