//! Black-box tests against the built binary and fixture files.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn spf_audit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spf-audit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn zone_arg() -> String {
    fixture("zone.txt").display().to_string()
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).to_string()
}

#[test]
fn check_exit_codes_follow_outcomes() {
    let zone = zone_arg();
    let cases = [
        ("198.51.100.5", "example.com", 0), // pass via mx
        ("192.0.2.20", "example.com", 0),   // pass via a/28
        ("203.0.113.9", "example.com", 1),  // fail via -all
        ("203.0.113.9", "missing.test", 2), // no record -> none
        ("203.0.113.9", "loop.test", 4),    // include loop -> permerror
        ("203.0.113.9", "flaky.test", 3),   // timeout -> temperror
    ];
    for (ip, domain, want) in cases {
        let output = spf_audit(&["check", domain, ip, "--zone", &zone]);
        assert_eq!(
            output.status.code(),
            Some(want),
            "{domain} {ip}: {}",
            String::from_utf8_lossy(&output.stderr)
        );
    }

    // softfail maps to 1 like fail
    let output = spf_audit(&["check", "open.test", "192.0.2.9", "--zone", &zone]);
    assert_eq!(output.status.code(), Some(1));
    // pool member passes
    let output = spf_audit(&["check", "open.test", "203.0.113.7", "--zone", &zone]);
    assert_eq!(output.status.code(), Some(0));
}

#[test]
fn check_json_is_machine_readable() {
    let output = spf_audit(&[
        "check",
        "example.com",
        "203.0.113.9",
        "--zone",
        &zone_arg(),
        "--json",
    ]);
    let value: serde_json::Value = serde_json::from_str(&stdout(&output)).unwrap();
    assert_eq!(value["result"], "fail");
    assert_eq!(value["matched"]["term_index"], 2);
}

#[test]
fn malformed_arguments_exit_usage() {
    let output = spf_audit(&["check", "example.com", "not-an-ip", "--zone", &zone_arg()]);
    assert_eq!(output.status.code(), Some(64));

    let output = spf_audit(&["check", "example.com", "203.0.113.9"]);
    assert_eq!(output.status.code(), Some(64), "no resolution source");

    let output = spf_audit(&["definitely-not-a-subcommand"]);
    assert_eq!(output.status.code(), Some(64));
}

#[test]
fn scan_writes_deterministic_jsonl() {
    let dir = tempfile::tempdir().unwrap();
    let out1 = dir.path().join("a.jsonl");
    let out2 = dir.path().join("b.jsonl");
    let corpus = fixture("corpus.csv").display().to_string();

    for out in [&out1, &out2] {
        let output = spf_audit(&[
            "scan",
            &corpus,
            "--zone",
            &zone_arg(),
            "--out",
            &out.display().to_string(),
            "--concurrency",
            "4",
        ]);
        assert_eq!(
            output.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&output.stderr)
        );
    }

    let first = std::fs::read(&out1).unwrap();
    let second = std::fs::read(&out2).unwrap();
    assert!(!first.is_empty());
    assert_eq!(first, second, "scan output must be byte-identical");
    assert_eq!(first.iter().filter(|&&b| b == b'\n').count(), 6);
}

#[test]
fn stats_recomputes_offline() {
    let dir = tempfile::tempdir().unwrap();
    let audits = dir.path().join("audits.jsonl");
    spf_audit(&[
        "scan",
        &fixture("corpus.csv").display().to_string(),
        "--zone",
        &zone_arg(),
        "--out",
        &audits.display().to_string(),
    ]);

    // No --zone here: stats runs without any resolution source.
    let output = spf_audit(&["stats", &audits.display().to_string()]);
    assert_eq!(output.status.code(), Some(0));
    let value: serde_json::Value = serde_json::from_str(&stdout(&output)).unwrap();
    assert_eq!(value["schema"], "spf-audit/1");
    assert_eq!(value["totals"]["scanned"], 6);
    assert_eq!(value["totals"]["with_spf"], 5);
    assert_eq!(value["error_histogram"]["syntax_error"], 1);
    assert_eq!(value["error_histogram"]["include_loop"], 1);

    // CSV tables.
    let tables = dir.path().join("tables");
    let output = spf_audit(&[
        "stats",
        &audits.display().to_string(),
        "--format",
        "csv",
        "--out",
        &tables.display().to_string(),
    ]);
    assert_eq!(output.status.code(), Some(0));
    let large = std::fs::read_to_string(tables.join("large_cidr.csv")).unwrap();
    assert!(large.starts_with("cidr,direct,include\n"));
    let top = std::fs::read_to_string(tables.join("top_includes.csv")).unwrap();
    assert!(top.starts_with("include,used_by,allowed_ips\n"));
    assert!(top.contains("pool.test,1,256"));
}

#[test]
fn stats_on_missing_file_exits_io() {
    let output = spf_audit(&["stats", "/definitely/not/there.jsonl"]);
    assert_eq!(output.status.code(), Some(74));
}

#[test]
fn stats_on_garbage_exits_data() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.jsonl");
    std::fs::write(&path, "this is not json\n").unwrap();
    let output = spf_audit(&["stats", &path.display().to_string()]);
    assert_eq!(output.status.code(), Some(65));
}

#[test]
fn spoofable_lists_passing_domains() {
    let output = spf_audit(&[
        "spoofable",
        "203.0.113.7",
        &fixture("corpus.csv").display().to_string(),
        "--zone",
        &zone_arg(),
    ]);
    assert_eq!(output.status.code(), Some(0));
    assert_eq!(stdout(&output).trim(), "open.test");

    // The same query over an audits.jsonl corpus.
    let dir = tempfile::tempdir().unwrap();
    let audits = dir.path().join("audits.jsonl");
    spf_audit(&[
        "scan",
        &fixture("corpus.csv").display().to_string(),
        "--zone",
        &zone_arg(),
        "--out",
        &audits.display().to_string(),
    ]);
    let output = spf_audit(&[
        "spoofable",
        "203.0.113.7",
        &audits.display().to_string(),
        "--zone",
        &zone_arg(),
    ]);
    assert_eq!(stdout(&output).trim(), "open.test");
}

#[test]
fn parse_modes() {
    let lenient = spf_audit(&["parse", "v=spf1 ipv4:192.0.2.1 -all"]);
    assert_eq!(lenient.status.code(), Some(0));
    assert!(stdout(&lenient).contains("misspelled_ip4"));

    let strict = spf_audit(&["parse", "v=spf1 ipv4:192.0.2.1 -all", "--strict"]);
    assert_eq!(strict.status.code(), Some(65));

    let valid = spf_audit(&["parse", "v=spf1  mx   -all"]);
    assert_eq!(valid.status.code(), Some(0));
    assert!(stdout(&valid).starts_with("v=spf1 mx -all"));

    let not_spf = spf_audit(&["parse", "hello=world"]);
    assert_eq!(not_spf.status.code(), Some(65));
}

#[test]
fn audit_prints_findings_and_remediation() {
    let output = spf_audit(&[
        "audit",
        "broken.test",
        "--zone",
        &zone_arg(),
        "--remediation",
    ]);
    assert_eq!(output.status.code(), Some(0));
    let text = stdout(&output);
    assert!(text.contains("error: syntax_error"));
    assert!(text.contains("ipv4:192.0.2.1"));
    assert!(text.contains("ip4:"));
}

#[test]
fn expand_reports_exact_counts() {
    let output = spf_audit(&["expand", "open.test", "--zone", &zone_arg(), "--json"]);
    assert_eq!(output.status.code(), Some(0));
    let value: serde_json::Value = serde_json::from_str(&stdout(&output)).unwrap();
    assert_eq!(value["domain"], "open.test");
    assert_eq!(value["traversed_includes"]["pool.test"], 256);
}
