use std::path::Path;
use std::process::{Command, Output};

use qrecover::cli::{parse_report, without_timestamp, ReportBody, EXIT_ASSERTION, EXIT_INPUT, EXIT_OK};
use qrecover::io::load_state;

fn qrecover(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qrecover"))
        .args(args)
        .env_remove("QRECOVER_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_and_bad_input_exit_codes() {
    assert_eq!(qrecover(&["--help"]).status.code(), Some(EXIT_OK));
    assert_eq!(qrecover(&["frobnicate"]).status.code(), Some(EXIT_INPUT));
    assert_eq!(qrecover(&["check", "nonsense"]).status.code(), Some(EXIT_INPUT));
    assert_eq!(qrecover(&["extend", "--named", "bell", "--tol", "nope=1"]).status.code(), Some(EXIT_INPUT));
    let missing = qrecover(&["extend", "--state", "/nonexistent/state.json"]);
    assert_eq!(missing.status.code(), Some(EXIT_INPUT));
    assert!(!missing.stderr.is_empty());
}

#[test]
fn failing_suite_exits_with_assertion_code() {
    let ok = qrecover(&["check", "info", "--trials", "20", "--seed", "3"]);
    assert_eq!(ok.status.code(), Some(EXIT_OK), "{}", String::from_utf8_lossy(&ok.stderr));
    let strict = qrecover(&["check", "info", "--trials", "20", "--seed", "3", "--tol", "cmi_relative_entropy=0"]);
    assert_eq!(strict.status.code(), Some(EXIT_ASSERTION));
    let doc = parse_report(&stdout(&strict)).unwrap();
    let ReportBody::Check(report) = doc.result else { panic!("not a check report") };
    assert!(report.properties.iter().any(|p| !p.passed()));
}

#[test]
fn gen_then_extend_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let state_path = dir.path().join("markov.json");
    let gen = qrecover(&["gen", "--named", "markov", "--out", path(&state_path)]);
    assert_eq!(gen.status.code(), Some(EXIT_OK), "{}", String::from_utf8_lossy(&gen.stderr));
    let state = load_state(&state_path).unwrap();
    assert_eq!(state.layout().dims(), &[2, 8, 2]);

    let report_path = dir.path().join("extend.json");
    let run = qrecover(&["extend", "--state", path(&state_path), "--k", "3", "--out", path(&report_path)]);
    assert_eq!(run.status.code(), Some(EXIT_OK), "{}", String::from_utf8_lossy(&run.stderr));
    let text = std::fs::read_to_string(&report_path).unwrap();
    let doc = parse_report(&text).unwrap();
    let ReportBody::Extend(body) = &doc.result else { panic!("not an extend report") };
    assert_eq!(body.report.k, 3);
    assert!(body.report.max_marginal_distance() < 1e-6);
    assert_eq!(qrecover::cli::report_to_json(&doc).unwrap(), text);
}

#[test]
fn same_seed_gives_identical_reports() {
    let runs: [&[&str]; 3] = [
        &["fuzz", "--dims", "2,2,2", "--trials", "40", "--refine-steps", "20", "--seed", "5"],
        &["measures", "--ensemble", "hs", "--dims", "2,2", "--measure", "eof", "--steps", "200", "--seed", "5"],
        &["check", "pinsker", "--trials", "30", "--seed", "5"],
    ];
    for args in runs {
        let first = qrecover(args);
        let second = qrecover(args);
        assert_eq!(first.status.code(), Some(EXIT_OK), "{args:?}: {}", String::from_utf8_lossy(&first.stderr));
        assert_eq!(without_timestamp(&stdout(&first)), without_timestamp(&stdout(&second)), "{args:?}");
        let threaded = qrecover(&[args, &["--threads", "2"]].concat());
        assert_eq!(without_timestamp(&stdout(&first)), without_timestamp(&stdout(&threaded)), "{args:?}");
    }
}

#[test]
fn csv_output_has_header_and_rows() {
    let out = qrecover(&["check", "classical", "--trials", "10", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(EXIT_OK));
    let text = stdout(&out);
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("suite,property,"));
    assert_eq!(lines.filter(|l| l.starts_with("classical,")).count(), 5);
}
