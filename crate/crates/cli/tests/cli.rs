//! End-to-end tests of the installed binary: output formats, exit
//! codes, refusal semantics, and process-level determinism.

use lassopt::RngStream;
use std::fs;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lassopt"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf8 stdout")
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("utf8 stderr")
}

#[track_caller]
fn assert_exit(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stdout:\n{}\nstderr:\n{}",
        stdout(out),
        stderr(out)
    );
}

#[test]
fn prob_prints_four_decimal_probability() {
    let out = run(&["theory", "prob", "--beta1", "3", "--sigma", "1", "--p", "2"]);
    assert_exit(&out, 0);
    assert_eq!(stdout(&out).trim(), "0.7487");

    let cond = run(&["theory", "prob", "--beta1", "3", "--p", "2", "--given-sign"]);
    assert_exit(&cond, 0);
    assert_eq!(stdout(&cond).trim(), "0.7497");

    let csv = run(&["theory", "prob", "--beta1", "3", "--p", "2", "--csv"]);
    assert_exit(&csv, 0);
    let text = stdout(&csv);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("beta1,sigma,p,given_sign,probability"));
    assert_eq!(lines.next(), Some("3,1,2,false,0.7486501019683699"));
}

#[test]
fn prob_rejects_domain_and_usage_errors() {
    let domain = run(&["theory", "prob", "--beta1", "3", "--p", "1"]);
    assert_exit(&domain, 2);
    assert!(stderr(&domain).contains("domain error"));

    let zero_signal = run(&["theory", "prob", "--beta1", "0", "--p", "2"]);
    assert_exit(&zero_signal, 2);

    // Missing required flag is a usage error from the argument parser.
    let usage = run(&["theory", "prob", "--beta1", "3"]);
    assert_exit(&usage, 2);
}

#[test]
fn table1_text_and_csv_layouts() {
    let text_out = run(&["theory", "table1"]);
    assert_exit(&text_out, 0);
    let text = stdout(&text_out);
    assert!(text.contains("0.7487"), "missing first cell:\n{text}");
    assert!(text.contains("0.9974"), "missing last cell:\n{text}");
    assert!(text.contains("m=10"));

    let csv_out = run(&["theory", "table1", "--csv"]);
    assert_exit(&csv_out, 0);
    let csv = stdout(&csv_out);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "order,main_effects,predictors,probability");
    assert_eq!(lines.len(), 19, "header plus 18 populated cells");
    assert_eq!(lines[1], "1,2,2,0.7486501019683699");
    assert_eq!(lines[18], "4,10,385,0.9973514006696687");
}

#[test]
fn simulate_preset_writes_and_refuses_overwrite() {
    let dir = tempfile::tempdir().expect("tempdir");
    let out_dir = dir.path().join("table1");
    let out_arg = out_dir.to_str().expect("utf8 path");

    let first = run(&["simulate", "--preset", "table1", "--out", out_arg]);
    assert_exit(&first, 0);
    for file in ["rows.csv", "summary.csv", "metadata.json"] {
        assert!(out_dir.join(file).is_file(), "{file} missing");
    }

    let refused = run(&["simulate", "--preset", "table1", "--out", out_arg]);
    assert_exit(&refused, 3);
    assert!(stderr(&refused).contains("--force"));

    let forced = run(&["simulate", "--preset", "table1", "--out", out_arg, "--force"]);
    assert_exit(&forced, 0);
}

#[test]
fn simulate_threads_do_not_change_bytes() {
    let dir = tempfile::tempdir().expect("tempdir");
    let config = dir.path().join("small.conf");
    fs::write(
        &config,
        "kind = ortho-ratio-vs-p\nn = 50\np_grid = 6, 50\nsigma2_grid = 4\n\
         replicates = 10\nmaster_seed = 9\n",
    )
    .expect("config writes");

    let run_into = |sub: &str, threads: &str| -> Vec<Vec<u8>> {
        let out_dir = dir.path().join(sub);
        let out = run(&[
            "simulate",
            "--config",
            config.to_str().expect("utf8 path"),
            "--out",
            out_dir.to_str().expect("utf8 path"),
            "--threads",
            threads,
        ]);
        assert_exit(&out, 0);
        ["rows.csv", "summary.csv", "metadata.json"]
            .iter()
            .map(|f| fs::read(out_dir.join(f)).expect("output reads"))
            .collect()
    };

    assert_eq!(
        run_into("one", "1"),
        run_into("four", "4"),
        "thread count changed the output bytes"
    );
}

#[test]
fn simulate_rejects_unknown_config_key_with_line() {
    let dir = tempfile::tempdir().expect("tempdir");
    let config = dir.path().join("bad.conf");
    fs::write(&config, "kind = ortho-ratio-vs-p\nbogus = 1\n").expect("config writes");
    let out = run(&[
        "simulate",
        "--config",
        config.to_str().expect("utf8 path"),
        "--out",
        dir.path().join("never").to_str().expect("utf8 path"),
    ]);
    assert_exit(&out, 3);
    let err = stderr(&out);
    assert!(err.contains("line 2"), "no line number in: {err}");
    assert!(err.contains("bogus"), "offending key absent in: {err}");
}

#[test]
fn bounds_curve_endpoints_match_references() {
    let out = run(&["bounds", "--kind", "compat", "--n", "100", "--p-grid", "6..100"]);
    assert_exit(&out, 0);
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "p,tail,bound,ratio");
    assert_eq!(lines.len(), 1 + 95, "one row per dimension 6..=100");
    let first: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(first[0], "6");
    assert_eq!(first[3], "1", "reference dimension must have ratio exactly 1");
    let last: Vec<&str> = lines[95].split(',').collect();
    assert_eq!(last[0], "100");
    assert!(
        last[3].starts_with("1.5133"),
        "ratio at p = 100 should be about 1.513, got {}",
        last[3]
    );

    let rejected = run(&["bounds", "--kind", "compat", "--coverage", "1.0"]);
    assert_exit(&rejected, 2);
}

#[test]
fn bounds_rejects_fixed_a_for_the_compat_kind() {
    let out = run(&["bounds", "--kind", "compat", "--fixed-a", "3"]);
    assert_exit(&out, 2);
    let ok = run(&["bounds", "--kind", "re", "--fixed-a", "3", "--p-grid", "6,100"]);
    assert_exit(&ok, 0);
}

/// y = 2a - b + 3ab + 0.1 eps over 0/1 factors: the pairwise dictionary
/// should win decisively and keep a:b in every split's active set.
fn planted_csv(response_name: &str, response_first: bool) -> String {
    let mut rng = RngStream::new(11, 0);
    let mut text = String::from(if response_first {
        "RESP,a,b,c\n"
    } else {
        "a,b,c,RESP\n"
    })
    .replace("RESP", response_name);
    for _ in 0..120 {
        let a = if rng.uniform() < 0.5 { 1.0 } else { 0.0 };
        let b = if rng.uniform() < 0.5 { 1.0 } else { 0.0 };
        let c = rng.standard_normal();
        let y = 2.0 * a - b + 3.0 * a * b + 0.1 * rng.standard_normal();
        if response_first {
            text.push_str(&format!("{y},{a},{b},{c}\n"));
        } else {
            text.push_str(&format!("{a},{b},{c},{y}\n"));
        }
    }
    text
}

#[test]
fn analyze_recovers_planted_interaction_deterministically() {
    let dir = tempfile::tempdir().expect("tempdir");
    let csv = dir.path().join("planted.csv");
    fs::write(&csv, planted_csv("y", true)).expect("dataset writes");
    let args = ["analyze", csv.to_str().expect("utf8 path"), "--splits", "8"];

    let out = run(&args);
    assert_exit(&out, 0);
    let text = stdout(&out);
    assert!(
        text.contains("interactions selected in every split: a:b"),
        "planted interaction not recovered:\n{text}"
    );
    assert!(text.contains("significant"), "no significance call:\n{text}");

    let again = run(&args);
    assert_eq!(stdout(&again), text, "same flags must reproduce the report");

    let single = run(&["analyze", csv.to_str().expect("utf8 path"), "--splits", "1"]);
    assert_exit(&single, 0);
    assert!(stdout(&single).contains("not computed"));
}

#[test]
fn analyze_accepts_named_response_in_any_position() {
    let dir = tempfile::tempdir().expect("tempdir");
    let first = dir.path().join("first.csv");
    let last = dir.path().join("last.csv");
    fs::write(&first, planted_csv("outcome", true)).expect("dataset writes");
    fs::write(&last, planted_csv("outcome", false)).expect("dataset writes");

    let by_position = run(&["analyze", first.to_str().expect("utf8"), "--splits", "4", "--csv"]);
    assert_exit(&by_position, 0);
    let by_name = run(&[
        "analyze",
        last.to_str().expect("utf8"),
        "--response",
        "outcome",
        "--splits",
        "4",
        "--csv",
    ]);
    assert_exit(&by_name, 0);
    assert_eq!(
        stdout(&by_position),
        stdout(&by_name),
        "moving the response column must not change the analysis"
    );
}

#[test]
fn analyze_reports_data_errors_with_location() {
    let dir = tempfile::tempdir().expect("tempdir");
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "y,a,b\n1,2,x\n3,4,5\n").expect("dataset writes");
    let out = run(&["analyze", bad.to_str().expect("utf8 path")]);
    assert_exit(&out, 3);
    let err = stderr(&out);
    assert!(err.contains("row 2"), "no row in: {err}");
    assert!(err.contains("column 3"), "no column in: {err}");

    let good = dir.path().join("good.csv");
    fs::write(&good, planted_csv("y", true)).expect("dataset writes");
    let missing = run(&["analyze", good.to_str().expect("utf8 path"), "--response", "zzz"]);
    assert_exit(&missing, 3);
    assert!(stderr(&missing).contains("zzz"));

    let absent = run(&["analyze", dir.path().join("nope.csv").to_str().expect("utf8")]);
    assert_exit(&absent, 3);
}

#[test]
fn unwritable_output_dir_reports_io_error() {
    // A regular file in the path makes directory creation fail cleanly.
    let dir = tempfile::tempdir().expect("tempdir");
    let file = dir.path().join("occupied");
    fs::write(&file, "x").expect("file writes");
    let out = run(&[
        "simulate",
        "--preset",
        "table1",
        "--out",
        file.join("sub").to_str().expect("utf8"),
    ]);
    assert_exit(&out, 3);
}
