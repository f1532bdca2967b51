use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const TAXONOMY: &str = "sd_id,sd_name,da_id,da_name\n\
MAT01,Logic,DA1,Mathematics\n\
MAT02,Geometry,DA1,Mathematics\n\
CHE01,Physical chemistry,DA3,Chemistry\n";

const RESEARCHERS: &str = "researcher_id,unit_id,sd_id\n\
r1,U1,MAT01\nr2,U1,MAT02\nr3,U1,MAT02\nr4,U2,MAT01\nr5,U2,MAT01\nr6,U2,MAT02\nr7,U1,CHE01\nr8,U2,CHE01\n";

const PUBLICATIONS: &str = "pub_id,year,sd_id,citations\n\
p1,2001,MAT01,3\np2,2002,MAT02,0\np3,2002,MAT02,1\np4,2003,MAT01,2\np5,2003,MAT01,5\n\
p6,2001,CHE01,4\np7,2002,CHE01,0\np8,2004,MAT01,1\n";

const AUTHORSHIPS: &str = "pub_id,researcher_id\n\
p1,r1\np1,r4\np2,r2\np3,r3\np4,r5\np5,r4\np6,r7\np7,r8\np8,r1\n";

fn write_corpus(dir: &Path) {
    std::fs::write(dir.join("taxonomy.csv"), TAXONOMY).unwrap();
    std::fs::write(dir.join("researchers.csv"), RESEARCHERS).unwrap();
    std::fs::write(dir.join("publications.csv"), PUBLICATIONS).unwrap();
    std::fs::write(dir.join("authorships.csv"), AUTHORSHIPS).unwrap();
}

fn fieldnorm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fieldnorm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    assert!(o.status.success(), "{}", stderr(o));
    serde_json::from_slice(&o.stdout).unwrap()
}

fn section<'a>(tsv: &'a str, name: &str) -> Vec<Vec<&'a str>> {
    let marker = format!("# section: {name}");
    tsv.lines()
        .skip_while(|l| *l != marker)
        .skip(1)
        .take_while(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| l.split('\t').collect())
        .collect()
}

fn corpus() -> (tempfile::TempDir, String) {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path());
    let path = dir.path().to_str().unwrap().to_string();
    (dir, path)
}

#[test]
fn intensity_by_area() {
    let (_dir, c) = corpus();
    let out = fieldnorm(&["intensity", "--corpus-dir", &c, "--years", "2001-2003"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.starts_with("# tool: fieldnorm "));
    assert!(text.contains("# config: years=2001-2003\n"));
    assert!(text.contains("# note: period=2001-2003\n"));
    let rows = section(&text, "intensity");
    assert_eq!(
        rows[0],
        [
            "unit_id",
            "scope_id",
            "researchers",
            "publications",
            "intensity"
        ]
    );
    // U1 mathematics: r1..r3 with p1, p2, p3 (p8 falls outside the years)
    assert!(rows.contains(&vec!["U1", "DA1", "3", "3.000000", "1.000000"]));
    assert!(rows.contains(&vec!["U2", "DA1", "3", "3.000000", "1.000000"]));
    assert!(rows.contains(&vec!["U1", "DA3", "1", "1.000000", "1.000000"]));
}

#[test]
fn fractional_counting_splits_coauthored_publications() {
    let (_dir, c) = corpus();
    let v = json(&fieldnorm(&[
        "intensity",
        "--corpus-dir",
        &c,
        "--scope",
        "sd",
        "--counting",
        "fractional",
        "--years",
        "2001-2003",
        "--format",
        "json",
    ]));
    let cell = v["intensity"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["unit_id"] == "U1" && r["scope_id"] == "MAT01")
        .unwrap();
    assert_eq!(cell["publications"], 0.5);
    assert_eq!(cell["intensity"], 0.5);
}

#[test]
fn quality_counting_is_labelled_as_substitute() {
    let (_dir, c) = corpus();
    let out = fieldnorm(&["intensity", "--corpus-dir", &c, "--counting", "quality"]);
    let text = stdout(&out);
    assert!(text.contains("quality_ownership_intensity"));
    assert!(text.contains("# note: quality_ownership_intensity is a substitute indicator"));
}

#[test]
fn rank_ties_share_the_best_rank() {
    let (_dir, c) = corpus();
    let out = fieldnorm(&["rank", "--corpus-dir", &c, "--years", "2001-2003"]);
    let text = stdout(&out);
    let rows = section(&text, "ranking");
    assert_eq!(rows[1], ["DA1", "1", "U1", "1.000000"]);
    assert_eq!(rows[2], ["DA1", "1", "U2", "1.000000"]);
}

#[test]
fn compare_reports_summary_and_units() {
    let (_dir, c) = corpus();
    let v = json(&fieldnorm(&[
        "compare",
        "--corpus-dir",
        &c,
        "--format",
        "json",
    ]));
    let summary = v["summary"].as_array().unwrap();
    assert_eq!(summary.len(), 2);
    assert_eq!(summary[0]["da_id"], "DA1");
    assert_eq!(summary[0]["n_sds"], 2);
    let units = v["units"].as_array().unwrap();
    assert!(units.iter().all(|u| u["variation"].is_u64()));
}

#[test]
fn normalize_theta_is_staff_weighted() {
    let (_dir, c) = corpus();
    let v = json(&fieldnorm(&[
        "normalize",
        "--corpus-dir",
        &c,
        "--da",
        "DA3",
        "--format",
        "json",
    ]));
    let theta = v["theta"].as_array().unwrap();
    assert_eq!(theta.len(), 2);
    assert_eq!(theta[0]["theta"], 1.0);
    assert_eq!(v["contributions"].as_array().unwrap().len(), 2);
}

#[test]
fn stats_applies_the_coverage_threshold() {
    let (dir, c) = corpus();
    let cov = dir.path().join("coverage.csv");
    // DA1 has 6 indexed publications out of 20 declared
    std::fs::write(&cov, "da_id,total_output_count\nDA1,20\nDA3,2\n").unwrap();
    let out = fieldnorm(&[
        "stats",
        "--corpus-dir",
        &c,
        "--coverage",
        cov.to_str().unwrap(),
    ]);
    let text = stdout(&out);
    assert!(text.contains("# note: area DA1 excluded by coverage threshold"));
    let rows = section(&text, "stats");
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1][0], "DA3");
}

#[test]
fn validate_lists_coverage_status() {
    let (dir, c) = corpus();
    let cov = dir.path().join("coverage.csv");
    std::fs::write(&cov, "da_id,total_output_count\nDA1,20\nDA3,2\n").unwrap();
    let out = fieldnorm(&[
        "validate",
        "--corpus-dir",
        &c,
        "--coverage",
        cov.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let rows = section(&text, "coverage");
    assert_eq!(rows[1], ["DA1", "6", "20", "0.300000", "excluded"]);
    assert_eq!(rows[2], ["DA3", "2", "2", "1.000000", "retained"]);
}

#[test]
fn validate_rejects_an_empty_roster() {
    let (dir, c) = corpus();
    std::fs::write(
        dir.path().join("researchers.csv"),
        "researcher_id,unit_id,sd_id\n",
    )
    .unwrap();
    std::fs::write(dir.path().join("authorships.csv"), "pub_id,researcher_id\n").unwrap();
    let out = fieldnorm(&["validate", "--corpus-dir", &c]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("error\tEMPTY_ROSTER"));
    assert_eq!(stderr(&out).lines().count(), 1);
}

#[test]
fn malformed_rows_are_reported_with_line_numbers() {
    let (dir, c) = corpus();
    std::fs::write(
        dir.path().join("publications.csv"),
        "pub_id,year,sd_id,citations\np1,2001,MAT01,3\np2,twenty,MAT02,0\n",
    )
    .unwrap();
    let out = fieldnorm(&["validate", "--corpus-dir", &c]);
    assert_eq!(out.status.code(), Some(1));
    let text = stdout(&out);
    let rows = section(&text, "issues");
    assert_eq!(rows[1][1], "MALFORMED_ROW");
    assert_eq!(rows[1][2], "publications.csv:3");

    let out = fieldnorm(&["rank", "--corpus-dir", &c]);
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());
    let err = stderr(&out);
    assert_eq!(err.lines().count(), 1);
    assert!(err.starts_with("fieldnorm: error:"), "{err}");
}

#[test]
fn unknown_references_are_rejected() {
    let (dir, c) = corpus();
    std::fs::write(
        dir.path().join("authorships.csv"),
        "pub_id,researcher_id\np1,ghost\n",
    )
    .unwrap();
    let out = fieldnorm(&["validate", "--corpus-dir", &c]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("UNKNOWN_RESEARCHER"));
}

#[test]
fn usage_errors_exit_with_two() {
    let (dir, c) = corpus();
    assert_eq!(
        fieldnorm(&["rank", "--corpus-dir", &c, "--scope", "country"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(fieldnorm(&["frobnicate"]).status.code(), Some(2));
    let missing = dir.path().join("missing");
    let out = fieldnorm(&["stats", "--corpus-dir", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr(&out).lines().count(), 1);
}

#[test]
fn unknown_area_is_a_data_error() {
    let (_dir, c) = corpus();
    let out = fieldnorm(&["compare", "--corpus-dir", &c, "--da", "DA9"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sector_table_is_transposed() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("countries.csv");
    std::fs::write(
        &path,
        "country_id,publications_per_researcher,public_share_percent\nI,0.49,59\nUK,0.36,40\nJ,0.11,31\n",
    )
    .unwrap();
    let out = fieldnorm(&[
        "sector",
        "--countries",
        path.to_str().unwrap(),
        "--reference",
        "I",
        "--public-pi",
        "0.82",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("# note: private_intensity=0.015122 calibrated from I\n"));
    let rows = section(&text, "comparison");
    assert_eq!(rows[0], ["indicator", "I", "UK", "J"]);
    let labels: Vec<&str> = rows[1..].iter().map(|r| r[0]).collect();
    assert_eq!(
        labels,
        [
            "publications_per_researcher",
            "rank_total",
            "public_share_percent",
            "public_publications_per_researcher",
            "rank_public"
        ]
    );
    assert_eq!(rows[2][1..], ["1", "2", "3"]);
    assert_eq!(rows[5][1..], ["2", "1", "3"]);
}

#[test]
fn sector_calibration_flags_are_exclusive() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("countries.csv");
    std::fs::write(
        &path,
        "country_id,publications_per_researcher,public_share_percent\nI,0.49,59\n",
    )
    .unwrap();
    let p = path.to_str().unwrap();
    let out = fieldnorm(&["sector", "--countries", p, "--reference", "I"]);
    assert_eq!(out.status.code(), Some(2));
    let out = fieldnorm(&[
        "sector",
        "--countries",
        p,
        "--reference",
        "I",
        "--public-pi",
        "0.8",
        "--private-pubs",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let out = fieldnorm(&[
        "sector",
        "--countries",
        p,
        "--reference",
        "X",
        "--public-pi",
        "0.8",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn synth_output_reloads_and_matches_its_digests() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("corpus");
    let v = json(&fieldnorm(&[
        "synth",
        "--seed",
        "3",
        "--out-dir",
        out_dir.to_str().unwrap(),
        "--format",
        "json",
    ]));
    assert_eq!(v["metadata"]["config"]["seed"], "3");
    for f in v["files"].as_array().unwrap() {
        let bytes = std::fs::read(out_dir.join(f["file"].as_str().unwrap())).unwrap();
        assert_eq!(f["sha256"], fieldnorm::report::sha256_hex(&bytes));
    }
    let out = fieldnorm(&["validate", "--corpus-dir", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stdout(&out));

    let other = json(&fieldnorm(&["synth", "--seed", "4", "--format", "json"]));
    assert_ne!(v["files"], other["files"]);
}

#[test]
fn synth_config_file_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"seed": 1, "sds": [{"sd_id": "S", "da_id": "D", "fertility": 0.5}],
            "units": [{"unit_id": "U", "staff_by_sd": {"S": 10}}]}"#,
    )
    .unwrap();
    let out = fieldnorm(&["synth", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let rows = section(&text, "cells");
    assert_eq!(rows[1], ["U", "S", "10", "5.000000"]);

    std::fs::write(&cfg, r#"{"seed": 1, "sds": [], "units": []}"#).unwrap();
    let out = fieldnorm(&["synth", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn output_flag_writes_the_report_file() {
    let (dir, c) = corpus();
    let target = dir.path().join("report.tsv");
    let out = fieldnorm(&["stats", "--corpus-dir", &c, "-o", target.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(target).unwrap();
    assert!(text.contains("# section: stats"));
}

#[test]
fn thread_cap_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let c = dir.path().join("c");
    assert!(
        fieldnorm(&["synth", "--seed", "9", "--out-dir", c.to_str().unwrap()])
            .status
            .success()
    );
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_fieldnorm"))
            .args(["compare", "--corpus-dir", c.to_str().unwrap()])
            .env("FIELDNORM_THREADS", threads)
            .output()
            .unwrap()
    };
    let one = run("1");
    assert!(one.status.success());
    assert_eq!(one.stdout, run("4").stdout);
    assert_eq!(run("zero").status.code(), Some(2));
}
