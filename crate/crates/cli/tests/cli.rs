use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use serde_json::Value;
use tempfile::TempDir;

fn fixture(name: &str, file: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures")
        .join(name)
        .join(file)
}

fn case3_gt() -> PathBuf {
    fixture("case3_f14", "gt.jsonl")
}

fn case3_text() -> String {
    fs::read_to_string(fixture("case3_f14", "rollout.txt")).unwrap()
}

fn rollout_line(id: &str, text: &str) -> String {
    serde_json::json!({ "id": id, "trace_text": text }).to_string()
}

fn write(dir: &TempDir, name: &str, lines: &[String]) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, lines.join("\n") + "\n").unwrap();
    p
}

fn contra(args: &[&str], stdin: Option<&str>) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_contra"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    {
        let mut pipe = child.stdin.take().unwrap();
        if let Some(s) = stdin {
            pipe.write_all(s.as_bytes()).unwrap();
        }
    }
    child.wait_with_output().unwrap()
}

fn records(out: &Output) -> Vec<Value> {
    String::from_utf8(out.stdout.clone())
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn corrupted_case3() -> String {
    case3_text().replacen("{'n': 14, 'x': 16}", "{'n': 14, 'x': 8}", 1)
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate_reports_verdicts_as_data() {
    let dir = TempDir::new().unwrap();
    let broken = case3_text().replacen("[THOUGHT]", "[thought]", 1);
    let r = write(
        &dir,
        "r.jsonl",
        &[
            rollout_line("case3_f14", &case3_text()),
            rollout_line("case3_f14", &broken),
        ],
    );
    let out = contra(&["validate", arg(&case3_gt()), arg(&r)], None);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let recs = records(&out);
    assert_eq!(recs.len(), 2);
    assert_eq!(recs[0]["verdict"], 1);
    assert_eq!(recs[0]["failure_code"], Value::Null);
    assert_eq!(recs[1]["verdict"], 0);
    assert!(recs[1]["failure_code"].is_string());
}

#[test]
fn missing_file_exits_2() {
    let out = contra(
        &["validate", "/nonexistent/gt.jsonl", "/nonexistent/r.jsonl"],
        None,
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
}

#[test]
fn schema_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let bad_gt = write(&dir, "gt.jsonl", &["{\"id\": \"x\"}".into()]);
    let r = write(&dir, "r.jsonl", &[rollout_line("case3_f14", &case3_text())]);
    assert_eq!(
        contra(&["score", arg(&bad_gt), arg(&r)], None)
            .status
            .code(),
        Some(2)
    );

    let unknown = write(&dir, "u.jsonl", &[rollout_line("nope", &case3_text())]);
    assert_eq!(
        contra(&["score", arg(&case3_gt()), arg(&unknown)], None)
            .status
            .code(),
        Some(2)
    );

    let junk = write(&dir, "j.jsonl", &["not json".into()]);
    let out = contra(&["score", arg(&case3_gt()), arg(&junk)], None);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains(":1:"));

    assert_eq!(
        contra(&["score", "-", "-"], Some("")).status.code(),
        Some(2)
    );
    assert_eq!(
        contra(&["score", arg(&case3_gt()), arg(&r), "--alpha=-1"], None)
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn score_case3_and_corruption() {
    let dir = TempDir::new().unwrap();
    let r = write(
        &dir,
        "r.jsonl",
        &[
            rollout_line("case3_f14", &case3_text()),
            rollout_line("case3_f14", &corrupted_case3()),
            rollout_line("case3_f14", "the answer is 15"),
        ],
    );
    let out = contra(&["score", arg(&case3_gt()), arg(&r)], None);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    let expected = fs::read_to_string(fixture("case3_f14", "expected.jsonl")).unwrap();
    assert_eq!(lines[0], expected.trim());
    assert_eq!(
        lines[1],
        r#"{"id":"case3_f14","delta_fmt":1,"deltas":[1,1,0,1],"r_proc":0.80000000000000004,"r_res":2,"gate":false,"total":0.80000000000000004}"#
    );
    let recs = records(&out);
    assert_eq!(recs[2]["total"], 0.0);
    assert_eq!(recs[2]["delta_fmt"], 0);
}

#[test]
fn score_reads_stdin_and_honours_alpha() {
    let out = contra(
        &["score", arg(&case3_gt()), "-", "--alpha", "0.5"],
        Some(&rollout_line("case3_f14", &case3_text())),
    );
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(records(&out)[0]["total"], 3.0);
}

#[test]
fn output_is_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let r = write(
        &dir,
        "r.jsonl",
        &[
            rollout_line("case3_f14", &case3_text()),
            rollout_line("case3_f14", &corrupted_case3()),
        ],
    );
    let a = contra(&["score", arg(&case3_gt()), arg(&r)], None);
    let b = contra(&["score", arg(&case3_gt()), arg(&r)], None);
    assert_eq!(a.stdout, b.stdout);
    let a = contra(
        &[
            "dbs-run",
            arg(&case3_gt()),
            "--policy",
            "noisy:0.3",
            "--seed",
            "7",
        ],
        None,
    );
    let b = contra(
        &[
            "dbs-run",
            arg(&case3_gt()),
            "--policy",
            "noisy:0.3",
            "--seed",
            "7",
        ],
        None,
    );
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn output_flag_writes_file() {
    let dir = TempDir::new().unwrap();
    let r = write(&dir, "r.jsonl", &[rollout_line("case3_f14", &case3_text())]);
    let dest = dir.path().join("out.jsonl");
    let out = contra(
        &["score", arg(&case3_gt()), arg(&r), "-o", arg(&dest)],
        None,
    );
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    assert!(fs::read_to_string(dest).unwrap().contains("\"total\":4"));
}

fn reward_line(id: &str, total: f64) -> String {
    format!(
        r#"{{"id":"{id}","delta_fmt":1,"deltas":[1],"r_proc":0,"r_res":0,"gate":false,"total":{total}}}"#
    )
}

#[test]
fn advantage_standardises_within_groups() {
    let dir = TempDir::new().unwrap();
    let lines = vec![
        reward_line("a", 4.0),
        reward_line("b", 1.0),
        reward_line("a", 0.0),
        reward_line("b", 1.0),
        reward_line("a", 0.0),
        reward_line("a", 0.0),
    ];
    let p = write(&dir, "rw.jsonl", &lines);
    assert_eq!(
        contra(&["advantage", arg(&p)], None).status.code(),
        Some(2),
        "default group size is 8"
    );

    let p = write(
        &dir,
        "rw.jsonl",
        &lines[..4]
            .iter()
            .chain(&lines[..2])
            .cloned()
            .collect::<Vec<_>>(),
    );
    assert_eq!(
        contra(&["advantage", arg(&p), "--group-size", "4"], None)
            .status
            .code(),
        Some(2)
    );

    let p = write(
        &dir,
        "rw.jsonl",
        &[
            lines[0].clone(),
            lines[2].clone(),
            lines[4].clone(),
            lines[5].clone(),
            lines[1].clone(),
            lines[3].clone(),
            reward_line("b", 1.0),
            reward_line("b", 1.0),
        ],
    );
    let out = contra(&["advantage", arg(&p), "--group-size", "4"], None);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let recs = records(&out);
    assert_eq!(recs.len(), 8);
    let s3 = 3f64.sqrt();
    assert!((recs[0]["advantage"].as_f64().unwrap() - s3).abs() < 1e-6);
    assert!((recs[1]["advantage"].as_f64().unwrap() + 1.0 / s3).abs() < 1e-6);
    assert_eq!(recs[4]["id"], "b");
    assert_eq!(recs[4]["advantage"], 0.0);
    assert_eq!(
        contra(
            &["advantage", arg(&p), "--group-size", "4", "--epsilon", "0"],
            None
        )
        .status
        .code(),
        Some(2)
    );
}

#[test]
fn rcs_per_rollout_and_mean() {
    let dir = TempDir::new().unwrap();
    let r = write(
        &dir,
        "r.jsonl",
        &[rollout_line("case3_f14", &corrupted_case3())],
    );
    let out = contra(&["rcs", arg(&case3_gt()), arg(&r)], None);
    let recs = records(&out);
    assert_eq!(recs[0]["rcs"], 0.5);
    assert_eq!(recs[1]["summary"]["mean"], 0.5);
    assert_eq!(recs[1]["summary"]["count"], 1);

    let good = write(
        &dir,
        "g.jsonl",
        &[
            rollout_line("case3_f14", &case3_text()),
            rollout_line("case3_f14", &case3_text()),
        ],
    );
    assert_eq!(
        records(&contra(&["rcs", arg(&case3_gt()), arg(&good)], None))[2]["summary"]["mean"],
        1.0
    );

    let junk = write(
        &dir,
        "x.jsonl",
        &[
            rollout_line("case3_f14", "lorem ipsum"),
            rollout_line("case3_f14", "[TRACE]"),
        ],
    );
    assert_eq!(
        records(&contra(&["rcs", arg(&case3_gt()), arg(&junk)], None))[2]["summary"]["mean"],
        0.0
    );
}

#[test]
fn dbs_run_oracle() {
    let out = contra(
        &[
            "dbs-run",
            arg(&case3_gt()),
            "--policy",
            "oracle",
            "--n",
            "8",
        ],
        None,
    );
    assert_eq!(out.status.code(), Some(0));
    let recs = records(&out);
    assert_eq!(recs.len(), 9);
    for t in &recs[..8] {
        assert_eq!(t["provenance"], "dbs");
        assert_eq!(t["termination"], "trace-closed");
        assert_eq!(t["score"], 2.0);
        assert_eq!(t["text"], recs[0]["text"]);
    }
    let s = &recs[8]["summary"];
    assert_eq!(
        (s["mean"].as_f64(), s["std"].as_f64()),
        (Some(2.0), Some(0.0))
    );
    assert_eq!(s["stages"].as_array().unwrap().len(), 5);

    let one = records(&contra(&["dbs-run", arg(&case3_gt()), "--n", "1"], None));
    assert_eq!(one.len(), 2);
}

#[test]
fn dbs_run_mixed_and_policies() {
    let out = contra(
        &[
            "dbs-run",
            arg(&case3_gt()),
            "--policy",
            "noisy:0.5",
            "--mode",
            "mixed",
            "--seed",
            "3",
        ],
        None,
    );
    assert_eq!(out.status.code(), Some(0));
    let recs = records(&out);
    let prov: Vec<&str> = recs[..8]
        .iter()
        .map(|r| r["provenance"].as_str().unwrap())
        .collect();
    assert_eq!(
        prov,
        ["regular", "regular", "regular", "regular", "dbs", "dbs", "dbs", "dbs"]
    );
    assert!(recs[8]["summary"]["regular_mean"].is_number());

    let odd = contra(
        &["dbs-run", arg(&case3_gt()), "--mode", "mixed", "--n", "3"],
        None,
    );
    assert_eq!(odd.status.code(), Some(2));
    assert_eq!(
        contra(&["dbs-run", arg(&case3_gt()), "--policy", "greedy"], None)
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        contra(&["dbs-run", arg(&case3_gt()), "--policy", "noisy:2"], None)
            .status
            .code(),
        Some(2)
    );

    let g = records(&contra(
        &[
            "dbs-run",
            arg(&case3_gt()),
            "--policy",
            "gibberish",
            "--n",
            "4",
        ],
        None,
    ));
    assert!(g[..4]
        .iter()
        .all(|t| t["score"] == 0.0 && t["termination"] == "stage-cap"));
}

#[test]
fn dbs_run_scripted() {
    let dir = TempDir::new().unwrap();
    let script = write(
        &dir,
        "script.jsonl",
        &[
            serde_json::json!({"stage": 1, "beam": 0, "text": "nothing useful\n[/LOCALS]\n"})
                .to_string(),
        ],
    );
    let spec = format!("scripted:{}", script.display());
    let out = contra(
        &["dbs-run", arg(&case3_gt()), "--policy", &spec, "--n", "2"],
        None,
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let recs = records(&out);
    // the beam that started badly is replaced by a copy of the good one
    assert!(recs[..2].iter().all(|t| t["score"] == 2.0));
    assert_eq!(recs[2]["summary"]["stages"][0]["mean"], 0.2);

    let bad = write(&dir, "bad.jsonl", &[r#"{"stage": 1}"#.to_string()]);
    let spec = format!("scripted:{}", bad.display());
    assert_eq!(
        contra(&["dbs-run", arg(&case3_gt()), "--policy", &spec], None)
            .status
            .code(),
        Some(2)
    );
}
