use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::sync::Arc;

use mrl_service::{ManualClock, MistakeRequest, OutcomeRequest, TrainerService};
use serde_json::Value;

fn mrl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mrl"))
        .args(args)
        .env_remove("MRL_LOG_DIR")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

type Files = Vec<(String, Vec<u8>)>;

fn dir_contents(dir: &Path) -> Files {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn run_twice(args: &[&str]) -> (Files, Files) {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let mut full: Vec<&str> = args.to_vec();
        full.extend(["--no-timestamps", "--out", dir.path().to_str().unwrap()]);
        let out = mrl(&full);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    (dir_contents(a.path()), dir_contents(b.path()))
}

#[test]
fn reruns_are_byte_identical() {
    for args in [
        vec!["run", "--seed", "4"],
        vec!["experiment", "--groups", "none,random,learned", "--subjects", "6", "--seed", "7"],
        vec!["sweep", "--alphas", "0.01,0.05", "--seeds", "4", "--catalog", "tetris7"],
    ] {
        let (a, b) = run_twice(&args);
        assert!(!a.is_empty());
        assert_eq!(a, b, "{args:?}");
    }
}

#[test]
fn sweep_writes_one_series_per_alpha() {
    let (files, _) = run_twice(&["sweep", "--alphas", "0.01,0.015,0.05,0.07", "--seeds", "3"]);
    let names: Vec<&str> = files.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(
        names,
        ["sweep-alpha-0.01.csv", "sweep-alpha-0.015.csv", "sweep-alpha-0.05.csv", "sweep-alpha-0.07.csv"]
    );
    for (_, bytes) in &files {
        let text = String::from_utf8(bytes.clone()).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,entropy"));
        assert_eq!(lines.next(), Some("0,2"));
    }
}

#[test]
fn experiment_report_has_groups_and_tests() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.toml");
    fs::write(&config, "catalog = \"robot4\"\n[engine]\nalpha = 0.015\nwindow_k = 3\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = mrl(&[
        "experiment", "--groups", "none,random,learned", "--subjects", "30", "--seed", "7",
        "--config", config.to_str().unwrap(), "--out", out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = fs::read_to_string(out_dir.join("report.txt")).unwrap();
    for needle in ["none (n=30)", "random (n=30)", "learned (n=30)", "After (unreinforced)", "none vs learned: t ="] {
        assert!(report.contains(needle), "missing {needle}:\n{report}");
    }

    let log = out_dir.join("experiment.jsonl");
    let replay = mrl(&["replay", "--log", log.to_str().unwrap()]);
    assert_eq!(code(&replay), 0);
    assert!(String::from_utf8_lossy(&replay.stdout).contains("90 of 90 sessions replayed cleanly"));

    let analysed = dir.path().join("analysis");
    let out = mrl(&["analyze", "--log", log.to_str().unwrap(), "--out", analysed.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_to_string(analysed.join("stats.txt")).unwrap(), report);
    let regret = fs::read_to_string(analysed.join("regret.csv")).unwrap();
    assert_eq!(regret.lines().count(), 91);
    assert!(fs::read_to_string(analysed.join("entropy.csv")).unwrap().starts_with("session_id,t,entropy\n"));
}

#[test]
fn tampered_log_exits_with_replay_status() {
    let dir = tempfile::tempdir().unwrap();
    let out = mrl(&["run", "--seed", "2", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let log = dir.path().join("run.jsonl");
    assert_eq!(code(&mrl(&["replay", "--log", log.to_str().unwrap()])), 0);

    let text = fs::read_to_string(&log).unwrap();
    let mut lines: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let target = lines
        .iter()
        .position(|v| v["payload"]["type"] == "OutcomeRecorded")
        .unwrap();
    let w = &mut lines[target]["payload"]["record"]["weights_after"];
    let bumped = w[0].as_f64().unwrap() + 1e-3;
    w[0] = Value::from(bumped);
    let tampered: String = lines.iter().map(|v| format!("{v}\n")).collect();
    let bad = dir.path().join("tampered.jsonl");
    fs::write(&bad, tampered).unwrap();

    let out = mrl(&["replay", "--log", bad.to_str().unwrap()]);
    assert_eq!(code(&out), 3);
    let seq = lines[target]["seq"].as_u64().unwrap();
    assert!(String::from_utf8_lossy(&out.stdout).contains(&format!("at sequence number {seq}")));
}

#[test]
fn service_logs_replay_through_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let service = TrainerService::with_log_dir(dir.path(), Arc::new(ManualClock::new(5)), 3).unwrap();
    for group in ["learned", "random", "none"] {
        let id = service
            .create_session(mrl_service::CreateSessionRequest {
                group: group.into(),
                catalog: "tetris7".into(),
                seed: Some(8),
                config: None,
            })
            .unwrap()
            .session_id;
        for k in 0..12 {
            let reply = service
                .report_mistake(&id, MistakeRequest { state_tag: format!("GuidedResponse:{k}") })
                .unwrap();
            if let Some(rid) = reply.reinforcer_id {
                service.report_outcome(&id, OutcomeRequest { reinforcer_id: rid, rectified: k % 2 == 0 }).unwrap();
            }
        }
    }
    service.end_all();
    let log = dir.path().join(mrl_service::LOG_FILE_NAME);
    let out = mrl(&["replay", "--log", log.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn usage_and_runtime_errors() {
    assert_eq!(code(&mrl(&[])), 1);
    assert_eq!(code(&mrl(&["bogus"])), 1);
    assert_eq!(code(&mrl(&["run", "--frobnicate"])), 1);
    assert_eq!(code(&mrl(&["run", "--catalog", "nope"])), 1);
    assert_eq!(code(&mrl(&["--help"])), 0);
    assert_eq!(code(&mrl(&["replay", "--log", "/nonexistent/log.jsonl"])), 2);

    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    fs::write(&config, "[engine]\nalpha = 0.9\n").unwrap();
    let out = mrl(&["run", "--config", config.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 2);
}

#[test]
fn log_dir_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_mrl"))
        .args(["run", "--seed", "1"])
        .env("MRL_LOG_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    assert!(dir.path().join("run.jsonl").exists());
}
