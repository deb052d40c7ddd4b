//! The `onwheel` binary end to end.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use onwheel::table::read_metrics;
use onwheel_core::gesture_input::Hand;
use onwheel_core::menu::{LayoutDocument, MenuLayout, PipColor};
use onwheel_core::metrics::MetricName;

fn onwheel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_onwheel")).args(args).env_remove("ONWHEEL_OUT").output().unwrap()
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn small_run(dir: &Path) {
    ok(&onwheel(&["run", "--road", "1", "--subjects", "3", "--seed", "11", "--out", dir.to_str().unwrap()]));
}

#[test]
fn single_subject_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let out = onwheel(&["run", "--subjects", "1", "--out", dir.path().to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("at least 2 subjects"));
}

#[test]
fn out_dir_defaults_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("from-env");
    let out = Command::new(env!("CARGO_BIN_EXE_onwheel"))
        .args(["run", "--subjects", "2", "--condition", "gesture"])
        .env("ONWHEEL_OUT", &target)
        .output()
        .unwrap();
    ok(&out);
    assert!(target.join("manifest.json").is_file());
    let rows = read_metrics(fs::File::open(target.join("metrics.csv")).unwrap()).unwrap();
    assert!(rows.iter().all(|r| r.condition.name() == "gesture"));
}

#[test]
fn corrupted_log_is_reported_with_its_line() {
    let dir = tempfile::tempdir().unwrap();
    small_run(dir.path());
    let log = dir.path().join("logs/road-1/s001-tactile.log");
    let text = fs::read_to_string(&log).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines[100] = "S 99 not-a-number";
    fs::write(&log, lines.join("\n") + "\n").unwrap();
    let out = onwheel(&["report", dir.path().to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("s001-tactile.log") && err.contains("line 101"), "{err}");
}

#[test]
fn edited_params_are_detected() {
    let dir = tempfile::tempdir().unwrap();
    small_run(dir.path());
    let params = dir.path().join("params.json");
    let text = fs::read_to_string(&params).unwrap();
    fs::write(&params, text.replacen("0.", "1.", 1)).unwrap();
    let out = onwheel(&["report", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn csv_report_has_one_file_per_measure() {
    let dir = tempfile::tempdir().unwrap();
    small_run(dir.path());
    let csv_dir = dir.path().join("csv");
    ok(&onwheel(&["report", dir.path().to_str().unwrap(), "--format", "csv", "--out", csv_dir.to_str().unwrap()]));
    let mut names: Vec<String> =
        fs::read_dir(&csv_dir).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    let rows = read_metrics(fs::File::open(dir.path().join("metrics.csv")).unwrap()).unwrap();
    let mut measures: Vec<String> =
        MetricName::ALL.iter().filter(|m| rows.iter().any(|r| r.metric == **m)).map(|m| format!("{m}.csv")).collect();
    measures.sort();
    assert_eq!(names, measures);
    let speed = fs::read_to_string(csv_dir.join("speed_rmse.csv")).unwrap();
    assert!(speed.starts_with("kind,label,condition,n,mean,sd,f,df1,df2,p,significant\n"));
}

#[test]
fn json_report_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    small_run(dir.path());
    let text = ok(&onwheel(&["report", dir.path().to_str().unwrap(), "--format", "json"]));
    assert_eq!(text, fs::read_to_string(dir.path().join("report.json")).unwrap());
}

#[test]
fn replay_prints_run_metrics() {
    let dir = tempfile::tempdir().unwrap();
    small_run(dir.path());
    let text = ok(&onwheel(&["replay", dir.path().join("logs/road-1/s002-gesture.log").to_str().unwrap()]));
    assert!(text.starts_with("road 1 gesture seed "));
    assert!(text.contains("task_completion_time"));
}

#[test]
fn exported_scenario_reloads() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("road3.json");
    ok(&onwheel(&["export-scenario", "--road", "3", "--out", file.to_str().unwrap()]));
    let run_dir = dir.path().join("run");
    ok(&onwheel(&[
        "run",
        "--scenario",
        file.to_str().unwrap(),
        "--subjects",
        "2",
        "--condition",
        "tactile",
        "--out",
        run_dir.to_str().unwrap(),
    ]));
    assert!(run_dir.join("logs/road-3/s001-tactile.log").is_file());
    let csv = ok(&onwheel(&["export-scenario", "--road", "2", "--format", "csv"]));
    assert!(csv.starts_with("index,location_m,condition,device,feature,control,levels,prompt\n"));
    assert!(!onwheel(&["export-scenario", "--road", "9"]).status.success());
}

#[test]
fn exported_layout_carries_pips() {
    let text = ok(&onwheel(&["export-layout"]));
    let doc: LayoutDocument = serde_json::from_str(&text).unwrap();
    assert_eq!(doc, MenuLayout::default().to_document());
    for e in &doc.entries {
        let expected = match e.hand {
            Hand::Left => PipColor::Red,
            Hand::Right => PipColor::Blue,
        };
        assert_eq!(e.pip_color, Some(expected), "{e:?}");
        assert!((1..=5).contains(&e.count));
    }
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, text.replacen("\"count\": 1", "\"count\": 7", 1)).unwrap();
    let out = onwheel(&["export-layout", "--layout", bad.to_str().unwrap()]);
    assert!(!out.status.success());
}
