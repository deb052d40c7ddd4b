//! Batch study runs and report recomputation over a run directory.

use std::collections::BTreeSet;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use onwheel_core::driver_sim::{plan_study, DriverParams, StudyRunner};
use onwheel_core::gesture_input::KeyMap;
use onwheel_core::menu::{load_layout, LayoutDocument};
use onwheel_core::metrics::{run_metrics, MetricRow, MetricsConfig};
use onwheel_core::recognizer::RecognizerConfig;
use onwheel_core::runlog::{Condition, RunLog};
use onwheel_core::scenario::{load_scenario, Scenario, ScenarioDocument};
use onwheel_core::stats::{build_report, PairedScores, SignificanceConfig, StudyReport};
use rayon::prelude::*;
use thiserror::Error;

use crate::docs::{content_hash, parse_json, to_pretty_json, DocError};
use crate::logfile::{read_run_log, run_log_to_string, LogError};
use crate::manifest::{Manifest, RoadEntry, RunEntry, SessionManifest, StudyManifest, MANIFEST_VERSION, TOOL_VERSION};
use crate::report::{render_csv, render_json, render_text};
use crate::session::{read_session_log, replay, Replay, SessionConfig};
use crate::table::{read_scores, write_metrics, TableError};

pub const PARAMS_FILE: &str = "params.json";
pub const METRICS_FILE: &str = "metrics.csv";
pub const SCORES_FILE: &str = "scores.csv";
pub const REPORT_TEXT: &str = "report.txt";
pub const REPORT_JSON: &str = "report.json";

/// Errors reading or writing a run or session directory.
#[derive(Debug, Error)]
pub enum StudyError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Log { path: String, source: LogError },
    #[error(transparent)]
    Doc(#[from] DocError),
    #[error("{path}: {source}")]
    Table { path: String, source: TableError },
    #[error(transparent)]
    Sim(#[from] onwheel_core::driver_sim::SimError),
    #[error("{path}: {source}")]
    Metric { path: String, source: onwheel_core::metrics::MetricError },
    #[error("integrity check failed: {0}")]
    Integrity(String),
    #[error("{0}")]
    Usage(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StudyError + '_ {
    move |source| StudyError::Io { path: path.display().to_string(), source }
}

fn write_file(path: &Path, contents: &str) -> Result<(), StudyError> {
    fs::write(path, contents).map_err(io_err(path))
}

#[derive(Debug, Clone)]
pub struct RunRequest {
    pub scenarios: Vec<Scenario>,
    pub conditions: Vec<Condition>,
    pub n_subjects: u32,
    pub seed: u64,
    pub params: DriverParams,
    pub alpha: SignificanceConfig,
    pub scores: Option<Vec<PairedScores>>,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub manifest: StudyManifest,
    pub metrics: Vec<MetricRow>,
    pub report: StudyReport,
}

fn log_name(subject: u32, condition: Condition, road: u32) -> String {
    format!("logs/road-{road}/s{subject:03}-{condition}.log")
}

fn scores_csv(scores: &[PairedScores]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(crate::table::SCORE_COLUMNS).expect("in-memory write");
    for s in scores {
        for (i, (a, b)) in s.pairs.iter().enumerate() {
            w.write_record([s.name.clone(), i.to_string(), a.to_string(), b.to_string()]).expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV output is UTF-8")
}

/// Simulates every run of a balanced study and writes logs, metrics, report
/// and manifest under `out_dir`. Runs execute in parallel; every output is
/// ordered by the study plan.
pub fn run_study(req: &RunRequest) -> Result<RunOutcome, StudyError> {
    let road_ids: Vec<u32> = req.scenarios.iter().map(|s| s.road().id).collect();
    if road_ids.iter().collect::<BTreeSet<_>>().len() != road_ids.len() {
        return Err(StudyError::Usage("each road may be given only once".into()));
    }
    if req.conditions.is_empty() || road_ids.is_empty() {
        return Err(StudyError::Usage("need at least one road and one condition".into()));
    }
    let plan = plan_study(&road_ids, &req.conditions, req.n_subjects, &req.params, req.seed)?;
    let runner = StudyRunner::new(req.scenarios.clone(), &req.conditions, req.params)?;

    let out = &req.out_dir;
    for r in &road_ids {
        let dir = out.join(format!("logs/road-{r}"));
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    }
    let scenario_dir = out.join("scenarios");
    fs::create_dir_all(&scenario_dir).map_err(io_err(&scenario_dir))?;

    let config = MetricsConfig::default();
    let per_run: Vec<Result<Vec<MetricRow>, StudyError>> = plan
        .runs
        .par_iter()
        .map(|spec| {
            let log = runner.run(spec)?;
            let path = out.join(log_name(spec.subject, spec.condition, spec.road_id));
            let text = run_log_to_string(&log)
                .map_err(|source| StudyError::Log { path: path.display().to_string(), source })?;
            write_file(&path, &text)?;
            run_metrics(&log, spec.subject, &config)
                .map_err(|source| StudyError::Metric { path: path.display().to_string(), source })
        })
        .collect();
    let mut metrics = Vec::new();
    for r in per_run {
        metrics.extend(r?);
    }

    let metrics_path = out.join(METRICS_FILE);
    let mut buf = Vec::new();
    write_metrics(&metrics, &mut buf)
        .map_err(|source| StudyError::Table { path: metrics_path.display().to_string(), source })?;
    fs::write(&metrics_path, buf).map_err(io_err(&metrics_path))?;

    let roads = req
        .scenarios
        .iter()
        .map(|s| {
            let doc = s.to_document();
            let file = format!("scenarios/road-{}.json", s.road().id);
            write_file(&out.join(&file), &to_pretty_json(&doc))?;
            Ok(RoadEntry {
                road_id: s.road().id,
                name: s.road().name.clone(),
                scenario_file: file,
                scenario_hash: content_hash(&doc),
            })
        })
        .collect::<Result<Vec<_>, StudyError>>()?;
    write_file(&out.join(PARAMS_FILE), &to_pretty_json(&req.params))?;
    let scores = req.scores.clone().unwrap_or_default();
    if req.scores.is_some() {
        write_file(&out.join(SCORES_FILE), &scores_csv(&scores))?;
    }

    let report = build_report(&metrics, &scores, &req.alpha);
    write_file(&out.join(REPORT_TEXT), &render_text(&report))?;
    write_file(&out.join(REPORT_JSON), &render_json(&report))?;

    let manifest = StudyManifest {
        schema_version: MANIFEST_VERSION,
        tool_version: TOOL_VERSION.into(),
        seed: req.seed,
        n_subjects: req.n_subjects,
        conditions: req.conditions.clone(),
        roads,
        params_file: PARAMS_FILE.into(),
        params_hash: content_hash(&req.params),
        metrics_config: config,
        alpha: req.alpha.alpha(),
        scores_file: req.scores.as_ref().map(|_| SCORES_FILE.into()),
        metrics_file: METRICS_FILE.into(),
        runs: plan
            .runs
            .iter()
            .map(|s| RunEntry {
                subject: s.subject,
                condition: s.condition,
                road_id: s.road_id,
                seed: s.seed,
                traits: s.traits,
                log: log_name(s.subject, s.condition, s.road_id),
            })
            .collect(),
    };
    let wrapped = Manifest::Study(manifest.clone());
    wrapped.write(out).map_err(io_err(out))?;
    Ok(RunOutcome { manifest, metrics, report })
}

fn read_text(path: &Path) -> Result<String, StudyError> {
    fs::read_to_string(path).map_err(io_err(path))
}

/// Checks the stored parameters and scenarios against their manifest hashes.
pub fn verify_study(dir: &Path, m: &StudyManifest) -> Result<DriverParams, StudyError> {
    if m.schema_version != MANIFEST_VERSION {
        return Err(StudyError::Integrity(format!("unsupported manifest version {}", m.schema_version)));
    }
    let params_path = dir.join(&m.params_file);
    let params: DriverParams = parse_json(&read_text(&params_path)?, &params_path.display().to_string())?;
    let hash = content_hash(&params);
    if hash != m.params_hash {
        return Err(StudyError::Integrity(format!(
            "{} hashes to {hash}, manifest records {}",
            params_path.display(),
            m.params_hash
        )));
    }
    for road in &m.roads {
        let path = dir.join(&road.scenario_file);
        hashed_doc::<ScenarioDocument>(&path, &road.scenario_hash)?;
    }
    Ok(params)
}

fn check_log(entry: &RunEntry, log: &RunLog, path: &Path) -> Result<(), StudyError> {
    if log.seed != entry.seed || log.condition != entry.condition || log.road_id != entry.road_id {
        return Err(StudyError::Integrity(format!(
            "{}: header (seed {}, {}, road {}) does not match the manifest (seed {}, {}, road {})",
            path.display(),
            log.seed,
            log.condition,
            log.road_id,
            entry.seed,
            entry.condition,
            entry.road_id
        )));
    }
    Ok(())
}

/// Recomputes every metric from the logs listed in the manifest.
pub fn recompute_metrics(dir: &Path, m: &StudyManifest) -> Result<Vec<MetricRow>, StudyError> {
    let per_run: Vec<Result<Vec<MetricRow>, StudyError>> = m
        .runs
        .par_iter()
        .map(|entry| {
            let path = dir.join(&entry.log);
            let file = fs::File::open(&path).map_err(io_err(&path))?;
            let shown = path.display().to_string();
            let log =
                read_run_log(BufReader::new(file)).map_err(|source| StudyError::Log { path: shown.clone(), source })?;
            check_log(entry, &log, &path)?;
            run_metrics(&log, entry.subject, &m.metrics_config)
                .map_err(|source| StudyError::Metric { path: shown, source })
        })
        .collect();
    let mut rows = Vec::new();
    for r in per_run {
        rows.extend(r?);
    }
    Ok(rows)
}

pub fn study_report(dir: &Path, m: &StudyManifest) -> Result<StudyReport, StudyError> {
    verify_study(dir, m)?;
    let metrics = recompute_metrics(dir, m)?;
    let scores = match &m.scores_file {
        Some(f) => {
            let path = dir.join(f);
            let file = fs::File::open(&path).map_err(io_err(&path))?;
            read_scores(file).map_err(|source| StudyError::Table { path: path.display().to_string(), source })?
        }
        None => Vec::new(),
    };
    let alpha = SignificanceConfig::new(m.alpha)
        .ok_or_else(|| StudyError::Integrity(format!("alpha {} outside (0, 1)", m.alpha)))?;
    Ok(build_report(&metrics, &scores, &alpha))
}

fn hashed_doc<T: serde::de::DeserializeOwned + serde::Serialize>(path: &Path, expected: &str) -> Result<T, StudyError> {
    let doc: T = parse_json(&read_text(path)?, &path.display().to_string())?;
    if content_hash(&doc) != expected {
        return Err(StudyError::Integrity(format!("{} does not match its manifest hash", path.display())));
    }
    Ok(doc)
}

/// Rebuilds a recorded session from its directory and replays its log.
pub fn replay_session_dir(dir: &Path, m: &SessionManifest) -> Result<Replay, StudyError> {
    if m.schema_version != MANIFEST_VERSION {
        return Err(StudyError::Integrity(format!("unsupported manifest version {}", m.schema_version)));
    }
    let invalid =
        |path: &Path, msg: String| StudyError::Doc(DocError::Invalid { path: path.display().to_string(), msg });
    let scenario_path = dir.join(&m.scenario_file);
    let doc: ScenarioDocument = hashed_doc(&scenario_path, &m.scenario_hash)?;
    let scenario = load_scenario(&doc).map_err(|e| invalid(&scenario_path, e.to_string()))?;
    let layout_path = dir.join(&m.layout_file);
    let layout: LayoutDocument = hashed_doc(&layout_path, &m.layout_hash)?;
    let layout = load_layout(&layout).map_err(|e| invalid(&layout_path, e.to_string()))?;
    let key_map: KeyMap = hashed_doc(&dir.join(&m.key_map_file), &m.key_map_hash)?;
    let mut cfg = SessionConfig::new(scenario);
    cfg.layout = layout;
    cfg.key_map = key_map;
    cfg.heartbeat_ms = m.heartbeat_ms;
    cfg.recognizer = RecognizerConfig::new(m.dwell_frames, true)
        .ok_or_else(|| StudyError::Integrity("dwell_frames must be positive".into()))?;

    let log_path = dir.join(&m.log);
    let file = fs::File::open(&log_path).map_err(io_err(&log_path))?;
    let log = read_session_log(BufReader::new(file))
        .map_err(|source| StudyError::Log { path: log_path.display().to_string(), source })?;
    if log.road_id != m.road_id {
        return Err(StudyError::Integrity(format!(
            "{} records road {}, manifest says {}",
            log_path.display(),
            log.road_id,
            m.road_id
        )));
    }
    Ok(replay(&log, cfg))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Json,
    Csv,
}

/// Renders a report; CSV writes one file per measure into `csv_dir` and
/// returns the list of files written.
pub fn render_report(report: &StudyReport, format: ReportFormat, csv_dir: &Path) -> Result<String, StudyError> {
    match format {
        ReportFormat::Text => Ok(render_text(report)),
        ReportFormat::Json => Ok(render_json(report)),
        ReportFormat::Csv => {
            fs::create_dir_all(csv_dir).map_err(io_err(csv_dir))?;
            let mut listing = String::new();
            for (name, body) in render_csv(report) {
                let path = csv_dir.join(&name);
                write_file(&path, &body)?;
                listing.push_str(&path.display().to_string());
                listing.push('\n');
            }
            Ok(listing)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use onwheel_core::driver_sim::default_params;
    use onwheel_core::scenario::builtin_scenario;

    fn request(dir: &Path) -> RunRequest {
        RunRequest {
            scenarios: vec![builtin_scenario(1).unwrap()],
            conditions: Condition::ALL.to_vec(),
            n_subjects: 3,
            seed: 5,
            params: default_params(),
            alpha: SignificanceConfig::default(),
            scores: None,
            out_dir: dir.to_path_buf(),
        }
    }

    #[test]
    fn report_recomputes_run_time_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let outcome = run_study(&request(dir.path())).unwrap();
        assert_eq!(outcome.manifest.runs.len(), 9);
        let Manifest::Study(m) = Manifest::read(dir.path()).unwrap() else { panic!("kind") };
        assert_eq!(m, outcome.manifest);
        assert_eq!(recompute_metrics(dir.path(), &m).unwrap(), outcome.metrics);
        let again = study_report(dir.path(), &m).unwrap();
        assert_eq!(render_text(&again), fs::read_to_string(dir.path().join(REPORT_TEXT)).unwrap());
        assert_eq!(render_json(&again), fs::read_to_string(dir.path().join(REPORT_JSON)).unwrap());
    }

    #[test]
    fn tampering_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        run_study(&request(dir.path())).unwrap();
        let Manifest::Study(m) = Manifest::read(dir.path()).unwrap() else { panic!("kind") };

        let params = dir.path().join(PARAMS_FILE);
        let original = fs::read_to_string(&params).unwrap();
        fs::write(&params, original.replacen("\"utterance_s\": 2.0", "\"utterance_s\": 2.5", 1)).unwrap();
        assert!(matches!(study_report(dir.path(), &m), Err(StudyError::Integrity(_))));
        fs::write(&params, &original).unwrap();

        let log = dir.path().join(&m.runs[4].log);
        let text = fs::read_to_string(&log).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        lines[10] = "S 9 garbage";
        fs::write(&log, lines.join("\n")).unwrap();
        let err = study_report(dir.path(), &m).unwrap_err().to_string();
        assert!(err.contains("line 11"), "{err}");
    }

    #[test]
    fn single_subject_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut req = request(dir.path());
        req.n_subjects = 1;
        assert!(run_study(&req).is_err());
    }
}
