use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context};
use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use onwheel::docs::{read_key_map, read_layout, read_params, resolve_scenario, scenario_csv, to_pretty_json};
use onwheel::logfile::read_run_log;
use onwheel::manifest::Manifest;
use onwheel::protocol::{decode_outbound, Outbound, SummaryRow};
use onwheel::serve::{bind, serve, ServeConfig};
use onwheel::session::SessionConfig;
use onwheel::study::{
    render_report, replay_session_dir, run_study, study_report, ReportFormat, RunRequest, StudyError,
};
use onwheel::table::read_scores;
use onwheel_core::driver_sim::default_params;
use onwheel_core::gesture_input::KeyMap;
use onwheel_core::menu::MenuLayout;
use onwheel_core::metrics::{run_metrics, MetricsConfig};
use onwheel_core::recognizer::RecognizerConfig;
use onwheel_core::runlog::Condition;
use onwheel_core::stats::SignificanceConfig;

const DEFAULT_OUT: &str = "onwheel-out";

#[derive(Parser)]
#[command(name = "onwheel", version, about = "Finger-gesture HUD menu: simulated studies, reports and live sessions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a study and write logs, metrics, report and manifest.
    Run(RunArgs),
    /// Recompute the report of a run or session directory from its logs.
    Report(ReportArgs),
    /// Replay a session directory, or print the metrics of one run log.
    Replay(ReplayArgs),
    /// Serve live sessions over a websocket at /ws.
    Serve(ServeArgs),
    /// Write a scenario document or its task table.
    ExportScenario(ExportScenarioArgs),
    /// Write a menu layout with pip counts and colors.
    ExportLayout(ExportLayoutArgs),
    /// Write the default simulator parameters as an editable document.
    ExportParams(OutFile),
}

#[derive(Clone, Copy, ValueEnum)]
enum ConditionArg {
    Baseline,
    Tactile,
    Gesture,
    All,
}

impl ConditionArg {
    fn conditions(self) -> Vec<Condition> {
        match self {
            ConditionArg::Baseline => vec![Condition::Baseline],
            ConditionArg::Tactile => vec![Condition::Tactile],
            ConditionArg::Gesture => vec![Condition::Gesture],
            ConditionArg::All => Condition::ALL.to_vec(),
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Built-in road (1, 2 or 3); repeat for several roads.
    #[arg(long = "road", value_name = "ID")]
    roads: Vec<u32>,
    /// Scenario document; repeatable, combined with --road.
    #[arg(long = "scenario", value_name = "FILE")]
    scenarios: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "all")]
    condition: ConditionArg,
    /// Number of simulated subjects (at least 2).
    #[arg(long, default_value_t = 32)]
    subjects: u32,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Simulator parameter document; defaults to the calibrated parameters.
    #[arg(long, value_name = "FILE")]
    params: Option<PathBuf>,
    /// Paired ratings CSV (name,subject,a,b) tested with Wilcoxon signed-rank.
    #[arg(long, value_name = "FILE")]
    scores: Option<PathBuf>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Output directory.
    #[arg(long, env = "ONWHEEL_OUT", default_value = DEFAULT_OUT)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Text,
    Json,
    Csv,
}

#[derive(Args)]
struct ReportArgs {
    /// Run or session directory.
    #[arg(env = "ONWHEEL_OUT", default_value = DEFAULT_OUT)]
    dir: PathBuf,
    #[arg(long, value_enum, default_value = "text")]
    format: FormatArg,
    /// Destination file (text, json) or directory (csv); text and json go to stdout by default.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReplayArgs {
    /// Session directory or run log file.
    path: PathBuf,
    /// Print every menu state of the replayed session.
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value_t = 1)]
    road: u32,
    #[arg(long, value_name = "FILE")]
    scenario: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    layout: Option<PathBuf>,
    /// Key map document with ten `KeyboardEvent.code` names.
    #[arg(long, value_name = "FILE")]
    keys: Option<PathBuf>,
    /// Frames a finger count must be held before it counts.
    #[arg(long, default_value_t = 12)]
    dwell_frames: u32,
    #[arg(long, default_value_t = 100)]
    tick_ms: u64,
    #[arg(long, default_value_t = 1000.0)]
    heartbeat_ms: f64,
    /// Directory for session logs.
    #[arg(long, env = "ONWHEEL_OUT", default_value = DEFAULT_OUT)]
    out: PathBuf,
    /// Do not record sessions.
    #[arg(long)]
    no_record: bool,
}

#[derive(Args)]
struct OutFile {
    /// Destination file; stdout by default.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum DocFormat {
    Json,
    Csv,
}

#[derive(Args)]
struct ExportScenarioArgs {
    #[arg(long, default_value_t = 1)]
    road: u32,
    #[arg(long, value_enum, default_value = "json")]
    format: DocFormat,
    #[command(flatten)]
    out: OutFile,
}

#[derive(Args)]
struct ExportLayoutArgs {
    /// Layout document to validate and annotate; the built-in layout by default.
    #[arg(long, value_name = "FILE")]
    layout: Option<PathBuf>,
    #[command(flatten)]
    out: OutFile,
}

fn key_map_help(map: &KeyMap) -> String {
    let mut s = String::from("Default key map (hold keys to spread fingers, thumb first):\n");
    s.push_str(&format!("  left hand:  {}\n", map.left.join(" ")));
    s.push_str(&format!("  right hand: {}\n", map.right.join(" ")));
    s.push_str("Hotkeys: all ten keys toggles the interface, one finger on each hand returns to the top menu,\n");
    s.push_str("five right-hand fingers cancels the last change.");
    s
}

fn emit(text: &str, out: Option<&Path>) -> anyhow::Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("cannot write {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_run(a: RunArgs) -> anyhow::Result<()> {
    let mut scenarios = Vec::new();
    let roads = if a.roads.is_empty() && a.scenarios.is_empty() { vec![1] } else { a.roads };
    for r in roads {
        scenarios.push(resolve_scenario(r, None)?);
    }
    for path in &a.scenarios {
        scenarios.push(resolve_scenario(0, Some(path))?);
    }
    let params = match &a.params {
        Some(p) => read_params(p)?,
        None => default_params(),
    };
    let scores = match &a.scores {
        Some(p) => Some(
            read_scores(fs::File::open(p).with_context(|| format!("cannot open {}", p.display()))?)
                .with_context(|| p.display().to_string())?,
        ),
        None => None,
    };
    let Some(alpha) = SignificanceConfig::new(a.alpha) else {
        bail!("--alpha must lie strictly between 0 and 1");
    };
    fs::create_dir_all(&a.out).with_context(|| format!("cannot create output directory {}", a.out.display()))?;
    let req = RunRequest {
        scenarios,
        conditions: a.condition.conditions(),
        n_subjects: a.subjects,
        seed: a.seed,
        params,
        alpha,
        scores,
        out_dir: a.out.clone(),
    };
    let outcome = run_study(&req)?;
    print!("{}", onwheel::report::render_text(&outcome.report));
    eprintln!("wrote {} run logs and the report to {}", outcome.manifest.runs.len(), a.out.display());
    Ok(())
}

fn summary_text(rows: &[SummaryRow]) -> String {
    let mut s = String::from("Session summary\n");
    for r in rows {
        let task = r.task_id.map(|t| format!(" (task {t})")).unwrap_or_default();
        s.push_str(&format!("  {}{task}: {:.3} {}\n", r.metric, r.value, r.unit.symbol()));
    }
    s
}

fn cmd_report(a: ReportArgs) -> anyhow::Result<()> {
    match Manifest::read(&a.dir)? {
        Manifest::Study(m) => {
            let report = study_report(&a.dir, &m)?;
            let format = match a.format {
                FormatArg::Text => ReportFormat::Text,
                FormatArg::Json => ReportFormat::Json,
                FormatArg::Csv => ReportFormat::Csv,
            };
            if let ReportFormat::Csv = format {
                let dir = a.out.unwrap_or_else(|| a.dir.join("report-csv"));
                print!("{}", render_report(&report, format, &dir)?);
                Ok(())
            } else {
                emit(&render_report(&report, format, &a.dir)?, a.out.as_deref())
            }
        }
        Manifest::Session(m) => {
            let r = replay_session_dir(&a.dir, &m)?;
            if let Some(i) = r.first_mismatch {
                return Err(
                    StudyError::Integrity(format!("replay diverges from the recording at message {}", i + 1)).into()
                );
            }
            let rows = r.summary.unwrap_or_default();
            match a.format {
                FormatArg::Json => emit(&to_pretty_json(&rows), a.out.as_deref()),
                _ => emit(&summary_text(&rows), a.out.as_deref()),
            }
        }
    }
}

fn cmd_replay(a: ReplayArgs) -> anyhow::Result<()> {
    if a.path.is_dir() {
        let Manifest::Session(m) = Manifest::read(&a.path)? else {
            bail!("{} is a study directory; use `report` for it", a.path.display());
        };
        let r = replay_session_dir(&a.path, &m)?;
        if a.trace {
            for text in &r.outbound {
                if let Ok(Outbound::State { seq, t_ms, menu_focus, last_event, feedback, heartbeat: false, .. }) =
                    decode_outbound(text)
                {
                    let event = last_event.map(|e| format!("{e:?}")).unwrap_or_else(|| "-".into());
                    println!("{seq:>6} {t_ms:>12.1} ms  {:<14} {event:<36} {feedback:?}", menu_focus.name());
                }
            }
        }
        match r.first_mismatch {
            None => {
                println!("replay matches the recording ({} messages)", r.outbound.len());
                if let Some(rows) = &r.summary {
                    print!("{}", summary_text(rows));
                }
                Ok(())
            }
            Some(i) => {
                Err(StudyError::Integrity(format!("replay diverges from the recording at message {}", i + 1)).into())
            }
        }
    } else {
        let file = fs::File::open(&a.path).with_context(|| format!("cannot open {}", a.path.display()))?;
        let log = read_run_log(BufReader::new(file)).with_context(|| a.path.display().to_string())?;
        println!(
            "road {} {} seed {}: {} steps, {} tasks, {} hazards{}",
            log.road_id,
            log.condition,
            log.seed,
            log.drive.len(),
            log.tasks.len(),
            log.hazards.len(),
            if log.truncated { ", truncated" } else { "" }
        );
        for row in run_metrics(&log, 0, &MetricsConfig::default())? {
            println!("  {:<22} {:>12.4} {}", row.metric.name(), row.value, row.metric.unit().symbol());
        }
        Ok(())
    }
}

fn cmd_serve(a: ServeArgs) -> anyhow::Result<()> {
    let mut session = SessionConfig::new(resolve_scenario(a.road, a.scenario.as_deref())?);
    if let Some(p) = &a.layout {
        session.layout = read_layout(p)?;
    }
    if let Some(p) = &a.keys {
        session.key_map = read_key_map(p)?;
    }
    session.recognizer = RecognizerConfig::new(a.dwell_frames, true).context("--dwell-frames must be positive")?;
    if !(a.heartbeat_ms.is_finite() && a.heartbeat_ms > 0.0) {
        bail!("--heartbeat-ms must be positive");
    }
    session.heartbeat_ms = a.heartbeat_ms;
    if a.tick_ms == 0 {
        bail!("--tick-ms must be positive");
    }
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    let cfg = ServeConfig { session, out_dir: (!a.no_record).then_some(a.out), tick: Duration::from_millis(a.tick_ms) };
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let (listener, addr) = bind(a.port).await.with_context(|| format!("cannot listen on port {}", a.port))?;
        tracing::info!("listening on ws://{addr}/ws");
        serve(listener, cfg).await?;
        anyhow::Ok(())
    })
}

fn cmd_export_scenario(a: ExportScenarioArgs) -> anyhow::Result<()> {
    let s = resolve_scenario(a.road, None)?;
    let text = match a.format {
        DocFormat::Json => to_pretty_json(&s.to_document()),
        DocFormat::Csv => scenario_csv(&s),
    };
    emit(&text, a.out.out.as_deref())
}

fn cmd_export_layout(a: ExportLayoutArgs) -> anyhow::Result<()> {
    let layout = match &a.layout {
        Some(p) => read_layout(p)?,
        None => MenuLayout::default(),
    };
    emit(&to_pretty_json(&layout.to_document()), a.out.out.as_deref())
}

fn main() -> ExitCode {
    let mut cmd = Cli::command();
    cmd = cmd.mut_subcommand("serve", |c| c.after_help(key_map_help(&KeyMap::default())));
    let cli = match Cli::from_arg_matches(&cmd.get_matches()) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Report(a) => cmd_report(a),
        Command::Replay(a) => cmd_replay(a),
        Command::Serve(a) => cmd_serve(a),
        Command::ExportScenario(a) => cmd_export_scenario(a),
        Command::ExportLayout(a) => cmd_export_layout(a),
        Command::ExportParams(o) => emit(&to_pretty_json(&default_params()), o.out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if matches!(e.downcast_ref::<StudyError>(), Some(StudyError::Integrity(_))) {
                ExitCode::from(3)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
