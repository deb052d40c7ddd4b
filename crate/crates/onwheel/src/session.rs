//! One live HUD session: input frames in, menu state and task prompts out.
//!
//! A [`Session`] is a deterministic function of the timed inbound messages
//! and clock ticks it receives, which is what makes session logs replayable.

use std::io::{self, BufRead, Write};

use onwheel_core::gesture_input::{hand_pose, BendSample, GloveConfig, Hand, KeyMap};
use onwheel_core::menu::{apply_gesture, MenuLayout, SystemState, TaskGoal};
use onwheel_core::metrics::{lateral_rmse, speed_rmse, Unit};
use onwheel_core::recognizer::{Gesture, RecognizerConfig, RecognizerState};
use onwheel_core::runlog::{DriveRow, Selection};
use onwheel_core::scenario::Scenario;
use onwheel_core::tasks::gesture_goal;

use crate::logfile::LogError;
use crate::protocol::{
    decode, encode, DecodeError, DriveInput, Inbound, Outbound, RoadInfo, SummaryRow, PROTOCOL_VERSION,
};

#[derive(Debug, Clone)]
pub struct SessionConfig {
    pub scenario: Scenario,
    pub layout: MenuLayout,
    pub key_map: KeyMap,
    pub glove: GloveConfig,
    pub recognizer: RecognizerConfig,
    /// Quiet period after which an unchanged state is re-sent.
    pub heartbeat_ms: f64,
}

impl SessionConfig {
    pub fn new(scenario: Scenario) -> Self {
        Self {
            scenario,
            layout: MenuLayout::default(),
            key_map: KeyMap::default(),
            glove: GloveConfig::default(),
            recognizer: RecognizerConfig::default(),
            heartbeat_ms: 1000.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Open,
    /// Summary sent; inbound frames are answered with errors.
    Ended,
    /// Refused after a protocol version mismatch.
    Closed,
}

#[derive(Debug, Clone)]
struct ActiveTask {
    task_id: u16,
    prompt_ms: f64,
    goal: TaskGoal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskResult {
    pub task_id: u16,
    /// `None` when the next prompt arrived first or the session ended.
    pub elapsed_s: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Session {
    id: u64,
    cfg: SessionConfig,
    recognizer: RecognizerState,
    state: SystemState,
    last_event: Option<Gesture>,
    seq: u64,
    clock_ms: f64,
    last_out_ms: f64,
    last_frame_ms: Option<f64>,
    position_m: f64,
    speed_kmh: f64,
    drive: Vec<DriveRow>,
    next_task: usize,
    active: Option<ActiveTask>,
    results: Vec<TaskResult>,
    gestures: u32,
    phase: Phase,
}

impl Session {
    pub fn new(id: u64, cfg: SessionConfig) -> Self {
        let speed_kmh = cfg.scenario.road().ref_speed_kmh;
        Self {
            id,
            cfg,
            recognizer: RecognizerState::new(),
            state: SystemState::default(),
            last_event: None,
            seq: 0,
            clock_ms: 0.0,
            last_out_ms: 0.0,
            last_frame_ms: None,
            position_m: 0.0,
            speed_kmh,
            drive: Vec::new(),
            next_task: 0,
            active: None,
            results: Vec::new(),
            gestures: 0,
            phase: Phase::Open,
        }
    }

    pub fn state(&self) -> &SystemState {
        &self.state
    }

    pub fn results(&self) -> &[TaskResult] {
        &self.results
    }

    pub fn is_closed(&self) -> bool {
        self.phase == Phase::Closed
    }

    pub fn is_ended(&self) -> bool {
        self.phase != Phase::Open
    }

    /// Greeting and initial state.
    pub fn open(&mut self) -> Vec<Outbound> {
        let road = self.cfg.scenario.road();
        let mut out = vec![Outbound::Hello {
            session: self.id,
            road: RoadInfo {
                road_id: road.id,
                name: road.name.clone(),
                length_m: road.length_m,
                ref_speed_kmh: road.ref_speed_kmh,
                lane_width_m: road.lane_width_m,
            },
            layout: self.cfg.layout.to_document(),
            key_map: self.cfg.key_map.clone(),
            dwell_frames: self.cfg.recognizer.dwell_frames(),
            heartbeat_ms: self.cfg.heartbeat_ms,
        }];
        out.push(self.state_msg(Vec::new(), false));
        self.advance(0.0, &mut out);
        out
    }

    fn state_msg(&mut self, feedback: Vec<onwheel_core::menu::FeedbackEvent>, heartbeat: bool) -> Outbound {
        self.seq += 1;
        self.last_out_ms = self.clock_ms;
        Outbound::State {
            seq: self.seq,
            t_ms: self.clock_ms,
            menu_focus: self.state.menu,
            devices: self.state.devices,
            last_event: self.last_event,
            feedback,
            active_task: self.active.as_ref().map(|a| a.task_id),
            position_m: self.position_m,
            heartbeat,
        }
    }

    fn error(message: impl Into<String>) -> Outbound {
        Outbound::Error { message: message.into(), fatal: false }
    }

    /// Moves the session clock to `now_ms` and issues the prompts of tasks
    /// whose location has been passed.
    fn advance(&mut self, now_ms: f64, out: &mut Vec<Outbound>) {
        let now_ms = now_ms.max(self.clock_ms);
        let v = self.speed_kmh / 3.6;
        let start_ms = self.clock_ms;
        let start_pos = self.position_m;
        self.position_m += v * (now_ms - start_ms) / 1000.0;
        self.clock_ms = now_ms;
        while let Some(task) = self.cfg.scenario.tasks().get(self.next_task).copied() {
            if task.location_m > self.position_m {
                break;
            }
            self.next_task += 1;
            let at_ms = if v > 0.0 && task.location_m > start_pos {
                (start_ms + (task.location_m - start_pos) / v * 1000.0).min(now_ms)
            } else {
                start_ms
            };
            if let Some(prev) = self.active.take() {
                self.results.push(TaskResult { task_id: prev.task_id, elapsed_s: None });
            }
            out.push(Outbound::Task { task_id: task.index, prompt: task.prompt(), t_ms: at_ms });
            match gesture_goal(&task, &self.state) {
                Ok(goal) if goal.is_satisfied(&self.state) => {
                    self.results.push(TaskResult { task_id: task.index, elapsed_s: Some(0.0) });
                }
                Ok(goal) => self.active = Some(ActiveTask { task_id: task.index, prompt_ms: at_ms, goal }),
                Err(e) => {
                    out.push(Self::error(format!("{e}; task skipped")));
                    self.results.push(TaskResult { task_id: task.index, elapsed_s: None });
                }
            }
            let msg = self.state_msg(Vec::new(), false);
            out.push(msg);
        }
    }

    fn frame(
        &mut self,
        left: [u8; 5],
        right: [u8; 5],
        t_ms: f64,
        drive: Option<DriveInput>,
    ) -> Result<Vec<Outbound>, String> {
        if !t_ms.is_finite() {
            return Err(format!("frame time {t_ms} is not finite"));
        }
        if let Some(prev) = self.last_frame_ms {
            if t_ms <= prev {
                return Err(format!("frame time {t_ms} ms does not follow {prev} ms"));
            }
        }
        let l = BendSample::new(Hand::Left, left, t_ms).map_err(|e| format!("left hand: {e}"))?;
        let r = BendSample::new(Hand::Right, right, t_ms).map_err(|e| format!("right hand: {e}"))?;
        if let Some(d) = drive {
            if !(d.speed_kmh.is_finite() && d.speed_kmh >= 0.0 && d.lateral_offset_m.is_finite()) {
                return Err("drive values must be finite and speed non-negative".into());
            }
        }
        let lp = hand_pose(&l, &self.cfg.glove).map_err(|e| e.to_string())?;
        let rp = hand_pose(&r, &self.cfg.glove).map_err(|e| e.to_string())?;
        self.last_frame_ms = Some(t_ms);

        let mut out = Vec::new();
        if let Some(d) = drive {
            self.speed_kmh = d.speed_kmh;
            self.drive.push(DriveRow {
                t_s: self.clock_ms / 1000.0,
                position_m: self.position_m,
                speed_kmh: d.speed_kmh,
                lateral_offset_m: d.lateral_offset_m,
                brake: false,
                active_task: self.active.as_ref().map(|a| a.task_id),
                menu_focus: self.state.menu,
            });
        }
        let (rec, event) = self.recognizer.feed(&lp, &rp, t_ms, &self.cfg.recognizer);
        self.recognizer = rec;
        if let Some(event) = event {
            let (next, feedback) = apply_gesture(&self.state, event.gesture, &self.cfg.layout);
            self.state = next;
            self.last_event = Some(event.gesture);
            self.gestures += 1;
            if self.active.as_ref().is_some_and(|a| a.goal.is_satisfied(&self.state)) {
                let a = self.active.take().expect("checked above");
                let elapsed = (self.clock_ms - a.prompt_ms) / 1000.0;
                self.results.push(TaskResult { task_id: a.task_id, elapsed_s: Some(elapsed) });
            }
            out.push(self.state_msg(feedback, false));
        }
        Ok(out)
    }

    /// Processes one inbound frame received at `now_ms` on the session clock.
    pub fn handle(&mut self, now_ms: f64, text: &str) -> Vec<Outbound> {
        match self.phase {
            Phase::Closed => return Vec::new(),
            Phase::Ended => return vec![Self::error("session has ended")],
            Phase::Open => {}
        }
        let mut out = Vec::new();
        self.advance(now_ms, &mut out);
        let msg = match decode(text) {
            Ok(msg) => msg,
            Err(DecodeError::Version(reason)) => {
                self.phase = Phase::Closed;
                out.push(Outbound::Error { message: reason, fatal: true });
                return out;
            }
            Err(DecodeError::Malformed(reason)) => {
                out.push(Self::error(reason));
                return out;
            }
        };
        let result = match msg {
            Inbound::Fingers { left, right, t_ms, drive } => self.frame(left, right, t_ms, drive),
            Inbound::Keys { pressed, t_ms, drive } => {
                let (l, r) = self.cfg.key_map.frame(&pressed, t_ms);
                self.frame(l.bends, r.bends, t_ms, drive)
            }
            Inbound::End => Ok(self.finish()),
        };
        match result {
            Ok(msgs) => out.extend(msgs),
            Err(reason) => out.push(Self::error(reason)),
        }
        out
    }

    /// Clock tick: prompts, heartbeat, and the summary once the road is done.
    pub fn tick(&mut self, now_ms: f64) -> Vec<Outbound> {
        if self.phase != Phase::Open {
            return Vec::new();
        }
        let mut out = Vec::new();
        self.advance(now_ms, &mut out);
        let tasks_done = self.next_task == self.cfg.scenario.tasks().len() && self.active.is_none();
        if tasks_done && self.position_m >= self.cfg.scenario.road().length_m {
            out.extend(self.finish());
        } else if self.clock_ms - self.last_out_ms >= self.cfg.heartbeat_ms {
            out.push(self.state_msg(Vec::new(), true));
        }
        out
    }

    /// The connection went away; the summary is produced for the log only.
    pub fn disconnect(&mut self, now_ms: f64) -> Vec<Outbound> {
        if self.phase != Phase::Open {
            return Vec::new();
        }
        let mut out = Vec::new();
        self.advance(now_ms, &mut out);
        out.extend(self.finish());
        out
    }

    fn finish(&mut self) -> Vec<Outbound> {
        if let Some(a) = self.active.take() {
            self.results.push(TaskResult { task_id: a.task_id, elapsed_s: None });
        }
        self.phase = Phase::Ended;
        vec![Outbound::Summary { rows: self.summary_rows() }]
    }

    pub fn summary_rows(&self) -> Vec<SummaryRow> {
        let mut rows: Vec<SummaryRow> = self
            .results
            .iter()
            .filter_map(|r| {
                r.elapsed_s.map(|value| SummaryRow {
                    metric: "task_completion_time".into(),
                    task_id: Some(r.task_id),
                    value,
                    unit: Unit::S,
                })
            })
            .collect();
        let all = Selection::whole_run();
        let ref_speed = self.cfg.scenario.road().ref_speed_kmh;
        if let Ok(v) = speed_rmse(&self.drive, ref_speed, &all) {
            rows.push(SummaryRow { metric: "speed_rmse".into(), task_id: None, value: v, unit: Unit::Kmh });
        }
        if let Ok(v) = lateral_rmse(&self.drive, &all) {
            rows.push(SummaryRow { metric: "lateral_rmse".into(), task_id: None, value: v, unit: Unit::M });
        }
        rows
    }
}

pub const SESSION_LOG_VERSION: u32 = 1;
const MAGIC: &str = "#onwheel-session";

/// Append-only session log.
///
/// ```text
/// #onwheel-session v1 seed=0 session=1 protocol=1 road=1
/// O <outbound message>
/// I <t_ms> <inbound frame as a JSON string>
/// K <t_ms>
/// X <t_ms>
/// ```
///
/// `I` is an inbound frame, `K` a clock tick and `X` a disconnect; each is
/// followed by the `O` lines it produced.
pub struct SessionRecorder<W: Write> {
    out: W,
}

impl<W: Write> SessionRecorder<W> {
    pub fn new(mut out: W, session: u64, road_id: u32) -> io::Result<Self> {
        writeln!(
            out,
            "{MAGIC} v{SESSION_LOG_VERSION} seed=0 session={session} protocol={PROTOCOL_VERSION} road={road_id}"
        )?;
        out.flush()?;
        Ok(Self { out })
    }

    pub fn inbound(&mut self, t_ms: f64, raw: &str) -> io::Result<()> {
        writeln!(self.out, "I {t_ms} {}", serde_json::to_string(raw).expect("strings serialize"))
    }

    pub fn tick(&mut self, t_ms: f64) -> io::Result<()> {
        writeln!(self.out, "K {t_ms}")
    }

    pub fn disconnect(&mut self, t_ms: f64) -> io::Result<()> {
        writeln!(self.out, "X {t_ms}")
    }

    pub fn outbound(&mut self, msgs: &[Outbound]) -> io::Result<()> {
        for m in msgs {
            writeln!(self.out, "O {}", encode(m))?;
        }
        self.out.flush()
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SessionEvent {
    Inbound { t_ms: f64, raw: String },
    Tick { t_ms: f64 },
    Disconnect { t_ms: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionLog {
    pub session: u64,
    pub road_id: u32,
    pub events: Vec<SessionEvent>,
    /// Every recorded outbound message, in order.
    pub outbound: Vec<String>,
}

fn perr(line: usize, msg: impl Into<String>) -> LogError {
    LogError::Parse { line, msg: msg.into() }
}

pub fn read_session_log<R: BufRead>(input: R) -> Result<SessionLog, LogError> {
    let mut lines = input.lines();
    let first = lines.next().transpose()?.ok_or_else(|| perr(1, "empty log"))?;
    let head: Vec<&str> = first.split_ascii_whitespace().collect();
    if head.first() != Some(&MAGIC) || head.get(1) != Some(&format!("v{SESSION_LOG_VERSION}").as_str()) {
        return Err(perr(1, format!("not a version {SESSION_LOG_VERSION} session log")));
    }
    let field = |key: &str| -> Result<u64, LogError> {
        head.iter()
            .find_map(|f| f.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| perr(1, format!("header lacks a numeric `{key}=`")))
    };
    if field("protocol")? != PROTOCOL_VERSION as u64 {
        return Err(perr(1, "recorded with another protocol version"));
    }
    let mut log = SessionLog {
        session: field("session")?,
        road_id: u32::try_from(field("road")?).map_err(|_| perr(1, "road out of range"))?,
        events: Vec::new(),
        outbound: Vec::new(),
    };
    for (i, text) in lines.enumerate() {
        let line = i + 2;
        let text = text?;
        let (kind, rest) = text.split_once(' ').unwrap_or((text.as_str(), ""));
        let time = |s: &str| -> Result<f64, LogError> {
            s.parse::<f64>().ok().filter(|t| t.is_finite()).ok_or_else(|| perr(line, format!("bad time `{s}`")))
        };
        match kind {
            "O" => log.outbound.push(rest.to_string()),
            "I" => {
                let (t, raw) =
                    rest.split_once(' ').ok_or_else(|| perr(line, "inbound record needs a time and a frame"))?;
                let raw: String =
                    serde_json::from_str(raw).map_err(|e| perr(line, format!("frame is not a JSON string: {e}")))?;
                log.events.push(SessionEvent::Inbound { t_ms: time(t)?, raw });
            }
            "K" => log.events.push(SessionEvent::Tick { t_ms: time(rest)? }),
            "X" => log.events.push(SessionEvent::Disconnect { t_ms: time(rest)? }),
            other => return Err(perr(line, format!("unknown record type `{other}`"))),
        }
    }
    Ok(log)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Replay {
    /// Messages the replayed session produced, encoded.
    pub outbound: Vec<String>,
    /// Index of the first message differing from the recording, if any.
    pub first_mismatch: Option<usize>,
    pub summary: Option<Vec<SummaryRow>>,
    pub results: Vec<TaskResult>,
}

impl Replay {
    pub fn matches(&self) -> bool {
        self.first_mismatch.is_none()
    }
}

/// Feeds the recorded events to a fresh session and compares its output
/// with the recording.
pub fn replay(log: &SessionLog, cfg: SessionConfig) -> Replay {
    let mut session = Session::new(log.session, cfg);
    let mut produced = session.open();
    for e in &log.events {
        match e {
            SessionEvent::Inbound { t_ms, raw } => produced.extend(session.handle(*t_ms, raw)),
            SessionEvent::Tick { t_ms } => produced.extend(session.tick(*t_ms)),
            SessionEvent::Disconnect { t_ms } => produced.extend(session.disconnect(*t_ms)),
        }
    }
    let summary = produced.iter().rev().find_map(|m| match m {
        Outbound::Summary { rows } => Some(rows.clone()),
        _ => None,
    });
    let outbound: Vec<String> = produced.iter().map(encode).collect();
    let first_mismatch = (0..outbound.len().max(log.outbound.len())).find(|&i| outbound.get(i) != log.outbound.get(i));
    Replay { outbound, first_mismatch, summary, results: session.results().to_vec() }
}
