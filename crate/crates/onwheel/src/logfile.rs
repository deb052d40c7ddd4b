//! Line-oriented run log format.
//!
//! ```text
//! #onwheel-run v1 seed=42 condition=tactile road=1 dt=0.016666666666666666 ref_speed=80 lane_width=3.5
//! S <k> <position> <speed> <lateral> <brake> <task> <focus> <gaze_x> <gaze_y> <aoi> <yaw> <pitch> <roll>
//! T <task> <trigger> <command_end> <done>
//! Z <hazard> <onset> <brake_onset> <recovered>
//! END truncated=0
//! ```
//!
//! `S` lines carry one simulation step each; the step time is `k * dt`.
//! `brake` is `0` or `1`; absent values (no active task, no brake onset) are
//! written as `-`. Floats use the shortest representation that parses back
//! to the same value, so a written log reads back bit-identical.

use std::io::{self, BufRead, Write};
use std::str::FromStr;

use onwheel_core::menu::MenuFocus;
use onwheel_core::runlog::{Aoi, Condition, DriveRow, GazeRow, HazardRecord, HeadRow, RunLog, TaskRecord};
use thiserror::Error;

pub const RUN_LOG_VERSION: u32 = 1;
const MAGIC: &str = "#onwheel-run";

#[derive(Debug, Error)]
pub enum LogError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("log ends without an END record")]
    MissingEnd,
    #[error("cannot write log: {0}")]
    Unwritable(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn parse_err(line: usize, msg: impl Into<String>) -> LogError {
    LogError::Parse { line, msg: msg.into() }
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(|| "-".to_string(), |v| v.to_string())
}

pub fn write_run_log<W: Write>(log: &RunLog, out: W) -> Result<(), LogError> {
    let n = log.drive.len();
    if log.gaze.len() != n || log.head.len() != n {
        return Err(LogError::Unwritable(format!(
            "drive, gaze and head traces differ in length ({n}, {}, {})",
            log.gaze.len(),
            log.head.len()
        )));
    }
    let mut w = io::BufWriter::new(out);
    writeln!(
        w,
        "{MAGIC} v{RUN_LOG_VERSION} seed={} condition={} road={} dt={} ref_speed={} lane_width={}",
        log.seed, log.condition, log.road_id, log.dt_s, log.ref_speed_kmh, log.lane_width_m
    )?;
    for (k, ((d, g), h)) in log.drive.iter().zip(&log.gaze).zip(&log.head).enumerate() {
        let t = k as f64 * log.dt_s;
        if d.t_s != t || g.t_s != t || h.t_s != t {
            return Err(LogError::Unwritable(format!("step {k} is not sampled at {t} s")));
        }
        writeln!(
            w,
            "S {k} {} {} {} {} {} {} {} {} {} {} {} {}",
            d.position_m,
            d.speed_kmh,
            d.lateral_offset_m,
            u8::from(d.brake),
            opt(d.active_task),
            d.menu_focus,
            g.x_px,
            g.y_px,
            g.aoi.name(),
            h.yaw_deg,
            h.pitch_deg,
            h.roll_deg
        )?;
    }
    for t in &log.tasks {
        writeln!(w, "T {} {} {} {}", t.task_id, t.trigger_t, t.command_end_t, t.done_t)?;
    }
    for h in &log.hazards {
        writeln!(w, "Z {} {} {} {}", h.hazard_id, h.onset_t, opt(h.brake_onset_t), opt(h.recovered_t))?;
    }
    writeln!(w, "END truncated={}", u8::from(log.truncated))?;
    w.flush()?;
    Ok(())
}

pub fn run_log_to_string(log: &RunLog) -> Result<String, LogError> {
    let mut buf = Vec::new();
    write_run_log(log, &mut buf)?;
    Ok(String::from_utf8(buf).expect("log output is ASCII"))
}

struct Fields<'a> {
    line: usize,
    it: std::str::SplitAsciiWhitespace<'a>,
}

impl<'a> Fields<'a> {
    fn next_str(&mut self, what: &str) -> Result<&'a str, LogError> {
        self.it.next().ok_or_else(|| parse_err(self.line, format!("missing field `{what}`")))
    }

    fn parse<T: FromStr>(&mut self, what: &str) -> Result<T, LogError> {
        let s = self.next_str(what)?;
        s.parse().map_err(|_| parse_err(self.line, format!("field `{what}`: cannot parse `{s}`")))
    }

    fn float(&mut self, what: &str) -> Result<f64, LogError> {
        let v: f64 = self.parse(what)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(parse_err(self.line, format!("field `{what}` is not finite")))
        }
    }

    fn opt_parse<T: FromStr>(&mut self, what: &str) -> Result<Option<T>, LogError> {
        if self.it.clone().next() == Some("-") {
            self.it.next();
            Ok(None)
        } else {
            self.parse(what).map(Some)
        }
    }

    fn finish(mut self) -> Result<(), LogError> {
        match self.it.next() {
            None => Ok(()),
            Some(extra) => Err(parse_err(self.line, format!("unexpected trailing field `{extra}`"))),
        }
    }
}

/// Parses `key=value` header fields in any order.
fn header_value<'a>(fields: &[&'a str], key: &str, line: usize) -> Result<&'a str, LogError> {
    fields
        .iter()
        .find_map(|f| f.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
        .ok_or_else(|| parse_err(line, format!("header lacks `{key}=`")))
}

fn header_parse<T: FromStr>(fields: &[&str], key: &str, line: usize) -> Result<T, LogError> {
    let s = header_value(fields, key, line)?;
    s.parse().map_err(|_| parse_err(line, format!("header `{key}`: cannot parse `{s}`")))
}

pub fn read_run_log<R: BufRead>(input: R) -> Result<RunLog, LogError> {
    let mut lines = input.lines();
    let first = lines.next().transpose()?.ok_or_else(|| parse_err(1, "empty log"))?;
    let head: Vec<&str> = first.split_ascii_whitespace().collect();
    if head.first() != Some(&MAGIC) {
        return Err(parse_err(1, format!("not a run log (expected `{MAGIC}` header)")));
    }
    let version = head.get(1).and_then(|v| v.strip_prefix('v')).and_then(|v| v.parse::<u32>().ok());
    if version != Some(RUN_LOG_VERSION) {
        return Err(parse_err(1, format!("unsupported log version `{}`", head.get(1).unwrap_or(&""))));
    }
    let condition: Condition =
        header_value(&head, "condition", 1)?.parse().map_err(|e| parse_err(1, format!("header `condition`: {e}")))?;
    let dt: f64 = header_parse(&head, "dt", 1)?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(parse_err(1, "header `dt` must be positive"));
    }
    let mut log = RunLog {
        seed: header_parse(&head, "seed", 1)?,
        condition,
        road_id: header_parse(&head, "road", 1)?,
        dt_s: dt,
        ref_speed_kmh: header_parse(&head, "ref_speed", 1)?,
        lane_width_m: header_parse(&head, "lane_width", 1)?,
        drive: Vec::new(),
        gaze: Vec::new(),
        head: Vec::new(),
        tasks: Vec::new(),
        hazards: Vec::new(),
        truncated: false,
    };

    let mut ended = false;
    for (i, text) in lines.enumerate() {
        let line = i + 2;
        let text = text?;
        if ended {
            if text.trim().is_empty() {
                continue;
            }
            return Err(parse_err(line, "record after END"));
        }
        let mut it = text.split_ascii_whitespace();
        let Some(kind) = it.next() else {
            return Err(parse_err(line, "blank line"));
        };
        let mut f = Fields { line, it };
        match kind {
            "S" => {
                let k: usize = f.parse("k")?;
                if k != log.drive.len() {
                    return Err(parse_err(line, format!("step {k} out of sequence, expected {}", log.drive.len())));
                }
                let t = k as f64 * dt;
                log.drive.push(DriveRow {
                    t_s: t,
                    position_m: f.float("position")?,
                    speed_kmh: f.float("speed")?,
                    lateral_offset_m: f.float("lateral")?,
                    brake: match f.next_str("brake")? {
                        "0" => false,
                        "1" => true,
                        other => return Err(parse_err(line, format!("field `brake`: expected 0 or 1, got `{other}`"))),
                    },
                    active_task: f.opt_parse("task")?,
                    menu_focus: {
                        let s = f.next_str("focus")?;
                        MenuFocus::from_str(s).map_err(|e| parse_err(line, format!("field `focus`: {e}")))?
                    },
                });
                let (x, y) = (f.float("gaze_x")?, f.float("gaze_y")?);
                let aoi = f.next_str("aoi")?;
                let aoi =
                    Aoi::from_str(aoi).map_err(|_| parse_err(line, format!("field `aoi`: unknown area `{aoi}`")))?;
                log.gaze.push(GazeRow { t_s: t, x_px: x, y_px: y, aoi });
                log.head.push(HeadRow {
                    t_s: t,
                    yaw_deg: f.float("yaw")?,
                    pitch_deg: f.float("pitch")?,
                    roll_deg: f.float("roll")?,
                });
            }
            "T" => log.tasks.push(TaskRecord {
                task_id: f.parse("task")?,
                trigger_t: f.float("trigger")?,
                command_end_t: f.float("command_end")?,
                done_t: f.float("done")?,
            }),
            "Z" => log.hazards.push(HazardRecord {
                hazard_id: f.parse("hazard")?,
                onset_t: f.float("onset")?,
                brake_onset_t: f.opt_parse("brake_onset")?,
                recovered_t: f.opt_parse("recovered")?,
            }),
            "END" => {
                log.truncated = match f.next_str("truncated")? {
                    "truncated=0" => false,
                    "truncated=1" => true,
                    other => {
                        return Err(parse_err(line, format!("expected truncated=0 or truncated=1, got `{other}`")))
                    }
                };
                ended = true;
            }
            other => return Err(parse_err(line, format!("unknown record type `{other}`"))),
        }
        f.finish()?;
    }
    if !ended {
        return Err(LogError::MissingEnd);
    }
    Ok(log)
}

pub fn parse_run_log(text: &str) -> Result<RunLog, LogError> {
    read_run_log(text.as_bytes())
}
