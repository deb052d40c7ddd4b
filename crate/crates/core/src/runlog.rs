//! Time-series records produced by a drive, simulated or live.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::menu::MenuFocus;
use crate::tasks::Interface;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Baseline,
    Tactile,
    Gesture,
}

impl Condition {
    pub const ALL: [Condition; 3] = [Condition::Baseline, Condition::Tactile, Condition::Gesture];

    pub fn name(self) -> &'static str {
        match self {
            Condition::Baseline => "baseline",
            Condition::Tactile => "tactile",
            Condition::Gesture => "gesture",
        }
    }

    /// Interface used for secondary tasks; `None` when tasks are skipped.
    pub fn interface(self) -> Option<Interface> {
        match self {
            Condition::Baseline => None,
            Condition::Tactile => Some(Interface::Tactile),
            Condition::Gesture => Some(Interface::Gesture),
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UnknownCondition;

impl fmt::Display for UnknownCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("expected baseline, tactile or gesture")
    }
}

impl FromStr for Condition {
    type Err = UnknownCondition;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Condition::ALL.into_iter().find(|c| c.name() == s).ok_or(UnknownCondition)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aoi {
    Forward,
    Console,
    Other,
}

impl Aoi {
    pub const ALL: [Aoi; 3] = [Aoi::Forward, Aoi::Console, Aoi::Other];

    pub fn name(self) -> &'static str {
        match self {
            Aoi::Forward => "forward",
            Aoi::Console => "console",
            Aoi::Other => "other",
        }
    }
}

impl FromStr for Aoi {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Aoi::ALL.into_iter().find(|a| a.name() == s).ok_or(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveRow {
    pub t_s: f64,
    pub position_m: f64,
    pub speed_kmh: f64,
    pub lateral_offset_m: f64,
    pub brake: bool,
    pub active_task: Option<u16>,
    pub menu_focus: MenuFocus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GazeRow {
    pub t_s: f64,
    pub x_px: f64,
    pub y_px: f64,
    pub aoi: Aoi,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadRow {
    pub t_s: f64,
    pub yaw_deg: f64,
    pub pitch_deg: f64,
    pub roll_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub task_id: u16,
    pub trigger_t: f64,
    pub command_end_t: f64,
    pub done_t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HazardRecord {
    pub hazard_id: u16,
    pub onset_t: f64,
    /// `None` when the run ended before the brake was applied.
    pub brake_onset_t: Option<f64>,
    /// End of the brake dip, when speed is back at the reference.
    pub recovered_t: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub seed: u64,
    pub condition: Condition,
    pub road_id: u32,
    pub dt_s: f64,
    pub ref_speed_kmh: f64,
    pub lane_width_m: f64,
    pub drive: Vec<DriveRow>,
    pub gaze: Vec<GazeRow>,
    pub head: Vec<HeadRow>,
    pub tasks: Vec<TaskRecord>,
    pub hazards: Vec<HazardRecord>,
    /// Set when an event was still pending at the end of the road.
    pub truncated: bool,
}

impl RunLog {
    pub fn duration_s(&self) -> f64 {
        self.drive.len() as f64 * self.dt_s
    }

    /// Intervals during which the driver was reacting to a hazard.
    pub fn hazard_windows(&self) -> Vec<Window> {
        let end = self.duration_s();
        self.hazards.iter().map(|h| Window::new(h.onset_t, h.recovered_t.unwrap_or(end))).collect()
    }

    /// Task execution intervals, from the end of the spoken command to done.
    pub fn task_windows(&self) -> Vec<Window> {
        self.tasks.iter().map(|t| Window::new(t.command_end_t, t.done_t)).collect()
    }
}

/// Half-open time interval `[start, end)` in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub start: f64,
    pub end: f64,
}

impl Window {
    pub const fn new(start: f64, end: f64) -> Self {
        Self { start, end }
    }

    pub const ALL: Window = Window { start: f64::NEG_INFINITY, end: f64::INFINITY };

    pub fn contains(&self, t: f64) -> bool {
        t >= self.start && t < self.end
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

/// Row selection: inside any of `include` and outside all of `exclude`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Selection {
    pub include: Vec<Window>,
    pub exclude: Vec<Window>,
}

impl Selection {
    pub fn whole_run() -> Self {
        Self { include: alloc::vec![Window::ALL], exclude: Vec::new() }
    }

    pub fn of(include: Vec<Window>) -> Self {
        Self { include, exclude: Vec::new() }
    }

    pub fn excluding(mut self, exclude: Vec<Window>) -> Self {
        self.exclude.extend(exclude);
        self
    }

    pub fn selects(&self, t: f64) -> bool {
        self.include.iter().any(|w| w.contains(t)) && !self.exclude.iter().any(|w| w.contains(t))
    }
}
