//! Experimental roads and their secondary-task schedules.

mod tables;

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::menu::{Device, Mp3Mode, Outlet};

/// Distance before a hazard at which it becomes visible.
pub const DEFAULT_SIGHT_DISTANCE_M: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoadCondition {
    Normal,
    Accident,
    SharpCurve,
    CutIn,
    Tunnel,
    RoadWork,
}

impl RoadCondition {
    pub fn is_hazard(self) -> bool {
        self != RoadCondition::Normal
    }

    pub const fn name(self) -> &'static str {
        match self {
            RoadCondition::Normal => "normal",
            RoadCondition::Accident => "accident",
            RoadCondition::SharpCurve => "sharp_curve",
            RoadCondition::CutIn => "cut_in",
            RoadCondition::Tunnel => "tunnel",
            RoadCondition::RoadWork => "road_work",
        }
    }
}

/// Which function of the device a task touches. Channel, mode and outlet
/// tasks carry their target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    Turn,
    Volume,
    Airflow,
    Channel(u8),
    Mode(Mp3Mode),
    Outlet(Outlet),
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Feature::Turn => f.write_str("Turn"),
            Feature::Volume => f.write_str("Volume"),
            Feature::Airflow => f.write_str("Airflow"),
            Feature::Channel(i) => write!(f, "CH{i}"),
            Feature::Mode(m) => write!(f, "{}", m.name()),
            Feature::Outlet(o) => write!(f, "{}", o.name()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Control {
    On,
    Off,
    Up,
    Down,
    Select,
}

impl Control {
    pub const fn name(self) -> &'static str {
        match self {
            Control::On => "On",
            Control::Off => "Off",
            Control::Up => "Up",
            Control::Down => "Down",
            Control::Select => "Select",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub index: u16,
    pub location_m: f64,
    pub condition: RoadCondition,
    pub device: Device,
    pub feature: Feature,
    pub control: Control,
    pub levels: u8,
}

impl TaskSpec {
    /// Spoken command, e.g. "radio volume up 2".
    pub fn prompt(&self) -> String {
        let mut s = alloc::format!("{} {} {}", self.device.name(), self.feature, self.control.name());
        if self.levels > 1 {
            s.push_str(&alloc::format!(" {}", self.levels));
        }
        s.to_lowercase()
    }

    fn check(&self, row: usize, road_length_m: f64) -> Result<(), ScenarioError> {
        let bad = |reason: String| Err(ScenarioError::Task { row, reason });
        if !(self.location_m.is_finite() && self.location_m >= 0.0) {
            return bad(alloc::format!("location {} m is negative or not finite", self.location_m));
        }
        if self.location_m >= road_length_m {
            return bad(alloc::format!("location {} m is beyond the road length {} m", self.location_m, road_length_m));
        }
        if self.levels == 0 {
            return bad("levels must be at least 1".into());
        }
        let stepped = matches!(self.control, Control::Up | Control::Down);
        if self.levels > 1 && !stepped {
            return bad(alloc::format!("levels {} only apply to up/down tasks", self.levels));
        }
        let control_ok = match self.feature {
            Feature::Turn => matches!(self.control, Control::On | Control::Off),
            Feature::Volume | Feature::Airflow => stepped,
            Feature::Channel(_) | Feature::Mode(_) | Feature::Outlet(_) => self.control == Control::Select,
        };
        if !control_ok {
            return bad(alloc::format!("control {} does not apply to feature {}", self.control.name(), self.feature));
        }
        let device_ok = match self.feature {
            Feature::Turn => true,
            Feature::Volume => self.device.is_audio(),
            Feature::Airflow | Feature::Outlet(_) => !self.device.is_audio(),
            Feature::Channel(_) => self.device == Device::Radio,
            Feature::Mode(_) => self.device == Device::Mp3,
        };
        if !device_ok {
            return bad(alloc::format!("feature {} does not apply to {}", self.feature, self.device));
        }
        if let Feature::Channel(i) = self.feature {
            if !(1..=3).contains(&i) {
                return bad(alloc::format!("channel preset {i} outside 1..=3"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Curvature {
    Gentle,
    Winding,
    Urban,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaneSegment {
    pub from_m: f64,
    pub to_m: f64,
    pub lane: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadSpec {
    pub id: u32,
    pub name: String,
    pub length_m: f64,
    pub lane_count: u8,
    pub lane_width_m: f64,
    pub ref_speed_kmh: f64,
    pub lane_schedule: Vec<LaneSegment>,
    /// Scales lateral-noise amplitude in the driver simulator.
    pub curvature: Curvature,
}

impl RoadSpec {
    fn check(&self) -> Result<(), ScenarioError> {
        let bad = |reason: String| Err(ScenarioError::Road(reason));
        if !(self.length_m.is_finite() && self.length_m > 0.0) {
            return bad(alloc::format!("length {} m must be positive", self.length_m));
        }
        if !(self.ref_speed_kmh.is_finite() && self.ref_speed_kmh > 0.0) {
            return bad(alloc::format!("reference speed {} km/h must be positive", self.ref_speed_kmh));
        }
        if !(self.lane_width_m.is_finite() && self.lane_width_m > 0.0) {
            return bad(alloc::format!("lane width {} m must be positive", self.lane_width_m));
        }
        if self.lane_count == 0 {
            return bad("lane count must be positive".into());
        }
        for (i, seg) in self.lane_schedule.iter().enumerate() {
            if !(0.0 <= seg.from_m && seg.from_m < seg.to_m && seg.to_m <= self.length_m) {
                return bad(alloc::format!(
                    "lane segment {}: {}..{} m not within 0..{} m",
                    i + 1,
                    seg.from_m,
                    seg.to_m,
                    self.length_m
                ));
            }
            if seg.lane == 0 || seg.lane > self.lane_count / 2 {
                return bad(alloc::format!("lane segment {}: lane {} does not exist", i + 1, seg.lane));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hazard {
    /// Index of the task sharing its location.
    pub task_index: u16,
    pub location_m: f64,
    pub kind: RoadCondition,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("unknown road {0}; built-in roads are 1, 2 and 3")]
    UnknownRoad(u32),
    #[error("road: {0}")]
    Road(String),
    #[error("task row {row}: {reason}")]
    Task { row: usize, reason: String },
}

/// Serialized form of a scenario; hazards are derived on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioDocument {
    pub road: RoadSpec,
    pub tasks: Vec<TaskSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    road: RoadSpec,
    tasks: Vec<TaskSpec>,
    hazards: Vec<Hazard>,
}

impl Scenario {
    pub fn road(&self) -> &RoadSpec {
        &self.road
    }

    pub fn tasks(&self) -> &[TaskSpec] {
        &self.tasks
    }

    pub fn hazards(&self) -> &[Hazard] {
        &self.hazards
    }

    pub fn to_document(&self) -> ScenarioDocument {
        ScenarioDocument { road: self.road.clone(), tasks: self.tasks.clone() }
    }

    /// Tasks with `s0 < location <= s1`, in order.
    pub fn events_between(&self, s0: f64, s1: f64) -> impl Iterator<Item = &TaskSpec> + '_ {
        self.tasks.iter().filter(move |t| s0 < t.location_m && t.location_m <= s1)
    }
}

pub fn load_scenario(doc: &ScenarioDocument) -> Result<Scenario, ScenarioError> {
    doc.road.check()?;
    let mut prev: Option<&TaskSpec> = None;
    for (i, t) in doc.tasks.iter().enumerate() {
        let row = i + 1;
        t.check(row, doc.road.length_m)?;
        if let Some(p) = prev {
            if t.location_m < p.location_m {
                return Err(ScenarioError::Task {
                    row,
                    reason: alloc::format!(
                        "location {} m precedes the previous task at {} m",
                        t.location_m,
                        p.location_m
                    ),
                });
            }
        }
        if doc.tasks[..i].iter().any(|o| o.index == t.index) {
            return Err(ScenarioError::Task { row, reason: alloc::format!("duplicate task number {}", t.index) });
        }
        prev = Some(t);
    }
    let hazards = doc
        .tasks
        .iter()
        .filter(|t| t.condition.is_hazard())
        .map(|t| Hazard { task_index: t.index, location_m: t.location_m, kind: t.condition })
        .collect();
    Ok(Scenario { road: doc.road.clone(), tasks: doc.tasks.clone(), hazards })
}

fn rows_to_tasks(rows: &[tables::TaskRow]) -> Vec<TaskSpec> {
    rows.iter()
        .map(|&(index, location_m, condition, device, feature, control, levels)| TaskSpec {
            index,
            location_m,
            condition,
            device,
            feature,
            control,
            levels,
        })
        .collect()
}

/// Road 1 (gentle), road 2 (winding) and road 3 (urban highway).
pub fn builtin_scenario(road_id: u32) -> Result<Scenario, ScenarioError> {
    let doc = match road_id {
        1 | 2 => ScenarioDocument {
            road: RoadSpec {
                id: road_id,
                name: if road_id == 1 { "easy".into() } else { "difficult".into() },
                length_m: 4900.0,
                lane_count: 6,
                lane_width_m: 3.5,
                ref_speed_kmh: 80.0,
                lane_schedule: alloc::vec![LaneSegment { from_m: 0.0, to_m: 4900.0, lane: 2 }],
                curvature: if road_id == 1 { Curvature::Gentle } else { Curvature::Winding },
            },
            tasks: rows_to_tasks(&tables::ROADS_1_2),
        },
        3 => ScenarioDocument {
            road: RoadSpec {
                id: 3,
                name: "urban highway".into(),
                length_m: 11550.0,
                lane_count: 6,
                lane_width_m: 3.5,
                ref_speed_kmh: 70.0,
                lane_schedule: tables::ROAD_3_LANES
                    .iter()
                    .map(|&(from_m, to_m, lane)| LaneSegment { from_m, to_m, lane })
                    .collect(),
                curvature: Curvature::Urban,
            },
            tasks: rows_to_tasks(&tables::ROAD_3),
        },
        other => return Err(ScenarioError::UnknownRoad(other)),
    };
    load_scenario(&doc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn road_three_rows() {
        let s = builtin_scenario(3).unwrap();
        let t1 = s.tasks()[0];
        assert_eq!(
            (t1.location_m, t1.condition, t1.device, t1.feature, t1.control, t1.levels),
            (900.0, RoadCondition::Normal, Device::Radio, Feature::Volume, Control::Up, 2)
        );
        let t3 = s.tasks()[2];
        assert_eq!(
            (t3.location_m, t3.condition, t3.device, t3.feature, t3.control, t3.levels),
            (1900.0, RoadCondition::SharpCurve, Device::Ac, Feature::Airflow, Control::Up, 2)
        );
        assert_eq!(s.tasks().len(), 15);
        assert_eq!(s.hazards().len(), 7);
        assert_eq!(s.tasks().iter().filter(|t| t.condition == RoadCondition::Normal).count(), 8);
        assert_eq!(s.road().length_m, 11550.0);
        assert_eq!(s.road().ref_speed_kmh, 70.0);
        assert_eq!(s.road().lane_schedule.len(), 3);
    }

    #[test]
    fn roads_one_and_two() {
        let r1 = builtin_scenario(1).unwrap();
        let r2 = builtin_scenario(2).unwrap();
        assert_eq!(r1.tasks(), r2.tasks());
        assert_ne!(r1.road().curvature, r2.road().curvature);
        assert_eq!(r1.tasks().len(), 16);
        let accidents: Vec<u16> = r1.hazards().iter().map(|h| h.task_index).collect();
        assert_eq!(accidents, [4, 7, 9, 12, 15]);
        for (k, t) in r1.tasks().iter().enumerate() {
            assert_eq!(t.location_m, 100.0 + 300.0 * k as f64);
        }
        assert_eq!(r1.road().ref_speed_kmh, 80.0);
        assert_eq!(r1.road().length_m, 4900.0);
        assert!(matches!(builtin_scenario(4), Err(ScenarioError::UnknownRoad(4))));
    }

    #[test]
    fn hazards_match_tasks() {
        for id in 1..=3 {
            let s = builtin_scenario(id).unwrap();
            for h in s.hazards() {
                let t = s.tasks().iter().find(|t| t.index == h.task_index).unwrap();
                assert_eq!(t.location_m, h.location_m);
                assert_eq!(t.condition, h.kind);
            }
            assert!(s.tasks().windows(2).all(|w| w[0].location_m <= w[1].location_m));
        }
    }

    #[test]
    fn events_between_intervals() {
        let s = builtin_scenario(1).unwrap();
        let hit: Vec<u16> = s.events_between(0.0, 150.0).map(|t| t.index).collect();
        assert_eq!(hit, [1]);
        assert_eq!(s.events_between(100.0, 100.0).count(), 0);
        assert_eq!(s.events_between(0.0, s.road().length_m).count(), 16);
        // left-open, right-closed
        assert_eq!(s.events_between(100.0, 400.0).map(|t| t.index).collect::<Vec<_>>(), [2]);
    }

    #[test]
    fn validation_errors() {
        let mut doc = builtin_scenario(1).unwrap().to_document();
        doc.tasks[15].location_m = 5000.0;
        let err = load_scenario(&doc).unwrap_err();
        assert!(matches!(err, ScenarioError::Task { row: 16, .. }), "{err}");

        let mut doc = builtin_scenario(1).unwrap().to_document();
        doc.tasks[1].levels = 0;
        assert!(matches!(load_scenario(&doc), Err(ScenarioError::Task { row: 2, .. })));

        let mut doc = builtin_scenario(1).unwrap().to_document();
        doc.tasks.swap(3, 4);
        assert!(matches!(load_scenario(&doc), Err(ScenarioError::Task { row: 5, .. })));

        let mut doc = builtin_scenario(1).unwrap().to_document();
        doc.tasks[0].levels = 3;
        assert!(matches!(load_scenario(&doc), Err(ScenarioError::Task { row: 1, .. })));

        let mut doc = builtin_scenario(1).unwrap().to_document();
        doc.tasks[1].device = Device::Heater;
        assert!(matches!(load_scenario(&doc), Err(ScenarioError::Task { row: 2, .. })));

        let mut doc = builtin_scenario(3).unwrap().to_document();
        doc.road.lane_schedule[0].to_m = 20000.0;
        assert!(matches!(load_scenario(&doc), Err(ScenarioError::Road(_))));
    }

    #[test]
    fn document_round_trip() {
        let s = builtin_scenario(3).unwrap();
        assert_eq!(load_scenario(&s.to_document()).unwrap(), s);
        assert_eq!(s.tasks()[0].prompt(), "radio volume up 2");
        assert_eq!(s.tasks()[4].prompt(), "radio ch1 select");
    }
}
