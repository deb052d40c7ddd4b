//! Turning a scheduled task into something an interface can execute: a menu
//! goal for the gesture planner, or a press script for the console.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::menu::{
    apply_gesture, apply_tactile, plan_gestures, GoalClause, MenuFocus, MenuLayout, SystemState, TactileAction,
    TaskGoal,
};
use crate::recognizer::Gesture;
use crate::scenario::{Control, Feature, Scenario, TaskSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interface {
    Gesture,
    Tactile,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TaskError {
    #[error("task {task}: {reason}")]
    OutOfRange { task: u16, reason: String },
    #[error("task {task}: {source}")]
    Plan { task: u16, source: crate::menu::PlanError },
    #[error("task {task}: console rejected {action:?}: {source}")]
    Console { task: u16, action: TactileAction, source: crate::menu::MenuError },
}

fn stepped_level(task: &TaskSpec, current: u8, min: u8, max: u8) -> Result<u8, TaskError> {
    let delta = task.levels as i16 * if task.control == Control::Up { 1 } else { -1 };
    let target = current as i16 + delta;
    if target < min as i16 || target > max as i16 {
        return Err(TaskError::OutOfRange {
            task: task.index,
            reason: alloc::format!("level {current} {delta:+} leaves {min}..={max}"),
        });
    }
    Ok(target as u8)
}

/// Device-state clauses the task must reach, resolved against the state at
/// the moment the task starts (up/down and toggles are relative).
pub fn device_goal(task: &TaskSpec, state: &SystemState) -> Result<TaskGoal, TaskError> {
    let d = task.device;
    let devices = &state.devices;
    let limits = devices.limits;
    let mut clauses = Vec::new();
    if task.control == Control::Off {
        clauses.push(GoalClause::Power { device: d, on: false });
        return Ok(TaskGoal::new(clauses));
    }
    clauses.push(GoalClause::Power { device: d, on: true });
    match task.feature {
        Feature::Turn => {}
        Feature::Volume => {
            let current = devices.volume(d).unwrap_or(0);
            let level = stepped_level(task, current, 0, limits.max_volume)?;
            clauses.push(GoalClause::Volume { device: d, level });
        }
        Feature::Airflow => {
            let current = devices.climate(d).map_or(1, |c| c.fan);
            let level = stepped_level(task, current, 1, limits.max_fan)?;
            clauses.push(GoalClause::Fan { device: d, level });
        }
        Feature::Channel(i) => {
            let station = devices.radio.presets[(i.clamp(1, 3) - 1) as usize];
            clauses.push(GoalClause::Station { station });
        }
        Feature::Mode(mode) => clauses.push(GoalClause::Mode { mode, on: !devices.mp3.mode(mode) }),
        Feature::Outlet(outlet) => clauses.push(GoalClause::Outlet { device: d, outlet }),
    }
    Ok(TaskGoal::new(clauses))
}

/// Goal for the gesture interface. "Turn on" also requires the device's
/// submenu to be open, since selecting the switch is how the driver reaches it.
pub fn gesture_goal(task: &TaskSpec, state: &SystemState) -> Result<TaskGoal, TaskError> {
    let mut goal = device_goal(task, state)?;
    if task.feature == Feature::Turn && task.control == Control::On {
        goal.clauses.push(GoalClause::Focus { focus: task.device.focus() });
    }
    Ok(goal)
}

/// Minimal console press script for the task.
pub fn tactile_script(task: &TaskSpec, state: &SystemState) -> Result<Vec<TactileAction>, TaskError> {
    let d = task.device;
    let devices = &state.devices;
    let mut presses = Vec::new();
    let powered = devices.power(d);
    if task.control == Control::Off {
        if powered {
            presses.push(TactileAction::PowerToggle { device: d });
        }
        return Ok(presses);
    }
    if !powered {
        presses.push(TactileAction::PowerToggle { device: d });
    }
    let delta: i8 = if task.control == Control::Up { 1 } else { -1 };
    match task.feature {
        Feature::Turn => {}
        Feature::Volume => {
            stepped_level(task, devices.volume(d).unwrap_or(0), 0, devices.limits.max_volume)?;
            presses.extend((0..task.levels).map(|_| TactileAction::VolumeStep { device: d, delta }));
        }
        Feature::Airflow => {
            stepped_level(task, devices.climate(d).map_or(1, |c| c.fan), 1, devices.limits.max_fan)?;
            presses.extend((0..task.levels).map(|_| TactileAction::FanStep { device: d, delta }));
        }
        Feature::Channel(i) => {
            if devices.radio.station != devices.radio.presets[(i.clamp(1, 3) - 1) as usize] {
                presses.push(TactileAction::Preset { index: i });
            }
        }
        Feature::Mode(mode) => presses.push(TactileAction::ModeToggle { mode }),
        Feature::Outlet(outlet) => {
            if devices.climate(d).is_some_and(|c| c.outlet != outlet) {
                presses.push(TactileAction::OutletSelect { device: d, outlet });
            }
        }
    }
    Ok(presses)
}

/// One driver action within a task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum PlannedStep {
    Gesture { gesture: Gesture, focus_after: MenuFocus },
    Press { action: TactileAction },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannedTask {
    pub task_index: u16,
    pub steps: Vec<PlannedStep>,
}

/// Plans every task of the scenario in order, carrying device state forward.
pub fn plan_scenario(
    scenario: &Scenario,
    interface: Interface,
    layout: &MenuLayout,
    initial: &SystemState,
) -> Result<Vec<PlannedTask>, TaskError> {
    let mut state = *initial;
    let mut planned = Vec::with_capacity(scenario.tasks().len());
    for task in scenario.tasks() {
        let mut steps = Vec::new();
        match interface {
            Interface::Gesture => {
                let goal = gesture_goal(task, &state)?;
                let gestures = plan_gestures(&state, &goal, layout)
                    .map_err(|source| TaskError::Plan { task: task.index, source })?;
                for gesture in gestures {
                    state = apply_gesture(&state, gesture, layout).0;
                    steps.push(PlannedStep::Gesture { gesture, focus_after: state.menu });
                }
            }
            Interface::Tactile => {
                for action in tactile_script(task, &state)? {
                    state = apply_tactile(&state, action)
                        .map_err(|source| TaskError::Console { task: task.index, action, source })?
                        .0;
                    steps.push(PlannedStep::Press { action });
                }
            }
        }
        planned.push(PlannedTask { task_index: task.index, steps });
    }
    Ok(planned)
}

/// Human-readable name of a goal, for errors and prompts.
pub fn describe(task: &TaskSpec, state: &SystemState) -> String {
    device_goal(task, state).map_or_else(|e| e.to_string(), |g| g.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::menu::Device;
    use crate::scenario::builtin_scenario;

    #[test]
    fn road_one_gesture_counts() {
        let s = builtin_scenario(1).unwrap();
        let plan = plan_scenario(&s, Interface::Gesture, &MenuLayout::default(), &SystemState::default()).unwrap();
        let counts: Vec<usize> = plan.iter().map(|t| t.steps.len()).collect();
        assert_eq!(counts, [1, 2, 2, 1, 2, 1, 2, 1, 2, 1, 2, 2, 2, 1, 2, 2]);
    }

    #[test]
    fn road_one_press_counts() {
        let s = builtin_scenario(1).unwrap();
        let plan = plan_scenario(&s, Interface::Tactile, &MenuLayout::default(), &SystemState::default()).unwrap();
        let counts: Vec<usize> = plan.iter().map(|t| t.steps.len()).collect();
        assert_eq!(counts, [1, 2, 1, 1, 1, 1, 1, 1, 0, 1, 0, 2, 0, 1, 0, 2]);
    }

    #[test]
    fn relative_goals() {
        let s = builtin_scenario(3).unwrap();
        let state = SystemState::default();
        let goal = device_goal(&s.tasks()[0], &state).unwrap();
        assert!(goal
            .clauses
            .contains(&GoalClause::Volume { device: Device::Radio, level: state.devices.radio.volume + 2 }));

        let mut quiet = state;
        quiet.devices.mp3.volume = 1;
        assert!(matches!(device_goal(&s.tasks()[1], &quiet), Err(TaskError::OutOfRange { task: 2, .. })));
        assert!(tactile_script(&s.tasks()[1], &quiet).is_err());
    }

    #[test]
    fn off_tasks() {
        let mut t = builtin_scenario(1).unwrap().tasks()[0];
        t.control = Control::Off;
        let state = SystemState::default();
        assert!(tactile_script(&t, &state).unwrap().is_empty());
        let goal = gesture_goal(&t, &state).unwrap();
        assert!(goal.is_satisfied(&state));
    }
}
