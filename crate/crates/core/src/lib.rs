//! Deterministic engine for an on-wheel finger-spreading gesture interface
//! driving a head-up display menu.
//!
//! The crate is `no_std` (with `alloc`) and contains only pure computation:
//!
//! - [`gesture_input`]: bend-sensor samples, spread/closed classification,
//!   synthetic and keyboard-driven virtual glove streams.
//! - [`recognizer`]: debounced one-shot finger-count gesture events and hotkeys.
//! - [`menu`]: the HUD menu hierarchy, device model, tactile baseline and the
//!   shortest-gesture planner.
//! - [`scenario`]: the three experimental roads and their task schedules.
//! - [`tasks`]: turning a scheduled task into a menu goal or a button script.
//! - [`driver_sim`]: seeded synthetic driver runs for the three interface
//!   conditions.
//! - [`metrics`]: distraction and driving-performance measures over run logs.
//! - [`stats`]: repeated-measures ANOVA, Wilcoxon signed-rank and the study
//!   report.
//!
//! File formats, the CLI and the live session service live in the `onwheel`
//! crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod driver_sim;
pub mod gesture_input;
pub mod menu;
pub mod metrics;
pub mod recognizer;
pub mod runlog;
pub mod scenario;
pub mod special;
pub mod stats;
pub mod tasks;

pub use driver_sim::{Condition, DriverParams, RunLog};
pub use gesture_input::{BendSample, FingerPose, GloveConfig, Hand, HandPose};
pub use menu::{MenuFocus, MenuLayout, SystemState};
pub use recognizer::{Gesture, GestureEvent, RecognizerConfig, RecognizerState};
pub use scenario::{Scenario, TaskSpec};
