//! Seeded synthetic driver runs.
//!
//! Speed and lateral offset are mean-reverting (Ornstein-Uhlenbeck) traces
//! around the reference speed and the lane centre. Hazards trigger a brake
//! dip after a sampled reaction time. Secondary tasks are executed with the
//! condition's interface: a gesture script from the menu planner, or a
//! reach-and-press script on the console. Gaze alternates between forward
//! and off-road glances made of short fixations, and the head turns toward
//! a per-task target while the task is executed.
//!
//! Each run draws from independent random streams (speed, lateral, gaze,
//! head, hazard, actions) derived from one seed, so changing one part of the
//! model does not reshuffle the others.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use libm::{exp, sqrt};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::menu::{MenuFocus, MenuLayout, SystemState};
use crate::metrics::{run_metrics, MetricError, MetricRow, MetricsConfig};
pub use crate::runlog::{Aoi, Condition, DriveRow, GazeRow, HazardRecord, HeadRow, RunLog, TaskRecord};
use crate::scenario::{builtin_scenario, Curvature, Scenario, ScenarioError};
use crate::tasks::{plan_scenario, PlannedStep, PlannedTask, TaskError};

pub const DEFAULT_DT_S: f64 = 1.0 / 60.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid parameter {0}")]
    Params(String),
    #[error("need at least 2 subjects, got {0}")]
    TooFewSubjects(u32),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("road {0} is not part of this study")]
    MissingRoad(u32),
}

/// Mean-reverting noise: `sigma` is the stationary standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuParams {
    pub sigma: f64,
    pub theta_per_s: f64,
    /// Innovation scale while a task is being executed.
    pub task_multiplier: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlanceParams {
    /// Mean console glance forced by each console action.
    pub off_road_glance_mean_ms: f64,
    pub glances_per_action: u8,
    /// Chance, relative to normal driving, that a forward glance gives way
    /// to an off-road glance while an action is in progress.
    pub other_glance_factor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadExcursion {
    pub yaw_deg: f64,
    pub pitch_deg: f64,
    pub roll_deg: f64,
    pub yaw_sd_deg: f64,
    pub pitch_sd_deg: f64,
    pub roll_sd_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionParams {
    pub brake_rt_mean_s: f64,
    pub brake_rt_sd_s: f64,
    /// Per gesture or per button press.
    pub action_time_mean_s: f64,
    pub action_time_sd_s: f64,
    /// Hand travel to the console before the first press.
    pub reach_time_s: f64,
    pub speed_noise: OuParams,
    pub lateral_noise: OuParams,
    pub glance: GlanceParams,
    pub head: HeadExcursion,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub const fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }

    fn inset(&self, m: f64) -> Rect {
        Rect::new(self.x0 + m, self.y0 + m, self.x1 - m, self.y1 - m)
    }

    fn is_proper(&self) -> bool {
        self.x1 > self.x0 && self.y1 > self.y0
    }
}

/// Regions of the scene-camera image, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AoiGeometry {
    pub forward: Rect,
    pub console: Rect,
    /// Head-up display area; lies inside `forward`.
    pub hud: Rect,
    /// Mirrors and side windows, targets of off-road glances.
    pub other: [Rect; 3],
}

impl AoiGeometry {
    pub fn label(&self, x: f64, y: f64) -> Aoi {
        if self.forward.contains(x, y) {
            Aoi::Forward
        } else if self.console.contains(x, y) {
            Aoi::Console
        } else {
            Aoi::Other
        }
    }
}

impl Default for AoiGeometry {
    fn default() -> Self {
        // 1920 x 1080 scene camera
        Self {
            forward: Rect::new(480.0, 200.0, 1440.0, 720.0),
            console: Rect::new(1180.0, 780.0, 1700.0, 1080.0),
            hud: Rect::new(760.0, 560.0, 1160.0, 700.0),
            other: [
                Rect::new(40.0, 320.0, 400.0, 600.0),
                Rect::new(1520.0, 320.0, 1880.0, 600.0),
                Rect::new(820.0, 40.0, 1100.0, 160.0),
            ],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GazeParams {
    /// Mean of the exponentially distributed forward glances.
    pub forward_glance_mean_s: f64,
    pub other_glance_mean_s: f64,
    pub other_glance_sd_s: f64,
    pub fixation_mean_ms: f64,
    pub fixation_sd_ms: f64,
    /// Uniform jitter of samples around the fixation target.
    pub jitter_px: f64,
    /// Spread of forward fixation targets around the road vanishing point.
    pub forward_spread_px: (f64, f64),
    pub aoi: AoiGeometry,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BrakeParams {
    pub rt_floor_s: f64,
    pub sight_distance_m: f64,
    /// Speed shed before the brake is released.
    pub drop_kmh: f64,
    pub decel_mps2: f64,
    pub recovery_mps2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureFactors {
    pub gentle: f64,
    pub winding: f64,
    pub urban: f64,
}

impl CurvatureFactors {
    fn of(&self, c: Curvature) -> f64 {
        match c {
            Curvature::Gentle => self.gentle,
            Curvature::Winding => self.winding,
            Curvature::Urban => self.urban,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriverParams {
    pub baseline: ConditionParams,
    pub tactile: ConditionParams,
    pub gesture: ConditionParams,
    /// Log-scale sd of the per-subject multiplicative factors.
    pub subject_variability_sd: f64,
    pub utterance_s: f64,
    pub dt_s: f64,
    pub brake: BrakeParams,
    pub gaze: GazeParams,
    pub head_noise_deg: f64,
    pub head_theta_per_s: f64,
    pub head_ramp_s: f64,
    pub lateral_curvature: CurvatureFactors,
    /// Extra driving allowed past the road end for a task still in progress.
    pub max_overrun_s: f64,
}

impl DriverParams {
    pub fn condition(&self, c: Condition) -> &ConditionParams {
        match c {
            Condition::Baseline => &self.baseline,
            Condition::Tactile => &self.tactile,
            Condition::Gesture => &self.gesture,
        }
    }

    pub fn condition_mut(&mut self, c: Condition) -> &mut ConditionParams {
        match c {
            Condition::Baseline => &mut self.baseline,
            Condition::Tactile => &mut self.tactile,
            Condition::Gesture => &mut self.gesture,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        fn positive(name: &str, v: f64) -> Result<(), SimError> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(SimError::Params(format!("{name} = {v} must be > 0")))
            }
        }
        fn non_negative(name: &str, v: f64) -> Result<(), SimError> {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(SimError::Params(format!("{name} = {v} must be >= 0")))
            }
        }
        fn at_least_one(name: &str, v: f64) -> Result<(), SimError> {
            if v.is_finite() && v >= 1.0 {
                Ok(())
            } else {
                Err(SimError::Params(format!("{name} = {v} must be >= 1")))
            }
        }
        for c in Condition::ALL {
            let p = self.condition(c);
            let n = |field: &str| format!("{}.{field}", c.name());
            positive(&n("brake_rt_mean_s"), p.brake_rt_mean_s)?;
            non_negative(&n("brake_rt_sd_s"), p.brake_rt_sd_s)?;
            positive(&n("action_time_mean_s"), p.action_time_mean_s)?;
            non_negative(&n("action_time_sd_s"), p.action_time_sd_s)?;
            non_negative(&n("reach_time_s"), p.reach_time_s)?;
            for (name, ou) in [("speed_noise", &p.speed_noise), ("lateral_noise", &p.lateral_noise)] {
                non_negative(&n(&format!("{name}.sigma")), ou.sigma)?;
                positive(&n(&format!("{name}.theta_per_s")), ou.theta_per_s)?;
                at_least_one(&n(&format!("{name}.task_multiplier")), ou.task_multiplier)?;
            }
            positive(&n("glance.off_road_glance_mean_ms"), p.glance.off_road_glance_mean_ms)?;
            if !(0.0..=1.0).contains(&p.glance.other_glance_factor) {
                return Err(SimError::Params(format!("{} must be within [0, 1]", n("glance.other_glance_factor"))));
            }
            for (name, v) in [
                ("head.yaw_sd_deg", p.head.yaw_sd_deg),
                ("head.pitch_sd_deg", p.head.pitch_sd_deg),
                ("head.roll_sd_deg", p.head.roll_sd_deg),
            ] {
                non_negative(&n(name), v)?;
            }
        }
        non_negative("subject_variability_sd", self.subject_variability_sd)?;
        non_negative("utterance_s", self.utterance_s)?;
        positive("dt_s", self.dt_s)?;
        non_negative("brake.rt_floor_s", self.brake.rt_floor_s)?;
        non_negative("brake.sight_distance_m", self.brake.sight_distance_m)?;
        positive("brake.drop_kmh", self.brake.drop_kmh)?;
        positive("brake.decel_mps2", self.brake.decel_mps2)?;
        positive("brake.recovery_mps2", self.brake.recovery_mps2)?;
        positive("gaze.forward_glance_mean_s", self.gaze.forward_glance_mean_s)?;
        positive("gaze.other_glance_mean_s", self.gaze.other_glance_mean_s)?;
        non_negative("gaze.other_glance_sd_s", self.gaze.other_glance_sd_s)?;
        positive("gaze.fixation_mean_ms", self.gaze.fixation_mean_ms)?;
        non_negative("gaze.fixation_sd_ms", self.gaze.fixation_sd_ms)?;
        non_negative("gaze.jitter_px", self.gaze.jitter_px)?;
        let aoi = &self.gaze.aoi;
        let margin = self.gaze.jitter_px + 1.0;
        for (name, r) in [("forward", aoi.forward), ("console", aoi.console), ("hud", aoi.hud)]
            .into_iter()
            .chain(aoi.other.iter().map(|r| ("other", *r)))
        {
            if !r.inset(margin).is_proper() {
                return Err(SimError::Params(format!("gaze.aoi.{name} is smaller than the jitter margin")));
            }
        }
        let hud = aoi.hud;
        if !(aoi.forward.contains(hud.x0, hud.y0) && aoi.forward.contains(hud.x1 - 1e-9, hud.y1 - 1e-9)) {
            return Err(SimError::Params("gaze.aoi.hud must lie inside gaze.aoi.forward".into()));
        }
        non_negative("head_noise_deg", self.head_noise_deg)?;
        positive("head_theta_per_s", self.head_theta_per_s)?;
        positive("head_ramp_s", self.head_ramp_s)?;
        for (name, v) in [
            ("lateral_curvature.gentle", self.lateral_curvature.gentle),
            ("lateral_curvature.winding", self.lateral_curvature.winding),
            ("lateral_curvature.urban", self.lateral_curvature.urban),
        ] {
            positive(name, v)?;
        }
        non_negative("max_overrun_s", self.max_overrun_s)?;
        Ok(())
    }

    /// Same parameters with every noise source switched off.
    pub fn noiseless(mut self) -> Self {
        for c in Condition::ALL {
            let p = self.condition_mut(c);
            p.speed_noise.sigma = 0.0;
            p.lateral_noise.sigma = 0.0;
            p.brake_rt_sd_s = 0.0;
            p.action_time_sd_s = 0.0;
        }
        self.subject_variability_sd = 0.0;
        self.head_noise_deg = 0.0;
        self
    }
}

const fn no_head() -> HeadExcursion {
    HeadExcursion { yaw_deg: 0.0, pitch_deg: 0.0, roll_deg: 0.0, yaw_sd_deg: 0.0, pitch_sd_deg: 0.0, roll_sd_deg: 0.0 }
}

/// Calibrated defaults.
///
/// Baseline brake reaction is 1.00 s by convention; tactile is 1.19 times
/// that and gesture equal to baseline. Gesture and press durations are set
/// so that a gesture task takes about 0.81 of the tactile time on the
/// built-in task tables. Glance parameters put the forward attention ratio
/// near 86.1 % (baseline), 79.7 % (tactile) and 86.9 % (gesture). Head
/// targets are (-5.1, -4.6) deg yaw/pitch for tactile and (2.6, -1.4) deg
/// for gesture.
pub fn default_params() -> DriverParams {
    let speed = OuParams { sigma: 1.8, theta_per_s: 0.15, task_multiplier: 1.0 };
    let lateral = OuParams { sigma: 0.18, theta_per_s: 0.3, task_multiplier: 1.0 };
    let glance = GlanceParams { off_road_glance_mean_ms: 600.0, glances_per_action: 0, other_glance_factor: 1.0 };
    let baseline = ConditionParams {
        brake_rt_mean_s: 1.0,
        brake_rt_sd_s: 0.25,
        action_time_mean_s: 1.0,
        action_time_sd_s: 0.0,
        reach_time_s: 0.0,
        speed_noise: speed,
        lateral_noise: lateral,
        glance,
        head: no_head(),
    };
    let tactile = ConditionParams {
        brake_rt_mean_s: 1.19,
        action_time_mean_s: 0.9,
        action_time_sd_s: 0.25,
        reach_time_s: 1.2,
        speed_noise: OuParams { task_multiplier: 1.04, ..speed },
        lateral_noise: OuParams { task_multiplier: 1.05, ..lateral },
        glance: GlanceParams { glances_per_action: 1, ..glance },
        head: HeadExcursion {
            yaw_deg: -5.1,
            pitch_deg: -4.6,
            roll_deg: 0.0,
            yaw_sd_deg: 4.6,
            pitch_sd_deg: 4.3,
            roll_sd_deg: 1.5,
        },
        ..baseline
    };
    let gesture = ConditionParams {
        brake_rt_mean_s: 1.0,
        action_time_mean_s: 0.87,
        action_time_sd_s: 0.2,
        reach_time_s: 0.0,
        speed_noise: OuParams { task_multiplier: 1.02, ..speed },
        lateral_noise: OuParams { task_multiplier: 1.02, ..lateral },
        glance: GlanceParams { other_glance_factor: 0.4, ..glance },
        head: HeadExcursion {
            yaw_deg: 2.6,
            pitch_deg: -1.4,
            roll_deg: 0.0,
            yaw_sd_deg: 3.0,
            pitch_sd_deg: 3.1,
            roll_sd_deg: 1.5,
        },
        ..baseline
    };
    DriverParams {
        baseline,
        tactile,
        gesture,
        subject_variability_sd: 0.15,
        utterance_s: 2.0,
        dt_s: DEFAULT_DT_S,
        brake: BrakeParams {
            rt_floor_s: 0.2,
            sight_distance_m: crate::scenario::DEFAULT_SIGHT_DISTANCE_M,
            drop_kmh: 20.0,
            decel_mps2: 6.0,
            recovery_mps2: 3.0,
        },
        gaze: GazeParams {
            forward_glance_mean_s: 4.94,
            other_glance_mean_s: 0.8,
            other_glance_sd_s: 0.3,
            fixation_mean_ms: 230.0,
            fixation_sd_ms: 60.0,
            jitter_px: 2.0,
            forward_spread_px: (120.0, 50.0),
            aoi: AoiGeometry::default(),
        },
        head_noise_deg: 0.2,
        head_theta_per_s: 2.0,
        head_ramp_s: 0.2,
        lateral_curvature: CurvatureFactors { gentle: 1.0, winding: 1.35, urban: 1.2 },
        max_overrun_s: 60.0,
    }
}

/// Per-subject multiplicative factors, shared across conditions and roads.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubjectTraits {
    pub reaction: f64,
    pub action: f64,
    pub glance: f64,
    pub speed: f64,
    pub lateral: f64,
}

impl SubjectTraits {
    pub const NOMINAL: SubjectTraits =
        SubjectTraits { reaction: 1.0, action: 1.0, glance: 1.0, speed: 1.0, lateral: 1.0 };

    /// Log-normal factors with mean 1.
    pub fn draw(study_seed: u64, subject: u32, sd: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(study_seed, 0x5u64 << 32 | subject as u64));
        let mut f = || {
            let z: f64 = StandardNormal.sample(&mut rng);
            exp(sd * z - sd * sd / 2.0)
        };
        SubjectTraits { reaction: f(), action: f(), glance: f(), speed: f(), lateral: f() }
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn mix(a: u64, b: u64) -> u64 {
    splitmix(splitmix(a) ^ b)
}

/// Seed of one run within a study.
pub fn child_seed(seed: u64, subject: u32, condition: Condition, road_id: u32) -> u64 {
    let c = match condition {
        Condition::Baseline => 1,
        Condition::Tactile => 2,
        Condition::Gesture => 3,
    };
    mix(mix(mix(seed, subject as u64), c), road_id as u64)
}

#[derive(Clone, Copy)]
enum Stream {
    Speed = 1,
    Lateral,
    Gaze,
    Head,
    Hazard,
    Actions,
}

fn stream(seed: u64, s: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(s as u64);
    rng
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Normal sample redrawn while below `floor`; falls back to the floor.
fn truncated_normal(rng: &mut ChaCha8Rng, mean: f64, sd: f64, floor: f64) -> f64 {
    if sd == 0.0 {
        return mean.max(floor);
    }
    for _ in 0..32 {
        let v = mean + sd * normal(rng);
        if v >= floor {
            return v;
        }
    }
    floor
}

fn quantize(v: f64, steps_per_unit: f64) -> f64 {
    libm::round(v * steps_per_unit) / steps_per_unit
}

/// Recorded precision of each trace, as steps per unit.
pub mod precision {
    pub const SPEED: f64 = 1e4;
    pub const LATERAL: f64 = 1e5;
    pub const GAZE: f64 = 1e2;
    pub const HEAD: f64 = 1e3;
}

struct Ou {
    x: f64,
    a: f64,
    innovation: f64,
}

impl Ou {
    fn new(p: &OuParams, sigma: f64, dt: f64, rng: &mut ChaCha8Rng) -> Self {
        let a = exp(-p.theta_per_s * dt);
        let x = if sigma > 0.0 { sigma * normal(rng) } else { 0.0 };
        Ou { x, a, innovation: sigma * sqrt(1.0 - a * a) }
    }

    fn step(&mut self, multiplier: f64, rng: &mut ChaCha8Rng) {
        // draw even when silent so streams stay aligned across parameter sets
        let z = normal(rng);
        self.x = self.a * self.x + self.innovation * multiplier * z;
    }
}

#[derive(Debug, Clone, Copy)]
enum ActionKind {
    Reach,
    Press,
    Gesture(MenuFocus),
}

#[derive(Debug, Clone, Copy)]
struct Action {
    start: f64,
    end: f64,
    kind: ActionKind,
}

struct TaskRun {
    record: TaskRecord,
    start: f64,
    actions: Vec<Action>,
    head_target: (f64, f64, f64),
}

struct HazardRun {
    record: HazardRecord,
    /// Brake release time.
    release_t: f64,
}

/// Brake dip in km/h at time `t`.
fn dip_at(h: &HazardRun, t: f64, b: &BrakeParams) -> (f64, bool) {
    let Some(onset) = h.record.brake_onset_t else {
        return (0.0, false);
    };
    if t < onset {
        return (0.0, false);
    }
    if t < h.release_t {
        return (b.decel_mps2 * 3.6 * (t - onset), true);
    }
    ((b.drop_kmh - b.recovery_mps2 * 3.6 * (t - h.release_t)).max(0.0), false)
}

struct Gaze<'a> {
    p: &'a GazeParams,
    rng: ChaCha8Rng,
    forward_exp: Exp<f64>,
    aoi: Aoi,
    glance_end: f64,
    target: (f64, f64),
    fixation_end: f64,
    hud: bool,
}

impl<'a> Gaze<'a> {
    fn new(p: &'a GazeParams, seed: u64) -> Self {
        let mut rng = stream(seed, Stream::Gaze);
        let forward_exp = Exp::new(1.0 / p.forward_glance_mean_s).expect("positive rate");
        let glance_end = forward_exp.sample(&mut rng);
        Gaze { p, rng, forward_exp, aoi: Aoi::Forward, glance_end, target: (0.0, 0.0), fixation_end: 0.0, hud: false }
    }

    fn uniform_in(&mut self, r: Rect) -> (f64, f64) {
        let r = r.inset(self.p.jitter_px + 1.0);
        (self.rng.random_range(r.x0..r.x1), self.rng.random_range(r.y0..r.y1))
    }

    fn pick_target(&mut self) -> (f64, f64) {
        let g = &self.p.aoi;
        match self.aoi {
            Aoi::Forward if self.hud => self.uniform_in(g.hud),
            Aoi::Forward => {
                let r = g.forward.inset(self.p.jitter_px + 1.0);
                let (cx, cy) =
                    ((g.forward.x0 + g.forward.x1) / 2.0, g.forward.y0 + (g.forward.y1 - g.forward.y0) * 0.45);
                let x = (cx + self.p.forward_spread_px.0 * normal(&mut self.rng)).clamp(r.x0, r.x1 - 1e-6);
                let y = (cy + self.p.forward_spread_px.1 * normal(&mut self.rng)).clamp(r.y0, r.y1 - 1e-6);
                (x, y)
            }
            Aoi::Console => self.uniform_in(g.console),
            Aoi::Other => {
                let i = self.rng.random_range(0..g.other.len());
                self.uniform_in(g.other[i])
            }
        }
    }

    fn begin(&mut self, aoi: Aoi, t: f64, duration: f64) {
        self.aoi = aoi;
        self.glance_end = t + duration;
        self.fixation_end = t;
    }

    /// `forced_console` starts a console glance of the given length now.
    /// `other_factor` thins the switches from forward to off-road glances.
    fn sample(
        &mut self,
        t: f64,
        forced_console: Option<f64>,
        hud: bool,
        other_factor: f64,
        other_mean: f64,
    ) -> GazeRow {
        if let Some(d) = forced_console {
            self.begin(Aoi::Console, t, d);
        } else if t >= self.glance_end {
            if self.aoi == Aoi::Forward {
                let suppressed = other_factor < 1.0 && self.rng.random::<f64>() >= other_factor;
                if suppressed {
                    self.glance_end = t + self.forward_exp.sample(&mut self.rng);
                } else {
                    let sd = self.p.other_glance_sd_s * other_mean / self.p.other_glance_mean_s;
                    let d = truncated_normal(&mut self.rng, other_mean, sd, 0.1);
                    self.begin(Aoi::Other, t, d);
                }
            } else {
                let d = self.forward_exp.sample(&mut self.rng);
                self.begin(Aoi::Forward, t, d);
            }
        }
        if self.hud != hud && self.aoi == Aoi::Forward {
            self.fixation_end = t;
        }
        self.hud = hud;
        if t >= self.fixation_end {
            self.target = self.pick_target();
            let d = truncated_normal(&mut self.rng, self.p.fixation_mean_ms, self.p.fixation_sd_ms, 60.0) / 1000.0;
            self.fixation_end = t + d;
        }
        let j = self.p.jitter_px;
        let (dx, dy) =
            if j > 0.0 { (self.rng.random_range(-j..=j), self.rng.random_range(-j..=j)) } else { (0.0, 0.0) };
        let x = quantize(self.target.0 + dx, precision::GAZE);
        let y = quantize(self.target.1 + dy, precision::GAZE);
        GazeRow { t_s: t, x_px: x, y_px: y, aoi: self.p.aoi.label(x, y) }
    }
}

/// Gesture or press script for a condition on a scenario, using the default
/// layout and start state. `None` for baseline.
pub fn plan_for(scenario: &Scenario, condition: Condition) -> Result<Option<Vec<PlannedTask>>, SimError> {
    match condition.interface() {
        None => Ok(None),
        Some(i) => Ok(Some(plan_scenario(scenario, i, &MenuLayout::default(), &SystemState::default())?)),
    }
}

/// One run with nominal subject traits.
pub fn simulate_run(
    scenario: &Scenario,
    condition: Condition,
    params: &DriverParams,
    seed: u64,
) -> Result<RunLog, SimError> {
    let plan = plan_for(scenario, condition)?;
    simulate_planned(scenario, plan.as_deref(), condition, params, &SubjectTraits::NOMINAL, seed)
}

struct Scheduler<'a> {
    scenario: &'a Scenario,
    params: &'a DriverParams,
    cp: &'a ConditionParams,
    traits: &'a SubjectTraits,
    plan: Option<core::slice::Iter<'a, PlannedTask>>,
    rng_hazard: ChaCha8Rng,
    rng_act: ChaCha8Rng,
    next_task: usize,
    next_hazard: usize,
    tasks: Vec<TaskRun>,
    hazards: Vec<HazardRun>,
    console_glances: Vec<f64>,
    focus_changes: Vec<(f64, MenuFocus)>,
    busy_until: f64,
}

impl Scheduler<'_> {
    /// Fires every hazard onset and task trigger located at or before `upto`
    /// metres; `crossing` maps a position to the time it was passed.
    fn advance(&mut self, upto: f64, crossing: &dyn Fn(f64) -> f64) {
        let (params, cp, traits) = (self.params, self.cp, self.traits);
        let b = &params.brake;
        let hazards = self.scenario.hazards();
        while let Some(h) = hazards.get(self.next_hazard) {
            let at = (h.location_m - b.sight_distance_m).max(0.0);
            if at > upto {
                break;
            }
            self.next_hazard += 1;
            let onset = crossing(at);
            let rt = truncated_normal(
                &mut self.rng_hazard,
                cp.brake_rt_mean_s * traits.reaction,
                cp.brake_rt_sd_s * traits.reaction,
                b.rt_floor_s,
            );
            let brake = onset + rt;
            let release = brake + b.drop_kmh / (b.decel_mps2 * 3.6);
            let recovered = release + b.drop_kmh / (b.recovery_mps2 * 3.6);
            self.hazards.push(HazardRun {
                record: HazardRecord {
                    hazard_id: h.task_index,
                    onset_t: onset,
                    brake_onset_t: Some(brake),
                    recovered_t: Some(recovered),
                },
                release_t: release,
            });
        }
        let tasks = self.scenario.tasks();
        while let Some(spec) = tasks.get(self.next_task) {
            let at = spec.location_m.max(0.0);
            if at > upto {
                break;
            }
            self.next_task += 1;
            let Some(planned) = self.plan.as_mut().and_then(|p| p.next()) else {
                continue;
            };
            let trigger = crossing(at);
            let command_end = trigger + params.utterance_s;
            let start = command_end.max(self.busy_until);
            let rng = &mut self.rng_act;
            let mut duration = |mean: f64| traits.action * truncated_normal(rng, mean, cp.action_time_sd_s, 0.1 * mean);
            let mut t = start;
            let mut actions = Vec::with_capacity(planned.steps.len() + 1);
            let presses = planned.steps.iter().any(|s| matches!(s, PlannedStep::Press { .. }));
            if presses && cp.reach_time_s > 0.0 {
                let d = duration(cp.reach_time_s);
                actions.push(Action { start: t, end: t + d, kind: ActionKind::Reach });
                t += d;
            }
            for step in &planned.steps {
                let d = duration(cp.action_time_mean_s);
                let kind = match *step {
                    PlannedStep::Gesture { focus_after, .. } => ActionKind::Gesture(focus_after),
                    PlannedStep::Press { .. } => ActionKind::Press,
                };
                actions.push(Action { start: t, end: t + d, kind });
                t += d;
            }
            let per_action = cp.glance.glances_per_action;
            for a in &actions {
                match a.kind {
                    ActionKind::Gesture(f) => self.focus_changes.push((a.end, f)),
                    ActionKind::Reach | ActionKind::Press => {
                        let share = (a.end - a.start) / per_action.max(1) as f64;
                        self.console_glances.extend((0..per_action).map(|g| a.start + share * g as f64));
                    }
                }
            }
            let hp = &cp.head;
            let head_target = if actions.is_empty() {
                (0.0, 0.0, 0.0)
            } else {
                (
                    hp.yaw_deg + hp.yaw_sd_deg * normal(&mut self.rng_act),
                    hp.pitch_deg + hp.pitch_sd_deg * normal(&mut self.rng_act),
                    hp.roll_deg + hp.roll_sd_deg * normal(&mut self.rng_act),
                )
            };
            self.busy_until = t;
            self.tasks.push(TaskRun {
                record: TaskRecord { task_id: spec.index, trigger_t: trigger, command_end_t: command_end, done_t: t },
                start,
                actions,
                head_target,
            });
        }
    }
}

/// One run with a precomputed task script (`None` skips tasks).
pub fn simulate_planned(
    scenario: &Scenario,
    plan: Option<&[PlannedTask]>,
    condition: Condition,
    params: &DriverParams,
    traits: &SubjectTraits,
    seed: u64,
) -> Result<RunLog, SimError> {
    params.validate()?;
    let cp = params.condition(condition);
    let road = scenario.road();
    let dt = params.dt_s;
    let ref_v = road.ref_speed_kmh;

    let mut rng_speed = stream(seed, Stream::Speed);
    let mut rng_lat = stream(seed, Stream::Lateral);
    let mut rng_head = stream(seed, Stream::Head);

    let lat_sigma = cp.lateral_noise.sigma * traits.lateral * params.lateral_curvature.of(road.curvature);
    let mut speed_ou = Ou::new(&cp.speed_noise, cp.speed_noise.sigma * traits.speed, dt, &mut rng_speed);
    let mut lat_ou = Ou::new(&cp.lateral_noise, lat_sigma, dt, &mut rng_lat);
    let head_p = OuParams { sigma: params.head_noise_deg, theta_per_s: params.head_theta_per_s, task_multiplier: 1.0 };
    let mut head_ou: [Ou; 3] = core::array::from_fn(|_| Ou::new(&head_p, params.head_noise_deg, dt, &mut rng_head));
    let other_mean = params.gaze.other_glance_mean_s * traits.glance;
    let console_mean = cp.glance.off_road_glance_mean_ms / 1000.0 * traits.glance;
    let mut gaze = Gaze::new(&params.gaze, seed);

    let mut sched = Scheduler {
        scenario,
        params,
        cp,
        traits,
        plan: plan.map(|p| p.iter()),
        rng_hazard: stream(seed, Stream::Hazard),
        rng_act: stream(seed, Stream::Actions),
        next_task: 0,
        next_hazard: 0,
        tasks: Vec::new(),
        hazards: Vec::new(),
        console_glances: Vec::new(),
        focus_changes: Vec::new(),
        busy_until: 0.0,
    };
    // events at or before the start line fire at t = 0
    sched.advance(0.0, &|_| 0.0);

    let n_est = (road.length_m / (ref_v / 3.6) / dt) as usize + 64;
    let mut drive = Vec::with_capacity(n_est);
    let mut gaze_rows = Vec::with_capacity(n_est);
    let mut head_rows = Vec::with_capacity(n_est);

    let ramp = params.head_ramp_s;
    let mut focus = SystemState::default().menu;
    let (mut focus_cursor, mut console_cursor, mut first_live) = (0usize, 0usize, 0usize);
    let mut pos = 0.0f64;
    let mut road_end_t: Option<f64> = None;
    let mut truncated = false;
    let mut k: u64 = 0;
    loop {
        let t = k as f64 * dt;

        while let Some(&(at, f)) = sched.focus_changes.get(focus_cursor) {
            if at > t {
                break;
            }
            focus = f;
            focus_cursor += 1;
        }
        while sched.tasks.get(first_live).is_some_and(|task| task.record.done_t + ramp <= t) {
            first_live += 1;
        }
        let (mut executing, mut in_action, mut hud) = (None, false, false);
        let mut head_ex = (0.0, 0.0, 0.0);
        for task in &sched.tasks[first_live..] {
            if task.start > t {
                break;
            }
            let r = &task.record;
            if t >= r.command_end_t && t < r.done_t {
                executing = Some(r.task_id);
            }
            in_action |= t < r.done_t;
            hud |= task.actions.iter().any(|a| matches!(a.kind, ActionKind::Gesture(_)) && t >= a.start && t < a.end);
            if !task.actions.is_empty() {
                let w = ((t - task.start) / ramp).min(1.0 - (t - r.done_t) / ramp).clamp(0.0, 1.0);
                let (y, p, ro) = task.head_target;
                head_ex = (y * w, p * w, ro * w);
            }
        }

        let mut dip = 0.0f64;
        let mut braking = false;
        for h in &sched.hazards {
            let (d, b) = dip_at(h, t, &params.brake);
            dip = dip.max(d);
            braking |= b;
        }

        let speed = quantize(ref_v - dip + speed_ou.x, precision::SPEED);
        let lateral = quantize(lat_ou.x, precision::LATERAL);
        drive.push(DriveRow {
            t_s: t,
            position_m: pos,
            speed_kmh: speed,
            lateral_offset_m: lateral,
            brake: braking,
            active_task: executing,
            menu_focus: focus,
        });

        let mut forced = None;
        while sched.console_glances.get(console_cursor).is_some_and(|&s| s <= t) {
            console_cursor += 1;
            forced = Some(truncated_normal(&mut gaze.rng, console_mean, console_mean * 0.25, 0.1));
        }
        let other_factor = if in_action { cp.glance.other_glance_factor } else { 1.0 };
        gaze_rows.push(gaze.sample(t, forced, hud, other_factor, other_mean));
        head_rows.push(HeadRow {
            t_s: t,
            yaw_deg: quantize(head_ex.0 + head_ou[0].x, precision::HEAD),
            pitch_deg: quantize(head_ex.1 + head_ou[1].x, precision::HEAD),
            roll_deg: quantize(head_ex.2 + head_ou[2].x, precision::HEAD),
        });

        let next_pos = pos + speed / 3.6 * dt;
        let p0 = pos;
        let crossing = move |s: f64| if next_pos > p0 { t + (s - p0) / (next_pos - p0) * dt } else { t };
        if road_end_t.is_none() {
            sched.advance(next_pos.min(road.length_m), &crossing);
            if next_pos >= road.length_m {
                road_end_t = Some(crossing(road.length_m));
            }
        }
        pos = next_pos;

        let m_speed = if in_action { cp.speed_noise.task_multiplier } else { 1.0 };
        let m_lat = if in_action { cp.lateral_noise.task_multiplier } else { 1.0 };
        speed_ou.step(m_speed, &mut rng_speed);
        lat_ou.step(m_lat, &mut rng_lat);
        for ou in &mut head_ou {
            ou.step(1.0, &mut rng_head);
        }

        k += 1;
        if let Some(end) = road_end_t {
            let t_next = k as f64 * dt;
            if sched.busy_until <= t_next {
                break;
            }
            if t_next - end > params.max_overrun_s {
                truncated = true;
                break;
            }
        }
    }

    let end_t = k as f64 * dt;
    let tasks = sched
        .tasks
        .iter()
        .map(|task| {
            let mut r = task.record;
            r.done_t = r.done_t.min(end_t).max(r.command_end_t);
            r
        })
        .collect();
    let hazards = sched
        .hazards
        .iter()
        .map(|h| {
            let mut r = h.record;
            if r.brake_onset_t.is_some_and(|b| b >= end_t) {
                r.brake_onset_t = None;
                r.recovered_t = None;
                truncated = true;
            } else if r.recovered_t.is_some_and(|v| v > end_t) {
                r.recovered_t = None;
            }
            r
        })
        .collect();

    Ok(RunLog {
        seed,
        condition,
        road_id: road.id,
        dt_s: dt,
        ref_speed_kmh: ref_v,
        lane_width_m: road.lane_width_m,
        drive,
        gaze: gaze_rows,
        head: head_rows,
        tasks,
        hazards,
        truncated,
    })
}

/// One run of a study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub subject: u32,
    pub condition: Condition,
    pub road_id: u32,
    pub seed: u64,
    pub traits: SubjectTraits,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyPlan {
    pub seed: u64,
    pub n_subjects: u32,
    pub road_ids: Vec<u32>,
    pub conditions: Vec<Condition>,
    /// Ordered by subject, then condition, then road.
    pub runs: Vec<RunSpec>,
}

/// Balanced design: every subject drives every road under every condition.
pub fn plan_study(
    road_ids: &[u32],
    conditions: &[Condition],
    n_subjects: u32,
    params: &DriverParams,
    seed: u64,
) -> Result<StudyPlan, SimError> {
    if n_subjects < 2 {
        return Err(SimError::TooFewSubjects(n_subjects));
    }
    let mut runs = Vec::with_capacity(n_subjects as usize * conditions.len() * road_ids.len());
    for subject in 0..n_subjects {
        let traits = SubjectTraits::draw(seed, subject, params.subject_variability_sd);
        for &condition in conditions {
            for &road_id in road_ids {
                runs.push(RunSpec {
                    subject,
                    condition,
                    road_id,
                    seed: child_seed(seed, subject, condition, road_id),
                    traits,
                });
            }
        }
    }
    Ok(StudyPlan { seed, n_subjects, road_ids: road_ids.to_vec(), conditions: conditions.to_vec(), runs })
}

/// Scenarios and task scripts shared by all runs of a study.
pub struct StudyRunner {
    scenarios: BTreeMap<u32, Scenario>,
    scripts: BTreeMap<(u32, Condition), Vec<PlannedTask>>,
    params: DriverParams,
}

impl StudyRunner {
    pub fn new(scenarios: Vec<Scenario>, conditions: &[Condition], params: DriverParams) -> Result<Self, SimError> {
        params.validate()?;
        let mut scripts = BTreeMap::new();
        for s in &scenarios {
            for &c in conditions {
                if let Some(plan) = plan_for(s, c)? {
                    scripts.insert((s.road().id, c), plan);
                }
            }
        }
        let scenarios = scenarios.into_iter().map(|s| (s.road().id, s)).collect();
        Ok(Self { scenarios, scripts, params })
    }

    pub fn params(&self) -> &DriverParams {
        &self.params
    }

    pub fn scenario(&self, road_id: u32) -> Option<&Scenario> {
        self.scenarios.get(&road_id)
    }

    pub fn run(&self, spec: &RunSpec) -> Result<RunLog, SimError> {
        let scenario = self.scenarios.get(&spec.road_id).ok_or(SimError::MissingRoad(spec.road_id))?;
        let plan = self.scripts.get(&(spec.road_id, spec.condition)).map(Vec::as_slice);
        simulate_planned(scenario, plan, spec.condition, &self.params, &spec.traits, spec.seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyDataset {
    pub plan: StudyPlan,
    pub metrics: Vec<MetricRow>,
}

/// All conditions on built-in roads, metrics computed run by run.
pub fn simulate_study(
    road_ids: &[u32],
    n_subjects: u32,
    params: &DriverParams,
    seed: u64,
) -> Result<StudyDataset, SimError> {
    let plan = plan_study(road_ids, &Condition::ALL, n_subjects, params, seed)?;
    let scenarios = road_ids.iter().map(|&r| builtin_scenario(r)).collect::<Result<Vec<_>, _>>()?;
    let runner = StudyRunner::new(scenarios, &Condition::ALL, *params)?;
    let mut metrics = Vec::new();
    for spec in &plan.runs {
        let log = runner.run(spec)?;
        metrics.extend(run_metrics(&log, spec.subject, &MetricsConfig::default())?);
    }
    Ok(StudyDataset { plan, metrics })
}
