//! Distraction and driving-performance measures over run logs.
//!
//! Every function here is a pure reduction over log rows. [`run_metrics`]
//! assembles the per-run metric table consumed by [`crate::stats`].

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use libm::sqrt;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::runlog::{Aoi, Condition, DriveRow, GazeRow, HazardRecord, HeadRow, RunLog, Selection, TaskRecord, Window};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("window selection contains no rows")]
    EmptyWindow,
    #[error("log is empty")]
    EmptyLog,
    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("task {task}: done at {done_t} s precedes command end at {command_end_t} s")]
    InvertedTask { task: u16, command_end_t: f64, done_t: f64 },
}

fn rms(mut values: impl Iterator<Item = f64>) -> Result<f64, MetricError> {
    let first = values.next().ok_or(MetricError::EmptyWindow)?;
    let (sum, n) = values.fold((first * first, 1usize), |(s, n), v| (s + v * v, n + 1));
    Ok(sqrt(sum / n as f64))
}

/// Root-mean-square deviation of speed from the reference over the selection.
pub fn speed_rmse(rows: &[DriveRow], ref_speed_kmh: f64, selection: &Selection) -> Result<f64, MetricError> {
    rms(rows.iter().filter(|r| selection.selects(r.t_s)).map(|r| r.speed_kmh - ref_speed_kmh))
}

/// Root-mean-square lateral offset from the lane centre over the selection.
pub fn lateral_rmse(rows: &[DriveRow], selection: &Selection) -> Result<f64, MetricError> {
    rms(rows.iter().filter(|r| selection.selects(r.t_s)).map(|r| r.lateral_offset_m))
}

/// Lateral RMSE as a percentage of the half lane width.
pub fn lateral_rmse_pct(rmse_m: f64, lane_width_m: f64) -> f64 {
    rmse_m / (lane_width_m / 2.0) * 100.0
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BrakeTimes {
    pub times_s: Vec<f64>,
    /// Hazards with no brake before the run ended.
    pub missing: usize,
}

pub fn brake_response_times(hazards: &[HazardRecord]) -> BrakeTimes {
    let mut out = BrakeTimes::default();
    for h in hazards {
        match h.brake_onset_t {
            Some(b) => out.times_s.push(b - h.onset_t),
            None => out.missing += 1,
        }
    }
    out
}

pub fn task_completion_times(tasks: &[TaskRecord]) -> Result<Vec<f64>, MetricError> {
    tasks
        .iter()
        .map(|t| {
            if t.done_t < t.command_end_t {
                Err(MetricError::InvertedTask { task: t.task_id, command_end_t: t.command_end_t, done_t: t.done_t })
            } else {
                Ok(t.done_t - t.command_end_t)
            }
        })
        .collect()
}

/// Percentage of samples (hence of dwell time at a fixed rate) labelled `aoi`.
pub fn aoi_attention_ratio(rows: &[GazeRow], aoi: Aoi) -> Result<f64, MetricError> {
    if rows.is_empty() {
        return Err(MetricError::EmptyLog);
    }
    let hits = rows.iter().filter(|r| r.aoi == aoi).count();
    Ok(100.0 * hits as f64 / rows.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixationConfig {
    pub dispersion_px: f64,
    pub min_duration_ms: f64,
}

impl Default for FixationConfig {
    fn default() -> Self {
        Self { dispersion_px: 50.0, min_duration_ms: 100.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fixation {
    pub start_t: f64,
    pub end_t: f64,
    pub x_px: f64,
    pub y_px: f64,
}

impl Fixation {
    pub fn duration_ms(&self) -> f64 {
        (self.end_t - self.start_t) * 1000.0
    }
}

/// Sample period of a fixed-rate stream, inferred from its span.
fn sample_period(rows: &[GazeRow]) -> Option<f64> {
    (rows.len() >= 2).then(|| (rows[rows.len() - 1].t_s - rows[0].t_s) / (rows.len() - 1) as f64)
}

#[derive(Clone, Copy)]
struct BBox {
    min_x: f64,
    max_x: f64,
    min_y: f64,
    max_y: f64,
}

impl BBox {
    fn of(r: &GazeRow) -> Self {
        Self { min_x: r.x_px, max_x: r.x_px, min_y: r.y_px, max_y: r.y_px }
    }

    fn grow(mut self, r: &GazeRow) -> Self {
        self.min_x = self.min_x.min(r.x_px);
        self.max_x = self.max_x.max(r.x_px);
        self.min_y = self.min_y.min(r.y_px);
        self.max_y = self.max_y.max(r.y_px);
        self
    }

    fn diagonal(&self) -> f64 {
        let (dx, dy) = (self.max_x - self.min_x, self.max_y - self.min_y);
        sqrt(dx * dx + dy * dy)
    }
}

/// Dispersion-threshold fixation identification.
///
/// A window of samples counts as a fixation when the diagonal of its bounding
/// box is within `dispersion_px` and its dwell (samples × period) reaches
/// `min_duration_ms`. Windows are grown greedily left to right and never
/// overlap.
pub fn detect_fixations(rows: &[GazeRow], config: &FixationConfig) -> Vec<Fixation> {
    let mut out = Vec::new();
    let Some(period) = sample_period(rows).filter(|p| *p > 0.0) else {
        return out;
    };
    let min_len = (libm::ceil(config.min_duration_ms / 1000.0 / period - 1e-9) as usize).max(1);
    let within = |b: &BBox| b.diagonal() <= config.dispersion_px;
    let mut i = 0;
    while i + min_len <= rows.len() {
        let bbox = rows[i + 1..i + min_len].iter().fold(BBox::of(&rows[i]), |b, r| b.grow(r));
        if !within(&bbox) {
            i += 1;
            continue;
        }
        let mut j = i + min_len;
        let mut bbox = bbox;
        while j < rows.len() {
            let grown = bbox.grow(&rows[j]);
            if !within(&grown) {
                break;
            }
            bbox = grown;
            j += 1;
        }
        let n = (j - i) as f64;
        let (sx, sy) = rows[i..j].iter().fold((0.0, 0.0), |(sx, sy), r| (sx + r.x_px, sy + r.y_px));
        out.push(Fixation { start_t: rows[i].t_s, end_t: rows[i].t_s + n * period, x_px: sx / n, y_px: sy / n });
        i = j;
    }
    out
}

fn population_sd(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let (sum, n) = values.clone().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    let mean = sum / n as f64;
    sqrt(values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64)
}

/// Population standard deviations of gaze x and y, in pixels.
pub fn eye_activity(rows: &[GazeRow]) -> Result<(f64, f64), MetricError> {
    if rows.len() < 2 {
        return Err(MetricError::TooFewRows { needed: 2, got: rows.len() });
    }
    Ok((population_sd(rows.iter().map(|r| r.x_px)), population_sd(rows.iter().map(|r| r.y_px))))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadExtrema {
    pub yaw_deg: f64,
    pub pitch_deg: f64,
    pub roll_deg: f64,
}

/// Signed value of largest magnitude; ties keep the earliest sample.
fn signed_extreme(values: impl Iterator<Item = f64>) -> f64 {
    values.fold(0.0, |best: f64, v| if libm::fabs(v) > libm::fabs(best) { v } else { best })
}

/// Per window, the signed extreme of each head axis.
pub fn head_extrema(rows: &[HeadRow], windows: &[Window]) -> Result<Vec<HeadExtrema>, MetricError> {
    windows
        .iter()
        .map(|w| {
            let lo = rows.partition_point(|r| r.t_s < w.start);
            let hi = rows.partition_point(|r| r.t_s < w.end);
            let span = &rows[lo..hi.max(lo)];
            if span.is_empty() {
                return Err(MetricError::EmptyWindow);
            }
            Ok(HeadExtrema {
                yaw_deg: signed_extreme(span.iter().map(|r| r.yaw_deg)),
                pitch_deg: signed_extreme(span.iter().map(|r| r.pitch_deg)),
                roll_deg: signed_extreme(span.iter().map(|r| r.roll_deg)),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricName {
    SpeedRmse,
    LateralRmse,
    LateralRmsePct,
    BrakeResponseTime,
    TaskCompletionTime,
    ForwardAttention,
    ConsoleAttention,
    FixationDuration,
    EyeActivityH,
    EyeActivityV,
    HeadYaw,
    HeadPitch,
    HeadRoll,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Unit {
    #[serde(rename = "km/h")]
    Kmh,
    #[serde(rename = "m")]
    M,
    #[serde(rename = "s")]
    S,
    #[serde(rename = "%")]
    Percent,
    #[serde(rename = "ms")]
    Ms,
    #[serde(rename = "px")]
    Px,
    #[serde(rename = "deg")]
    Deg,
}

impl Unit {
    pub fn symbol(self) -> &'static str {
        match self {
            Unit::Kmh => "km/h",
            Unit::M => "m",
            Unit::S => "s",
            Unit::Percent => "%",
            Unit::Ms => "ms",
            Unit::Px => "px",
            Unit::Deg => "deg",
        }
    }
}

impl MetricName {
    pub const ALL: [MetricName; 13] = [
        MetricName::SpeedRmse,
        MetricName::LateralRmse,
        MetricName::LateralRmsePct,
        MetricName::BrakeResponseTime,
        MetricName::TaskCompletionTime,
        MetricName::ForwardAttention,
        MetricName::ConsoleAttention,
        MetricName::FixationDuration,
        MetricName::EyeActivityH,
        MetricName::EyeActivityV,
        MetricName::HeadYaw,
        MetricName::HeadPitch,
        MetricName::HeadRoll,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MetricName::SpeedRmse => "speed_rmse",
            MetricName::LateralRmse => "lateral_rmse",
            MetricName::LateralRmsePct => "lateral_rmse_pct",
            MetricName::BrakeResponseTime => "brake_response_time",
            MetricName::TaskCompletionTime => "task_completion_time",
            MetricName::ForwardAttention => "forward_attention",
            MetricName::ConsoleAttention => "console_attention",
            MetricName::FixationDuration => "fixation_duration",
            MetricName::EyeActivityH => "eye_activity_h",
            MetricName::EyeActivityV => "eye_activity_v",
            MetricName::HeadYaw => "head_yaw",
            MetricName::HeadPitch => "head_pitch",
            MetricName::HeadRoll => "head_roll",
        }
    }

    pub fn unit(self) -> Unit {
        match self {
            MetricName::SpeedRmse => Unit::Kmh,
            MetricName::LateralRmse => Unit::M,
            MetricName::BrakeResponseTime | MetricName::TaskCompletionTime => Unit::S,
            MetricName::LateralRmsePct | MetricName::ForwardAttention | MetricName::ConsoleAttention => Unit::Percent,
            MetricName::FixationDuration => Unit::Ms,
            MetricName::EyeActivityH | MetricName::EyeActivityV => Unit::Px,
            MetricName::HeadYaw | MetricName::HeadPitch | MetricName::HeadRoll => Unit::Deg,
        }
    }
}

impl fmt::Display for MetricName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricName {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        MetricName::ALL.into_iter().find(|m| m.name() == s).ok_or(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub subject: u32,
    pub condition: Condition,
    pub road: u32,
    pub metric: MetricName,
    pub value: f64,
}

impl MetricRow {
    pub fn unit(&self) -> Unit {
        self.metric.unit()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsConfig {
    pub fixation: FixationConfig,
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Driving-performance rows use the whole run for baseline and the task
/// execution windows otherwise; hazard responses are excluded in both cases.
pub fn rmse_selection(log: &RunLog) -> Selection {
    let base = match log.condition {
        Condition::Baseline => Selection::whole_run(),
        _ => Selection::of(log.task_windows().into_iter().filter(|w| !w.is_empty()).collect()),
    };
    base.excluding(log.hazard_windows())
}

/// All metrics of one run. Per-event measures are averaged within the run;
/// measures with no events (task time and head extrema in baseline) are
/// omitted.
pub fn run_metrics(log: &RunLog, subject: u32, config: &MetricsConfig) -> Result<Vec<MetricRow>, MetricError> {
    let mut rows = Vec::new();
    let mut push = |metric, value| {
        rows.push(MetricRow { subject, condition: log.condition, road: log.road_id, metric, value });
    };

    let sel = rmse_selection(log);
    push(MetricName::SpeedRmse, speed_rmse(&log.drive, log.ref_speed_kmh, &sel)?);
    let lat = lateral_rmse(&log.drive, &sel)?;
    push(MetricName::LateralRmse, lat);
    push(MetricName::LateralRmsePct, lateral_rmse_pct(lat, log.lane_width_m));

    if let Some(v) = mean(&brake_response_times(&log.hazards).times_s) {
        push(MetricName::BrakeResponseTime, v);
    }
    if let Some(v) = mean(&task_completion_times(&log.tasks)?) {
        push(MetricName::TaskCompletionTime, v);
    }

    push(MetricName::ForwardAttention, aoi_attention_ratio(&log.gaze, Aoi::Forward)?);
    push(MetricName::ConsoleAttention, aoi_attention_ratio(&log.gaze, Aoi::Console)?);
    let durations: Vec<f64> = detect_fixations(&log.gaze, &config.fixation).iter().map(Fixation::duration_ms).collect();
    if let Some(v) = mean(&durations) {
        push(MetricName::FixationDuration, v);
    }
    let (h, v) = eye_activity(&log.gaze)?;
    push(MetricName::EyeActivityH, h);
    push(MetricName::EyeActivityV, v);

    let windows: Vec<Window> = log.task_windows().into_iter().filter(|w| !w.is_empty()).collect();
    let extrema = head_extrema(&log.head, &windows)?;
    let axis = |f: fn(&HeadExtrema) -> f64| mean(&extrema.iter().map(f).collect::<Vec<_>>());
    if let Some(v) = axis(|e| e.yaw_deg) {
        push(MetricName::HeadYaw, v);
    }
    if let Some(v) = axis(|e| e.pitch_deg) {
        push(MetricName::HeadPitch, v);
    }
    if let Some(v) = axis(|e| e.roll_deg) {
        push(MetricName::HeadRoll, v);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::menu::MenuFocus;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn drive(speeds: &[f64], lateral: &[f64]) -> Vec<DriveRow> {
        speeds
            .iter()
            .zip(lateral)
            .enumerate()
            .map(|(k, (&s, &l))| DriveRow {
                t_s: k as f64 / 60.0,
                position_m: 0.0,
                speed_kmh: s,
                lateral_offset_m: l,
                brake: false,
                active_task: None,
                menu_focus: MenuFocus::Top,
            })
            .collect()
    }

    fn gaze(points: &[(f64, f64)], period: f64) -> Vec<GazeRow> {
        points
            .iter()
            .enumerate()
            .map(|(k, &(x, y))| GazeRow { t_s: k as f64 * period, x_px: x, y_px: y, aoi: Aoi::Forward })
            .collect()
    }

    #[test]
    fn rmse_examples() {
        let all = Selection::whole_run();
        let rows = drive(&[80.0, 82.0, 78.0, 80.0], &[0.0; 4]);
        assert_relative_eq!(speed_rmse(&rows, 80.0, &all).unwrap(), core::f64::consts::SQRT_2, epsilon = 1e-12);
        assert_eq!(speed_rmse(&drive(&[80.0; 5], &[0.0; 5]), 80.0, &all).unwrap(), 0.0);
        assert_eq!(speed_rmse(&drive(&[75.0], &[0.0]), 80.0, &all).unwrap(), 5.0);
        assert_relative_eq!(lateral_rmse(&drive(&[0.0; 2], &[0.3, -0.3]), &all).unwrap(), 0.3);
        assert_eq!(lateral_rmse(&drive(&[0.0], &[0.5]), &all).unwrap(), 0.5);
        assert_eq!(lateral_rmse(&drive(&[0.0; 3], &[0.0; 3]), &all).unwrap(), 0.0);
        let none = Selection::of(alloc::vec![Window::new(10.0, 11.0)]);
        assert_eq!(speed_rmse(&rows, 80.0, &none), Err(MetricError::EmptyWindow));
        assert_relative_eq!(lateral_rmse_pct(0.35, 3.5), 20.0);
    }

    #[test]
    fn selection_windows() {
        let rows = drive(&[80.0, 90.0, 70.0, 80.0], &[0.0; 4]);
        // rows at t = 0, 1/60, 2/60, 3/60; keep the middle two, then drop the third
        let sel = Selection::of(alloc::vec![Window::new(0.01, 0.04)]);
        assert_eq!(speed_rmse(&rows, 80.0, &sel).unwrap(), 10.0);
        let sel = sel.excluding(alloc::vec![Window::new(0.03, 0.04)]);
        assert_eq!(speed_rmse(&rows, 80.0, &sel).unwrap(), 10.0);
    }

    #[test]
    fn brake_and_task_times() {
        let h = |onset, brake| HazardRecord { hazard_id: 1, onset_t: onset, brake_onset_t: brake, recovered_t: None };
        let b = brake_response_times(&[h(10.0, Some(10.8)), h(5.0, Some(5.0)), h(7.0, None)]);
        assert_relative_eq!(b.times_s[0], 0.8, epsilon = 1e-12);
        assert_eq!(b.times_s[1], 0.0);
        assert_eq!(b.missing, 1);

        let t = |c, d| TaskRecord { task_id: 3, trigger_t: c - 2.0, command_end_t: c, done_t: d };
        assert_eq!(task_completion_times(&[t(5.0, 8.5), t(5.0, 5.0)]).unwrap(), [3.5, 0.0]);
        assert!(matches!(task_completion_times(&[t(5.0, 4.0)]), Err(MetricError::InvertedTask { task: 3, .. })));
    }

    #[test]
    fn aoi_ratio() {
        let mut rows = gaze(&[(0.0, 0.0); 10], 1.0 / 60.0);
        assert_eq!(aoi_attention_ratio(&rows, Aoi::Forward).unwrap(), 100.0);
        for r in &mut rows[5..] {
            r.aoi = Aoi::Console;
        }
        assert_eq!(aoi_attention_ratio(&rows, Aoi::Forward).unwrap(), 50.0);
        assert_eq!(aoi_attention_ratio(&[], Aoi::Forward), Err(MetricError::EmptyLog));
    }

    #[test]
    fn eye_activity_examples() {
        assert_eq!(eye_activity(&gaze(&[(3.0, 4.0); 6], 0.1)).unwrap(), (0.0, 0.0));
        assert_eq!(eye_activity(&gaze(&[(0.0, 1.0), (2.0, 1.0)], 0.1)).unwrap(), (1.0, 0.0));
        assert_eq!(eye_activity(&gaze(&[(7.0, 1.0), (3.0, 1.0)], 0.1)).unwrap(), (2.0, 0.0));
        assert!(matches!(eye_activity(&gaze(&[(0.0, 0.0)], 0.1)), Err(MetricError::TooFewRows { .. })));
    }

    #[test]
    fn head_extrema_examples() {
        let head = |yaw: &[f64]| -> Vec<HeadRow> {
            yaw.iter()
                .enumerate()
                .map(|(k, &y)| HeadRow { t_s: k as f64, yaw_deg: y, pitch_deg: 0.0, roll_deg: 0.0 })
                .collect()
        };
        let w = [Window::new(0.0, 10.0)];
        assert_eq!(head_extrema(&head(&[-5.1, 2.0, -3.0]), &w).unwrap()[0].yaw_deg, -5.1);
        assert_eq!(head_extrema(&head(&[0.0, 0.0]), &w).unwrap()[0].yaw_deg, 0.0);
        assert_eq!(head_extrema(&head(&[3.0, -3.0]), &w).unwrap()[0].yaw_deg, 3.0);
        assert_eq!(head_extrema(&head(&[1.0]), &[Window::new(4.0, 5.0)]), Err(MetricError::EmptyWindow));
    }

    #[test]
    fn fixation_examples() {
        let period = 1.0 / 60.0;
        let still = gaze(&[(400.0, 300.0); 30], period);
        let f = detect_fixations(&still, &FixationConfig::default());
        assert_eq!(f.len(), 1);
        assert_relative_eq!(f[0].duration_ms(), 500.0, epsilon = 1e-9);

        let mut pts = alloc::vec![(100.0, 100.0); 20];
        pts.extend([(900.0, 500.0); 20]);
        let f = detect_fixations(&gaze(&pts, period), &FixationConfig::default());
        assert_eq!(f.len(), 2);
        assert_eq!((f[0].x_px, f[1].x_px), (100.0, 900.0));

        let zigzag: Vec<(f64, f64)> = (0..60).map(|k| ((k % 2) as f64 * 200.0, 0.0)).collect();
        assert!(detect_fixations(&gaze(&zigzag, period), &FixationConfig::default()).is_empty());
        assert!(detect_fixations(&gaze(&[(0.0, 0.0); 5], period), &FixationConfig::default()).is_empty());
    }

    fn diag(rows: &[GazeRow]) -> f64 {
        rows[1..].iter().fold(BBox::of(&rows[0]), |b, r| b.grow(r)).diagonal()
    }

    proptest! {
        #[test]
        fn fixations_are_valid_disjoint_and_maximal(
            pts in proptest::collection::vec((0.0f64..120.0, 0.0f64..120.0), 1..120),
            min_ms in 30.0f64..200.0,
        ) {
            let period = 1.0 / 60.0;
            let rows = gaze(&pts, period);
            let cfg = FixationConfig { dispersion_px: 50.0, min_duration_ms: min_ms };
            let fix = detect_fixations(&rows, &cfg);
            let index = |t: f64| libm::round(t / period) as usize;
            let mut prev_end = 0;
            for f in &fix {
                let (i, j) = (index(f.start_t), index(f.end_t));
                prop_assert!(i >= prev_end && j > i);
                prop_assert!(f.duration_ms() >= min_ms - 1e-6);
                prop_assert!(diag(&rows[i..j]) <= 50.0);
                if j < rows.len() {
                    prop_assert!(diag(&rows[i..=j]) > 50.0, "extendable to the right");
                }
                prev_end = j;
            }
            // brute force: any qualifying window must overlap a reported fixation
            let min_len = (libm::ceil(min_ms / 1000.0 / period - 1e-9) as usize).max(1);
            for i in 0..rows.len() {
                if i + min_len <= rows.len() && diag(&rows[i..i + min_len]) <= 50.0 {
                    let covered = fix.iter().any(|f| index(f.start_t) < i + min_len && index(f.end_t) > i);
                    prop_assert!(covered, "qualifying window at {} missed", i);
                }
            }
        }

        #[test]
        fn aoi_partition_sums_to_100(labels in proptest::collection::vec(0usize..3, 1..200)) {
            let rows: Vec<GazeRow> = labels.iter().enumerate()
                .map(|(k, &a)| GazeRow { t_s: k as f64, x_px: 0.0, y_px: 0.0, aoi: Aoi::ALL[a] })
                .collect();
            let total: f64 = Aoi::ALL.iter().map(|&a| aoi_attention_ratio(&rows, a).unwrap()).sum();
            prop_assert!((total - 100.0).abs() < 1e-9);
        }

        #[test]
        fn head_extreme_dominates(yaw in proptest::collection::vec(-30.0f64..30.0, 1..50)) {
            let rows: Vec<HeadRow> = yaw.iter().enumerate()
                .map(|(k, &y)| HeadRow { t_s: k as f64, yaw_deg: y, pitch_deg: -y, roll_deg: 0.0 })
                .collect();
            let e = head_extrema(&rows, &[Window::ALL]).unwrap()[0];
            for &y in &yaw {
                prop_assert!(e.yaw_deg.abs() >= y.abs());
            }
            prop_assert_eq!(e.pitch_deg, -e.yaw_deg);
        }
    }
}
