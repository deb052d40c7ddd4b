//! Bend-sensor samples and finger classification.
//!
//! Each glove reports five bend values per frame, from 0 (fully closed) to 63
//! (fully open). A finger counts as spread when its bend is strictly above the
//! configured threshold. Only the number of spread fingers is ever used
//! downstream; which fingers they are does not matter.

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest value a bend sensor reports.
pub const BEND_MAX: u8 = 63;
/// Bend used by synthetic streams and the virtual glove for a spread finger.
pub const SPREAD_BEND: u8 = 60;
/// Bend used by synthetic streams and the virtual glove for a closed finger.
pub const CLOSED_BEND: u8 = 5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GloveError {
    #[error("bend value {0} outside 0..=63")]
    BendOutOfRange(u8),
    #[error("threshold {0} must lie strictly between 0 and 63")]
    InvalidThreshold(u8),
    #[error("sample rate {0} Hz must be positive and finite")]
    InvalidSampleRate(f64),
    #[error("timestamp {later} ms does not follow {earlier} ms")]
    NonMonotonicTimestamp { earlier: f64, later: f64 },
    #[error("script step {step}: finger count {count} exceeds 5")]
    CountOutOfRange { step: usize, count: u8 },
    #[error("script step {step}: hold duration {hold_ms} ms must be positive")]
    InvalidHold { step: usize, hold_ms: f64 },
    #[error("noise standard deviation {0} must be finite and non-negative")]
    InvalidNoise(f64),
    #[error("key map must name ten distinct non-empty keys")]
    InvalidKeyMap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hand {
    Left,
    Right,
}

impl Hand {
    pub const fn name(self) -> &'static str {
        match self {
            Hand::Left => "left",
            Hand::Right => "right",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FingerPose {
    Spread,
    Closed,
}

/// One frame from one glove: thumb, index, middle, ring, little.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BendSample {
    pub hand: Hand,
    pub bends: [u8; 5],
    pub timestamp_ms: f64,
}

impl BendSample {
    pub fn new(hand: Hand, bends: [u8; 5], timestamp_ms: f64) -> Result<Self, GloveError> {
        let sample = Self { hand, bends, timestamp_ms };
        sample.validate()?;
        Ok(sample)
    }

    pub fn validate(&self) -> Result<(), GloveError> {
        match self.bends.iter().find(|&&b| b > BEND_MAX) {
            Some(&b) => Err(GloveError::BendOutOfRange(b)),
            None => Ok(()),
        }
    }
}

/// Checks that timestamps strictly increase per hand.
pub fn check_stream_order<'a>(samples: impl IntoIterator<Item = &'a BendSample>) -> Result<(), GloveError> {
    let mut last: [Option<f64>; 2] = [None, None];
    for s in samples {
        let slot = &mut last[s.hand as usize];
        if let Some(earlier) = *slot {
            if s.timestamp_ms <= earlier {
                return Err(GloveError::NonMonotonicTimestamp { earlier, later: s.timestamp_ms });
            }
        }
        *slot = Some(s.timestamp_ms);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GloveConfig {
    threshold: u8,
    sample_rate_hz: f64,
}

impl GloveConfig {
    pub fn new(threshold: u8, sample_rate_hz: f64) -> Result<Self, GloveError> {
        if threshold == 0 || threshold >= BEND_MAX {
            return Err(GloveError::InvalidThreshold(threshold));
        }
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(GloveError::InvalidSampleRate(sample_rate_hz));
        }
        Ok(Self { threshold, sample_rate_hz })
    }

    pub fn threshold(&self) -> u8 {
        self.threshold
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn frame_period_ms(&self) -> f64 {
        1000.0 / self.sample_rate_hz
    }
}

impl Default for GloveConfig {
    fn default() -> Self {
        Self { threshold: 30, sample_rate_hz: 60.0 }
    }
}

/// Spread iff `bend > threshold`.
pub fn classify_finger(bend: u8, config: &GloveConfig) -> Result<FingerPose, GloveError> {
    if bend > BEND_MAX {
        return Err(GloveError::BendOutOfRange(bend));
    }
    Ok(if bend > config.threshold { FingerPose::Spread } else { FingerPose::Closed })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct HandPose {
    hand: Hand,
    poses: [FingerPose; 5],
    spread_count: u8,
}

impl HandPose {
    pub fn hand(&self) -> Hand {
        self.hand
    }

    pub fn poses(&self) -> &[FingerPose; 5] {
        &self.poses
    }

    pub fn spread_count(&self) -> u8 {
        self.spread_count
    }

    /// A pose with all fingers closed (hand resting on the grip).
    pub fn closed(hand: Hand) -> Self {
        Self { hand, poses: [FingerPose::Closed; 5], spread_count: 0 }
    }
}

pub fn hand_pose(sample: &BendSample, config: &GloveConfig) -> Result<HandPose, GloveError> {
    let mut poses = [FingerPose::Closed; 5];
    for (pose, &bend) in poses.iter_mut().zip(&sample.bends) {
        *pose = classify_finger(bend, config)?;
    }
    let spread_count = poses.iter().filter(|&&p| p == FingerPose::Spread).count() as u8;
    Ok(HandPose { hand: sample.hand, poses, spread_count })
}

/// Bends realizing `count` spread fingers: the first `count` fingers open.
pub fn bends_for_count(count: u8) -> [u8; 5] {
    let mut bends = [CLOSED_BEND; 5];
    for b in bends.iter_mut().take(count as usize) {
        *b = SPREAD_BEND;
    }
    bends
}

/// One step of a synthetic glove script: finger counts held for `hold_ms`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthStep {
    pub left: u8,
    pub right: u8,
    pub hold_ms: f64,
}

impl SynthStep {
    pub const fn new(left: u8, right: u8, hold_ms: f64) -> Self {
        Self { left, right, hold_ms }
    }
}

/// Frame pair (left, right) of a glove stream.
pub type FramePair = (BendSample, BendSample);

/// Expands a count script into glove frames at the configured sample rate.
///
/// Each step lasts `round(hold_ms * rate / 1000)` frames; timestamps are
/// `k * 1000 / rate` over the whole stream.
pub fn synth_stream(script: &[SynthStep], config: &GloveConfig) -> Result<Vec<FramePair>, GloveError> {
    let mut frames = Vec::new();
    let period = config.frame_period_ms();
    let mut k: u64 = 0;
    for (step, s) in script.iter().enumerate() {
        for count in [s.left, s.right] {
            if count > 5 {
                return Err(GloveError::CountOutOfRange { step, count });
            }
        }
        if !(s.hold_ms.is_finite() && s.hold_ms > 0.0) {
            return Err(GloveError::InvalidHold { step, hold_ms: s.hold_ms });
        }
        let n = libm::round(s.hold_ms * config.sample_rate_hz / 1000.0) as u64;
        let (lb, rb) = (bends_for_count(s.left), bends_for_count(s.right));
        for _ in 0..n {
            let t = k as f64 * period;
            frames.push((
                BendSample { hand: Hand::Left, bends: lb, timestamp_ms: t },
                BendSample { hand: Hand::Right, bends: rb, timestamp_ms: t },
            ));
            k += 1;
        }
    }
    Ok(frames)
}

/// Additive Gaussian sensor noise, rounded to integers and clamped to 0..=63.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorNoise {
    sd: f64,
}

impl SensorNoise {
    pub fn new(sd: f64) -> Result<Self, GloveError> {
        if !(sd.is_finite() && sd >= 0.0) {
            return Err(GloveError::InvalidNoise(sd));
        }
        Ok(Self { sd })
    }

    pub fn sd(&self) -> f64 {
        self.sd
    }

    pub fn apply<R: Rng + ?Sized>(&self, sample: &BendSample, rng: &mut R) -> BendSample {
        if self.sd == 0.0 {
            return *sample;
        }
        let normal = Normal::new(0.0, self.sd).expect("validated sd");
        let mut out = *sample;
        for b in out.bends.iter_mut() {
            let noisy = *b as f64 + libm::round(normal.sample(rng));
            *b = noisy.clamp(0.0, BEND_MAX as f64) as u8;
        }
        out
    }
}

impl Default for SensorNoise {
    fn default() -> Self {
        Self { sd: 3.0 }
    }
}

/// Keyboard stand-in for the gloves: one key per finger, held = spread.
///
/// Key names are browser `KeyboardEvent.code` strings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyMap {
    pub left: [String; 5],
    pub right: [String; 5],
}

impl Default for KeyMap {
    fn default() -> Self {
        let keys = |names: [&str; 5]| names.map(String::from);
        Self {
            // left little..thumb on the home row, right thumb..little mirrored
            left: keys(["KeyF", "KeyD", "KeyS", "KeyA", "KeyQ"]),
            right: keys(["KeyJ", "KeyK", "KeyL", "Semicolon", "KeyP"]),
        }
    }
}

impl KeyMap {
    pub fn validate(&self) -> Result<(), GloveError> {
        let all: Vec<&String> = self.left.iter().chain(&self.right).collect();
        for (i, k) in all.iter().enumerate() {
            if k.is_empty() || all[..i].contains(k) {
                return Err(GloveError::InvalidKeyMap);
            }
        }
        Ok(())
    }

    /// Converts a held-key set into a frame pair. Unmapped keys are ignored.
    pub fn frame<S: AsRef<str>>(&self, pressed: &[S], timestamp_ms: f64) -> FramePair {
        let bends = |keys: &[String; 5]| {
            let mut bends = [CLOSED_BEND; 5];
            for (b, key) in bends.iter_mut().zip(keys) {
                if pressed.iter().any(|p| p.as_ref() == key) {
                    *b = SPREAD_BEND;
                }
            }
            bends
        };
        (
            BendSample { hand: Hand::Left, bends: bends(&self.left), timestamp_ms },
            BendSample { hand: Hand::Right, bends: bends(&self.right), timestamp_ms },
        )
    }
}
