//! Debounced finger-count gestures.
//!
//! A frame contributes the pair `(left count, right count)`. A non-resting
//! pair held for `dwell_frames` consecutive frames emits one event; the
//! recognizer then latches until both hands return to the grip `(0, 0)`.
//!
//! Two-hand patterns take precedence over single-hand counts:
//!
//! | pair     | event                |
//! |----------|----------------------|
//! | (5, 5)   | `SystemToggle`       |
//! | (1, 1)   | `TopMenu`            |
//! | (0, 5)   | `Cancel`             |
//! | (n, 0)   | `HandCount(Left, n)` |
//! | (0, n)   | `HandCount(Right, n)`|
//!
//! Any other two-hand pair is ignored and counted in
//! [`RecognizerState::unrecognized`].

use serde::{Deserialize, Serialize};

use crate::gesture_input::{Hand, HandPose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Gesture {
    HandCount { hand: Hand, count: u8 },
    SystemToggle,
    Cancel,
    TopMenu,
}

impl Gesture {
    pub const fn right(count: u8) -> Self {
        Gesture::HandCount { hand: Hand::Right, count }
    }

    pub const fn left(count: u8) -> Self {
        Gesture::HandCount { hand: Hand::Left, count }
    }

    /// Maps a held `(left, right)` pair to its gesture, if any.
    pub fn from_counts(left: u8, right: u8) -> Option<Self> {
        match (left, right) {
            (5, 5) => Some(Gesture::SystemToggle),
            (1, 1) => Some(Gesture::TopMenu),
            (0, 5) => Some(Gesture::Cancel),
            (n @ 1..=5, 0) => Some(Gesture::left(n)),
            (0, n @ 1..=4) => Some(Gesture::right(n)),
            _ => None,
        }
    }

    /// The `(left, right)` pair that produces this gesture.
    pub fn counts(self) -> (u8, u8) {
        match self {
            Gesture::SystemToggle => (5, 5),
            Gesture::TopMenu => (1, 1),
            Gesture::Cancel => (0, 5),
            Gesture::HandCount { hand: Hand::Left, count } => (count, 0),
            Gesture::HandCount { hand: Hand::Right, count } => (0, count),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GestureEvent {
    pub gesture: Gesture,
    pub timestamp_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecognizerConfig {
    dwell_frames: u32,
    require_release: bool,
}

impl RecognizerConfig {
    /// `None` when `dwell_frames` is zero.
    pub fn new(dwell_frames: u32, require_release: bool) -> Option<Self> {
        (dwell_frames >= 1).then_some(Self { dwell_frames, require_release })
    }

    pub fn dwell_frames(&self) -> u32 {
        self.dwell_frames
    }

    pub fn require_release(&self) -> bool {
        self.require_release
    }
}

impl Default for RecognizerConfig {
    fn default() -> Self {
        // 12 frames is 200 ms at 60 Hz
        Self { dwell_frames: 12, require_release: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Idle,
    /// `frames_held` saturates at the dwell once an unmapped pair has been counted.
    Holding {
        candidate: (u8, u8),
        frames_held: u32,
    },
    /// Emitted for `from`; waiting for release.
    Latched {
        from: (u8, u8),
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecognizerState {
    pub phase: Phase,
    pub last_event: Option<GestureEvent>,
    /// Pairs held past the dwell that map to no gesture.
    pub unrecognized: u32,
}

impl Default for RecognizerState {
    fn default() -> Self {
        Self::new()
    }
}

impl RecognizerState {
    pub const fn new() -> Self {
        Self { phase: Phase::Idle, last_event: None, unrecognized: 0 }
    }

    /// Back to `Idle` with counters and history cleared.
    pub fn reset(self) -> Self {
        Self::new()
    }

    /// Advances one frame.
    pub fn feed(
        self,
        left: &HandPose,
        right: &HandPose,
        timestamp_ms: f64,
        config: &RecognizerConfig,
    ) -> (Self, Option<GestureEvent>) {
        debug_assert_eq!(left.hand(), Hand::Left);
        debug_assert_eq!(right.hand(), Hand::Right);
        let counts = (left.spread_count(), right.spread_count());
        let mut next = self;
        if counts == (0, 0) {
            next.phase = Phase::Idle;
            return (next, None);
        }
        let frames_held = match self.phase {
            Phase::Latched { from } if config.require_release || from == counts => {
                return (next, None);
            }
            Phase::Holding { candidate, frames_held } if candidate == counts => {
                if frames_held >= config.dwell_frames {
                    // unmapped pair already counted for this hold
                    return (next, None);
                }
                frames_held + 1
            }
            _ => 1,
        };
        if frames_held < config.dwell_frames {
            next.phase = Phase::Holding { candidate: counts, frames_held };
            return (next, None);
        }
        match Gesture::from_counts(counts.0, counts.1) {
            Some(gesture) => {
                let event = GestureEvent { gesture, timestamp_ms };
                next.phase = Phase::Latched { from: counts };
                next.last_event = Some(event);
                (next, Some(event))
            }
            None => {
                next.phase = Phase::Holding { candidate: counts, frames_held };
                next.unrecognized += 1;
                (next, None)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gesture_input::{hand_pose, synth_stream, GloveConfig, SynthStep};
    use alloc::vec::Vec;
    use proptest::prelude::*;

    fn replay(script: &[SynthStep], config: &RecognizerConfig) -> (RecognizerState, Vec<Gesture>) {
        let glove = GloveConfig::default();
        let mut state = RecognizerState::new();
        let mut events = Vec::new();
        for (l, r) in synth_stream(script, &glove).unwrap() {
            let (lp, rp) = (hand_pose(&l, &glove).unwrap(), hand_pose(&r, &glove).unwrap());
            let (s, e) = state.feed(&lp, &rp, l.timestamp_ms, config);
            state = s;
            events.extend(e.map(|e| e.gesture));
        }
        (state, events)
    }

    const FRAME: f64 = 1000.0 / 60.0;

    fn hold(l: u8, r: u8, frames: u32) -> SynthStep {
        SynthStep::new(l, r, frames as f64 * FRAME)
    }

    #[test]
    fn dwell_and_release() {
        let cfg = RecognizerConfig::default();
        let (_, ev) = replay(&[hold(0, 2, 12), hold(0, 0, 5)], &cfg);
        assert_eq!(ev, [Gesture::right(2)]);
        let (_, ev) = replay(&[hold(0, 2, 6), hold(0, 0, 5)], &cfg);
        assert!(ev.is_empty());
        let (_, ev) = replay(&[hold(1, 1, 12)], &cfg);
        assert_eq!(ev, [Gesture::TopMenu]);
        let (_, ev) = replay(&[hold(0, 5, 12)], &cfg);
        assert_eq!(ev, [Gesture::Cancel]);
        let (_, ev) = replay(&[hold(5, 5, 12)], &cfg);
        assert_eq!(ev, [Gesture::SystemToggle]);
        let (_, ev) = replay(&[hold(5, 0, 12)], &cfg);
        assert_eq!(ev, [Gesture::left(5)]);
    }

    #[test]
    fn long_hold_emits_once() {
        let (s, ev) = replay(&[hold(0, 3, 200)], &RecognizerConfig::default());
        assert_eq!(ev, [Gesture::right(3)]);
        assert!(matches!(s.phase, Phase::Latched { .. }));
    }

    #[test]
    fn changing_count_while_latched_needs_release() {
        let cfg = RecognizerConfig::default();
        let (_, ev) = replay(&[hold(0, 2, 20), hold(0, 3, 20), hold(0, 0, 2), hold(0, 3, 20)], &cfg);
        assert_eq!(ev, [Gesture::right(2), Gesture::right(3)]);

        let relaxed = RecognizerConfig::new(12, false).unwrap();
        let (_, ev) = replay(&[hold(0, 2, 20), hold(0, 3, 20)], &relaxed);
        assert_eq!(ev, [Gesture::right(2), Gesture::right(3)]);
    }

    #[test]
    fn transitional_counts_reset_candidate() {
        // opening two fingers one frame apart
        let (_, ev) = replay(&[hold(0, 1, 2), hold(0, 2, 14), hold(0, 0, 1)], &RecognizerConfig::default());
        assert_eq!(ev, [Gesture::right(2)]);
    }

    #[test]
    fn unmapped_pairs_are_counted_once_per_hold() {
        let (s, ev) = replay(&[hold(2, 3, 40), hold(0, 0, 1), hold(4, 1, 13)], &RecognizerConfig::default());
        assert!(ev.is_empty());
        assert_eq!(s.unrecognized, 2);
    }

    #[test]
    fn reset_behaviour() {
        let cfg = RecognizerConfig::default();
        let (latched, ev) = replay(&[hold(0, 1, 12)], &cfg);
        assert_eq!(ev.len(), 1);
        let fresh = latched.reset();
        assert_eq!(fresh, RecognizerState::new());

        // mid-latch reset lets the next hold emit without a release
        let glove = GloveConfig::default();
        let mut state = fresh;
        let mut emitted = Vec::new();
        for (l, r) in synth_stream(&[hold(0, 1, 12)], &glove).unwrap() {
            let (s, e) = state.feed(&hand_pose(&l, &glove).unwrap(), &hand_pose(&r, &glove).unwrap(), 0.0, &cfg);
            state = s;
            emitted.extend(e);
        }
        assert_eq!(emitted.len(), 1);
    }

    #[test]
    fn zero_dwell_rejected() {
        assert!(RecognizerConfig::new(0, true).is_none());
        let (_, ev) = replay(&[hold(0, 4, 1)], &RecognizerConfig::new(1, true).unwrap());
        assert_eq!(ev, [Gesture::right(4)]);
    }

    #[test]
    fn count_mapping_round_trips() {
        for l in 0..=5 {
            for r in 0..=5 {
                if let Some(g) = Gesture::from_counts(l, r) {
                    assert_eq!(g.counts(), (l, r));
                }
            }
        }
    }

    proptest! {
        #[test]
        fn one_shot_per_episode(steps in proptest::collection::vec((0u8..=5, 0u8..=5, 1u32..30), 1..30)) {
            let script: Vec<SynthStep> = steps.iter().map(|&(l, r, n)| hold(l, r, n)).collect();
            let glove = GloveConfig::default();
            let cfg = RecognizerConfig::default();
            let mut state = RecognizerState::new();
            let mut in_episode_emitted = false;
            for (l, r) in synth_stream(&script, &glove).unwrap() {
                let (lp, rp) = (hand_pose(&l, &glove).unwrap(), hand_pose(&r, &glove).unwrap());
                let (s, e) = state.feed(&lp, &rp, l.timestamp_ms, &cfg);
                state = s;
                if (lp.spread_count(), rp.spread_count()) == (0, 0) {
                    in_episode_emitted = false;
                }
                if e.is_some() {
                    prop_assert!(!in_episode_emitted, "second emission without release");
                    in_episode_emitted = true;
                }
            }
        }
    }
}
