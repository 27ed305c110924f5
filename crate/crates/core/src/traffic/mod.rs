//! Multi-lane highway: driver observations, the 7-action space with its
//! acceleration distributions, driver reward, kinematics and collisions.
//!
//! Lanes are numbered from the left edge (lane 0) and lane centers sit at
//! `(lane + 0.5) · lane_width`; `lane_left` moves towards lane 0. Distances
//! between vehicles are center to center along the road.

mod world;

pub use world::{
    driver_reward, ActionOutcome, RewardTerms, TrafficConfig, TrafficRewardWeights, TrafficWorld,
    VehicleState,
};

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NUM_ACTIONS: usize = 7;
pub const NUM_SLOTS: usize = 5;
/// `(3·3)^5` observation codes.
pub const NUM_OBSERVATIONS: usize = 59_049;

pub const NOMINAL_MIN: f64 = 11.0;
pub const NOMINAL_MAX: f64 = 27.0;
pub const MOTION_THRESHOLD: f64 = 0.5;

pub const MAINTAIN_STD: f64 = 0.075;
pub const MILD_MIN: f64 = 0.5;
pub const MILD_MAX: f64 = 2.5;
pub const HARD_MODE: f64 = 3.5;
pub const HARD_STD: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrafficAction {
    Maintain = 0,
    Accelerate = 1,
    Decelerate = 2,
    HardAccelerate = 3,
    HardDecelerate = 4,
    LaneLeft = 5,
    LaneRight = 6,
}

impl TrafficAction {
    pub const ALL: [TrafficAction; NUM_ACTIONS] = [
        TrafficAction::Maintain,
        TrafficAction::Accelerate,
        TrafficAction::Decelerate,
        TrafficAction::HardAccelerate,
        TrafficAction::HardDecelerate,
        TrafficAction::LaneLeft,
        TrafficAction::LaneRight,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Self> {
        Self::ALL
            .get(i)
            .copied()
            .ok_or(Error::bounds("traffic action", i, NUM_ACTIONS))
    }

    pub fn is_lane_change(self) -> bool {
        matches!(self, TrafficAction::LaneLeft | TrafficAction::LaneRight)
    }

    /// Effort term of the driver reward.
    pub fn effort(self) -> f64 {
        match self {
            TrafficAction::Maintain => 0.0,
            TrafficAction::Accelerate | TrafficAction::Decelerate => -0.25,
            TrafficAction::HardAccelerate | TrafficAction::HardDecelerate => -0.5,
            TrafficAction::LaneLeft | TrafficAction::LaneRight => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceClass {
    Close = 0,
    Nominal = 1,
    Far = 2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionClass {
    Approaching = 0,
    Stable = 1,
    Distancing = 2,
}

/// `d < 11` close, `11 ≤ d ≤ 27` nominal, `d > 27` far.
pub fn classify_distance(d: f64) -> Result<DistanceClass> {
    classify_distance_with(d, NOMINAL_MIN, NOMINAL_MAX)
}

pub fn classify_distance_with(d: f64, nominal_min: f64, nominal_max: f64) -> Result<DistanceClass> {
    if d.is_nan() || d < 0.0 {
        return Err(Error::Argument(format!("negative distance {d}")));
    }
    Ok(if d < nominal_min {
        DistanceClass::Close
    } else if d <= nominal_max {
        DistanceClass::Nominal
    } else {
        DistanceClass::Far
    })
}

/// Classify a closing speed (positive when the gap shrinks).
pub fn classify_motion(closing_speed: f64) -> MotionClass {
    classify_motion_with(closing_speed, MOTION_THRESHOLD)
}

pub fn classify_motion_with(closing_speed: f64, threshold: f64) -> MotionClass {
    if closing_speed > threshold {
        MotionClass::Approaching
    } else if closing_speed < -threshold {
        MotionClass::Distancing
    } else {
        MotionClass::Stable
    }
}

/// Neighbor slots in encoding order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    Front = 0,
    FrontLeft = 1,
    FrontRight = 2,
    RearLeft = 3,
    RearRight = 4,
}

impl Slot {
    pub const ALL: [Slot; NUM_SLOTS] = [
        Slot::Front,
        Slot::FrontLeft,
        Slot::FrontRight,
        Slot::RearLeft,
        Slot::RearRight,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotReading {
    pub distance: DistanceClass,
    pub motion: MotionClass,
}

impl SlotReading {
    pub const ABSENT: SlotReading = SlotReading {
        distance: DistanceClass::Far,
        motion: MotionClass::Stable,
    };

    fn digit(self) -> usize {
        self.distance as usize * 3 + self.motion as usize
    }

    fn from_digit(d: usize) -> Self {
        const DIST: [DistanceClass; 3] = [DistanceClass::Close, DistanceClass::Nominal, DistanceClass::Far];
        const MOTION: [MotionClass; 3] = [
            MotionClass::Approaching,
            MotionClass::Stable,
            MotionClass::Distancing,
        ];
        SlotReading {
            distance: DIST[d / 3],
            motion: MOTION[d % 3],
        }
    }
}

/// Readings for front, front-left, front-right, rear-left, rear-right.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DriverObservation {
    pub slots: [SlotReading; NUM_SLOTS],
}

impl DriverObservation {
    pub const EMPTY_ROAD: DriverObservation = DriverObservation {
        slots: [SlotReading::ABSENT; NUM_SLOTS],
    };

    pub fn slot(&self, slot: Slot) -> SlotReading {
        self.slots[slot as usize]
    }

    /// Mixed-radix index: slot `k` contributes `(3·dist + motion) · 9^k`.
    pub fn index(&self) -> usize {
        self.slots
            .iter()
            .rev()
            .fold(0, |acc, r| acc * 9 + r.digit())
    }

    pub fn decode(index: usize) -> Result<Self> {
        if index >= NUM_OBSERVATIONS {
            return Err(Error::Encoding(format!(
                "driver observation index {index} outside [0, {NUM_OBSERVATIONS})"
            )));
        }
        let mut rest = index;
        let mut slots = [SlotReading::ABSENT; NUM_SLOTS];
        for s in slots.iter_mut() {
            *s = SlotReading::from_digit(rest % 9);
            rest /= 9;
        }
        Ok(Self { slots })
    }
}

/// Draw a longitudinal acceleration (m/s²) for `action`.
///
/// Maintain is `N(0, 0.075)`, the mild actions are uniform on
/// `±[0.5, 2.5]`, and the hard actions are `±(3.5 + |N(0, 0.3)|)`.
pub fn sample_acceleration<R: Rng + ?Sized>(action: TrafficAction, rng: &mut R) -> Result<f64> {
    let z = |rng: &mut R, std: f64| Normal::new(0.0, std).unwrap().sample(rng);
    Ok(match action {
        TrafficAction::Maintain => z(rng, MAINTAIN_STD),
        TrafficAction::Accelerate => Uniform::new_inclusive(MILD_MIN, MILD_MAX).unwrap().sample(rng),
        TrafficAction::Decelerate => -Uniform::new_inclusive(MILD_MIN, MILD_MAX).unwrap().sample(rng),
        TrafficAction::HardAccelerate => HARD_MODE + z(rng, HARD_STD).abs(),
        TrafficAction::HardDecelerate => -(HARD_MODE + z(rng, HARD_STD).abs()),
        TrafficAction::LaneLeft | TrafficAction::LaneRight => {
            return Err(Error::Argument(format!(
                "{action:?} carries no acceleration"
            )))
        }
    })
}

/// Invert the acceleration supports: `|a| < 0.5` maintain, up to 2.5 mild,
/// beyond that hard.
pub fn classify_acceleration(a: f64) -> TrafficAction {
    if a.abs() < MILD_MIN {
        TrafficAction::Maintain
    } else if a > MILD_MAX {
        TrafficAction::HardAccelerate
    } else if a > 0.0 {
        TrafficAction::Accelerate
    } else if a < -MILD_MAX {
        TrafficAction::HardDecelerate
    } else {
        TrafficAction::Decelerate
    }
}

/// Level-0 driver: keep lane; hard-decelerate when the front vehicle is
/// close and approaching, decelerate when it is close, otherwise maintain.
pub fn anchor_action(obs: &DriverObservation) -> TrafficAction {
    let front = obs.slot(Slot::Front);
    match (front.distance, front.motion) {
        (DistanceClass::Close, MotionClass::Approaching) => TrafficAction::HardDecelerate,
        (DistanceClass::Close, _) => TrafficAction::Decelerate,
        _ => TrafficAction::Maintain,
    }
}

/// Euler step of the longitudinal and lateral motion. Speed never goes
/// negative: a vehicle that would reverse within the step stops where
/// its velocity reaches zero.
pub fn step_vehicle(vs: &VehicleState, a: f64, dt: f64) -> VehicleState {
    let mut out = vs.clone();
    let v_end = vs.v_x + a * dt;
    if v_end < 0.0 {
        // a < 0 here; stopping time −v/a lies within the step
        out.x += -vs.v_x * vs.v_x / (2.0 * a);
        out.v_x = 0.0;
    } else {
        out.x += vs.v_x * dt + 0.5 * a * dt * dt;
        out.v_x = v_end;
    }
    out.y += vs.v_y * dt;
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaneDirection {
    Left,
    Right,
}

/// Advance a lane change by one step of `dt`, starting it if none is in
/// progress. Returns the new state and whether a new change was refused
/// because it would leave the road.
pub fn execute_lane_change(
    vs: &VehicleState,
    direction: LaneDirection,
    lanes: usize,
    lane_width: f64,
    duration: f64,
    dt: f64,
) -> (VehicleState, bool) {
    let mut out = vs.clone();
    if out.lane_change.is_none() && !world::begin_lane_change(&mut out, direction, lanes, lane_width, duration) {
        return (out, true);
    }
    world::advance_lateral(&mut out, lane_width, dt);
    out.x += out.v_x * dt;
    (out, false)
}

/// Lane whose band `[l·W, (l+1)·W)` contains `y`, clamped to the road.
pub fn lane_of(y: f64, lane_width: f64, lanes: usize) -> usize {
    let l = (y / lane_width).floor();
    if l < 0.0 {
        0
    } else {
        (l as usize).min(lanes - 1)
    }
}

pub fn lane_center(lane: usize, lane_width: f64) -> f64 {
    (lane as f64 + 0.5) * lane_width
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;

    #[test]
    fn distance_classes() {
        assert_eq!(classify_distance(5.0).unwrap(), DistanceClass::Close);
        assert_eq!(classify_distance(20.0).unwrap(), DistanceClass::Nominal);
        assert_eq!(classify_distance(11.0).unwrap(), DistanceClass::Nominal);
        assert_eq!(classify_distance(27.0).unwrap(), DistanceClass::Nominal);
        assert_eq!(classify_distance(27.01).unwrap(), DistanceClass::Far);
        assert!(matches!(classify_distance(-1.0), Err(Error::Argument(_))));
    }

    #[test]
    fn motion_classes() {
        assert_eq!(classify_motion(2.0), MotionClass::Approaching);
        assert_eq!(classify_motion(0.0), MotionClass::Stable);
        assert_eq!(classify_motion(-2.0), MotionClass::Distancing);
    }

    #[test]
    fn empty_road_index() {
        assert_eq!(DriverObservation::EMPTY_ROAD.index(), 7 * 7381);
        assert_eq!(
            DriverObservation::decode(51_667).unwrap(),
            DriverObservation::EMPTY_ROAD
        );
        assert!(DriverObservation::decode(NUM_OBSERVATIONS).is_err());
    }

    #[test]
    fn lane_actions_have_no_acceleration() {
        let mut rng = seeded_rng(1);
        assert!(sample_acceleration(TrafficAction::LaneLeft, &mut rng).is_err());
        for _ in 0..1000 {
            let a = sample_acceleration(TrafficAction::Accelerate, &mut rng).unwrap();
            assert!((0.5..=2.5).contains(&a));
            assert_eq!(classify_acceleration(a), TrafficAction::Accelerate);
            let h = sample_acceleration(TrafficAction::HardDecelerate, &mut rng).unwrap();
            assert!(h <= -3.5);
            assert_eq!(classify_acceleration(h), TrafficAction::HardDecelerate);
        }
    }

    #[test]
    fn anchor_rules() {
        let mut obs = DriverObservation::EMPTY_ROAD;
        assert_eq!(anchor_action(&obs), TrafficAction::Maintain);
        obs.slots[0] = SlotReading {
            distance: DistanceClass::Close,
            motion: MotionClass::Approaching,
        };
        assert_eq!(anchor_action(&obs), TrafficAction::HardDecelerate);
        obs.slots[0].motion = MotionClass::Distancing;
        assert_eq!(anchor_action(&obs), TrafficAction::Decelerate);
    }

    #[test]
    fn kinematics_plug_in() {
        let vs = VehicleState::new(0, 0.0, lane_center(2, 3.7), 2, 10.0, 5.0);
        let out = step_vehicle(&vs, 2.0, 0.1);
        assert!((out.x - 1.01).abs() < 1e-12);
        assert!((out.v_x - 10.2).abs() < 1e-12);
    }
}
