use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_index, Error, Result};
use crate::io::TrajectoryRecord;

use super::{
    classify_distance_with, classify_motion_with, lane_center, lane_of, sample_acceleration,
    DistanceClass, DriverObservation, LaneDirection, Slot, SlotReading, TrafficAction,
    NOMINAL_MAX, NOMINAL_MIN, MOTION_THRESHOLD, NUM_SLOTS,
};

/// Lateral tolerance for completing a lane change.
const LANE_SNAP: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub id: u64,
    /// Longitudinal position (m).
    pub x: f64,
    /// Lateral position (m), lane 0 centered at `lane_width / 2`.
    pub y: f64,
    /// Lane of record; switches to the target lane when a change completes.
    pub lane: usize,
    pub v_x: f64,
    pub v_y: f64,
    pub length: f64,
    pub previous_action: TrafficAction,
    /// Acceleration held until the next decision.
    pub accel: f64,
    /// Target lane of a change in progress.
    pub lane_change: Option<usize>,
    /// Set when the vehicle overlapped another during the last interval.
    pub collided: bool,
}

impl VehicleState {
    pub fn new(id: u64, x: f64, y: f64, lane: usize, v_x: f64, length: f64) -> Self {
        Self {
            id,
            x,
            y,
            lane,
            v_x,
            v_y: 0.0,
            length,
            previous_action: TrafficAction::Maintain,
            accel: 0.0,
            lane_change: None,
            collided: false,
        }
    }
}

pub(crate) fn begin_lane_change(
    vs: &mut VehicleState,
    direction: LaneDirection,
    lanes: usize,
    lane_width: f64,
    duration: f64,
) -> bool {
    let target = match direction {
        LaneDirection::Left if vs.lane > 0 => vs.lane - 1,
        LaneDirection::Right if vs.lane + 1 < lanes => vs.lane + 1,
        _ => return false,
    };
    let sign = if target < vs.lane { -1.0 } else { 1.0 };
    vs.v_y = sign * lane_width / duration;
    vs.lane_change = Some(target);
    true
}

pub(crate) fn advance_lateral(vs: &mut VehicleState, lane_width: f64, dt: f64) {
    if let Some(target) = vs.lane_change {
        vs.y += vs.v_y * dt;
        let center = lane_center(target, lane_width);
        if (vs.y - center).abs() < LANE_SNAP {
            vs.y = center;
            vs.lane = target;
            vs.v_y = 0.0;
            vs.lane_change = None;
        }
    }
}

/// Weights of collision, speed deviation, headway and effort terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrafficRewardWeights(pub [f64; 4]);

impl Default for TrafficRewardWeights {
    fn default() -> Self {
        TrafficRewardWeights([100.0, 1.0, 1.0, 1.0])
    }
}

impl TrafficRewardWeights {
    pub fn validate(&self) -> Result<()> {
        if self.0.iter().any(|w| *w < 0.0 || !w.is_finite()) || self.0.iter().all(|w| *w == 0.0) {
            return Err(Error::Config(format!("invalid traffic weights {:?}", self.0)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrafficConfig {
    pub lanes: usize,
    pub num_vehicles: usize,
    pub lane_width: f64,
    pub vehicle_length: f64,
    pub vehicle_width: f64,
    pub dt: f64,
    pub decision_interval: f64,
    pub lane_change_time: f64,
    pub episode_seconds: f64,
    /// Circumference of the ring road; `None` gives `spacing` metres per
    /// vehicle in the most crowded lane.
    pub ring_length: Option<f64>,
    pub spacing: f64,
    pub initial_speed: (f64, f64),
    pub nominal_band: (f64, f64),
    pub motion_threshold: f64,
    pub weights: TrafficRewardWeights,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        Self {
            lanes: 5,
            num_vehicles: 25,
            lane_width: 3.7,
            vehicle_length: 5.0,
            vehicle_width: 2.0,
            dt: 0.1,
            decision_interval: 1.0,
            lane_change_time: 2.0,
            episode_seconds: 200.0,
            ring_length: None,
            spacing: 40.0,
            initial_speed: (25.0, 31.0),
            nominal_band: (NOMINAL_MIN, NOMINAL_MAX),
            motion_threshold: MOTION_THRESHOLD,
            weights: TrafficRewardWeights::default(),
        }
    }
}

impl TrafficConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lane_width", self.lane_width),
            ("vehicle_length", self.vehicle_length),
            ("vehicle_width", self.vehicle_width),
            ("dt", self.dt),
            ("decision_interval", self.decision_interval),
            ("lane_change_time", self.lane_change_time),
            ("episode_seconds", self.episode_seconds),
            ("spacing", self.spacing),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.lanes == 0 || self.num_vehicles == 0 {
            return Err(Error::Config("need at least one lane and one vehicle".into()));
        }
        if self.decision_steps() == 0 {
            return Err(Error::Config("decision interval shorter than dt".into()));
        }
        if self.initial_speed.0 < 0.0 || self.initial_speed.1 < self.initial_speed.0 {
            return Err(Error::Config("bad initial speed range".into()));
        }
        if let Some(l) = self.ring_length {
            if !(l > 0.0) {
                return Err(Error::Config("ring length must be positive".into()));
            }
        }
        self.weights.validate()
    }

    pub fn decision_steps(&self) -> usize {
        (self.decision_interval / self.dt).round() as usize
    }

    pub fn decisions_per_episode(&self) -> usize {
        (self.episode_seconds / self.decision_interval).round() as usize
    }

    pub fn ring(&self) -> f64 {
        self.ring_length.unwrap_or_else(|| {
            let per_lane = self.num_vehicles.div_ceil(self.lanes);
            self.spacing * per_lane as f64
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionOutcome {
    pub accel: f64,
    /// Lane change refused at the road edge; the vehicle maintains.
    pub rejected: bool,
}

/// Vehicles on a periodic multi-lane road.
#[derive(Debug, Clone)]
pub struct TrafficWorld {
    pub config: TrafficConfig,
    pub vehicles: Vec<VehicleState>,
    /// Simulation steps elapsed.
    pub frame: u64,
    ring: f64,
    speed_sum: f64,
    speed_samples: u64,
    pub rejected_lane_changes: u64,
}

impl TrafficWorld {
    pub fn new(config: TrafficConfig, vehicles: Vec<VehicleState>) -> Result<Self> {
        config.validate()?;
        for v in &vehicles {
            check_index("lane", v.lane, config.lanes)?;
            if v.v_x < 0.0 {
                return Err(Error::Config(format!("vehicle {} has negative speed", v.id)));
            }
        }
        let ring = config.ring();
        Ok(Self {
            config,
            vehicles,
            frame: 0,
            ring,
            speed_sum: 0.0,
            speed_samples: 0,
            rejected_lane_changes: 0,
        })
    }

    /// Round-robin lane assignment, evenly spaced with staggered offsets
    /// between lanes and a little positional jitter.
    pub fn generate<R: Rng + ?Sized>(config: TrafficConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let ring = config.ring();
        let lanes = config.lanes;
        let mut per_lane = vec![0usize; lanes];
        for i in 0..config.num_vehicles {
            per_lane[i % lanes] += 1;
        }
        let mut slot_in_lane = vec![0usize; lanes];
        let mut vehicles = Vec::with_capacity(config.num_vehicles);
        for i in 0..config.num_vehicles {
            let lane = i % lanes;
            let n = per_lane[lane] as f64;
            let gap = ring / n;
            let k = slot_in_lane[lane] as f64;
            slot_in_lane[lane] += 1;
            let stagger = gap * lane as f64 / lanes as f64;
            let jitter = rng.random_range(-0.05..0.05) * gap;
            let x = (k * gap + stagger + jitter).rem_euclid(ring);
            let (lo, hi) = config.initial_speed;
            let v = if hi > lo { rng.random_range(lo..hi) } else { lo };
            vehicles.push(VehicleState::new(
                i as u64,
                x,
                lane_center(lane, config.lane_width),
                lane,
                v,
                config.vehicle_length,
            ));
        }
        Self::new(config, vehicles)
    }

    pub fn ring_length(&self) -> f64 {
        self.ring
    }

    pub fn time(&self) -> f64 {
        self.frame as f64 * self.config.dt
    }

    pub fn is_locked(&self, i: usize) -> bool {
        self.vehicles[i].lane_change.is_some()
    }

    /// Signed forward offset from `from` to `to` on the ring, in
    /// `[-L/2, L/2)`.
    fn offset(&self, from: f64, to: f64) -> f64 {
        let d = (to - from).rem_euclid(self.ring);
        if d < self.ring / 2.0 {
            d
        } else {
            d - self.ring
        }
    }

    /// Distance and closing speed of the nearest vehicle in `slot`.
    pub fn neighbor(&self, i: usize, slot: Slot) -> Option<(f64, f64)> {
        let ego = &self.vehicles[i];
        let lanes = self.config.lanes;
        let lane = lane_of(ego.y, self.config.lane_width, lanes) as isize;
        let (dl, ahead) = match slot {
            Slot::Front => (0, true),
            Slot::FrontLeft => (-1, true),
            Slot::FrontRight => (1, true),
            Slot::RearLeft => (-1, false),
            Slot::RearRight => (1, false),
        };
        let target = lane + dl;
        if target < 0 || target >= lanes as isize {
            return None;
        }
        let mut best: Option<(f64, f64)> = None;
        for (j, o) in self.vehicles.iter().enumerate() {
            if j == i || lane_of(o.y, self.config.lane_width, lanes) as isize != target {
                continue;
            }
            let off = self.offset(ego.x, o.x);
            let (is_ahead, dist) = if off >= 0.0 { (true, off) } else { (false, -off) };
            if is_ahead != ahead {
                continue;
            }
            let closing = if ahead { ego.v_x - o.v_x } else { o.v_x - ego.v_x };
            if best.is_none_or(|(d, _)| dist < d) {
                best = Some((dist, closing));
            }
        }
        best
    }

    pub fn observe(&self, i: usize) -> DriverObservation {
        let (lo, hi) = self.config.nominal_band;
        let mut slots = [SlotReading::ABSENT; NUM_SLOTS];
        for (k, slot) in Slot::ALL.iter().enumerate() {
            if let Some((d, closing)) = self.neighbor(i, *slot) {
                slots[k] = SlotReading {
                    distance: classify_distance_with(d, lo, hi).expect("distances are nonnegative"),
                    motion: classify_motion_with(closing, self.config.motion_threshold),
                };
            }
        }
        DriverObservation { slots }
    }

    /// Commit vehicle `i` to `action` for the coming interval.
    pub fn apply_action<R: Rng + ?Sized>(
        &mut self,
        i: usize,
        action: TrafficAction,
        rng: &mut R,
    ) -> Result<ActionOutcome> {
        check_index("vehicle", i, self.vehicles.len())?;
        if self.is_locked(i) {
            return Err(Error::Argument(format!("vehicle {i} is changing lanes")));
        }
        let cfg = &self.config;
        let v = &mut self.vehicles[i];
        v.previous_action = action;
        let outcome = if action.is_lane_change() {
            let dir = if action == TrafficAction::LaneLeft {
                LaneDirection::Left
            } else {
                LaneDirection::Right
            };
            if begin_lane_change(v, dir, cfg.lanes, cfg.lane_width, cfg.lane_change_time) {
                ActionOutcome {
                    accel: 0.0,
                    rejected: false,
                }
            } else {
                self.rejected_lane_changes += 1;
                ActionOutcome {
                    accel: sample_acceleration(TrafficAction::Maintain, rng)?,
                    rejected: true,
                }
            }
        } else {
            ActionOutcome {
                accel: sample_acceleration(action, rng)?,
                rejected: false,
            }
        };
        self.vehicles[i].accel = outcome.accel;
        Ok(outcome)
    }

    /// One simulation step of `dt`; logs every vehicle's pre-step state.
    pub fn substep(&mut self, log: Option<&mut Vec<TrajectoryRecord>>) {
        if let Some(log) = log {
            for v in &self.vehicles {
                log.push(TrajectoryRecord {
                    vehicle_id: v.id,
                    frame: self.frame,
                    x: v.x,
                    y: v.y,
                    lane: v.lane,
                    v: v.v_x,
                    a: v.accel,
                });
            }
        }
        let dt = self.config.dt;
        let w = self.config.lane_width;
        for v in self.vehicles.iter_mut() {
            let a = if v.lane_change.is_some() { 0.0 } else { v.accel };
            let stepped = super::step_vehicle(&VehicleState { v_y: 0.0, ..v.clone() }, a, dt);
            v.x = stepped.x.rem_euclid(self.ring);
            v.v_x = stepped.v_x;
            advance_lateral(v, w, dt);
        }
        self.frame += 1;
        for (i, j) in self.collisions() {
            self.vehicles[i].collided = true;
            self.vehicles[j].collided = true;
        }
    }

    /// Run one decision interval and fold the resulting speeds into the
    /// episode mean.
    pub fn advance_interval(&mut self, mut log: Option<&mut Vec<TrajectoryRecord>>) {
        for v in self.vehicles.iter_mut() {
            v.collided = false;
        }
        for _ in 0..self.config.decision_steps() {
            self.substep(log.as_deref_mut());
        }
        for v in &self.vehicles {
            self.speed_sum += v.v_x;
            self.speed_samples += 1;
        }
    }

    /// Mean speed over all vehicles and decision steps so far this episode
    /// (the current mean before the first interval).
    pub fn mean_speed(&self) -> f64 {
        if self.speed_samples > 0 {
            self.speed_sum / self.speed_samples as f64
        } else {
            self.vehicles.iter().map(|v| v.v_x).sum::<f64>() / self.vehicles.len().max(1) as f64
        }
    }

    /// Overlapping pairs `(i, j)` with `i < j`: lateral offset below the
    /// vehicle width and longitudinal offset below the mean length.
    pub fn collisions(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let width = self.config.vehicle_width;
        for i in 0..self.vehicles.len() {
            for j in i + 1..self.vehicles.len() {
                let (a, b) = (&self.vehicles[i], &self.vehicles[j]);
                if (a.y - b.y).abs() >= width {
                    continue;
                }
                if self.offset(a.x, b.x).abs() < 0.5 * (a.length + b.length) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn in_collision(&self, i: usize) -> bool {
        self.collisions().iter().any(|(a, b)| *a == i || *b == i)
    }
}

/// Components of the driver reward before weighting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardTerms {
    /// −1 on collision, else 0.
    pub c: f64,
    /// `−|v − v_mean| / v_mean`.
    pub s: f64,
    /// Headway: −1 close, 0 nominal, +1 far or no front vehicle.
    pub d: f64,
    /// Effort of the chosen action.
    pub e: f64,
}

impl RewardTerms {
    pub fn measure(world: &TrafficWorld, ego: usize, action: TrafficAction) -> Self {
        let v = &world.vehicles[ego];
        let c = if v.collided || world.in_collision(ego) { -1.0 } else { 0.0 };
        let mean = world.mean_speed();
        let s = if mean > 0.0 { -(v.v_x - mean).abs() / mean } else { 0.0 };
        let d = match world.observe(ego).slot(Slot::Front).distance {
            DistanceClass::Close => -1.0,
            DistanceClass::Nominal => 0.0,
            DistanceClass::Far => 1.0,
        };
        Self {
            c,
            s,
            d,
            e: action.effort(),
        }
    }

    pub fn weighted(&self, w: &TrafficRewardWeights) -> f64 {
        let w = w.0;
        w[0] * self.c + w[1] * self.s + w[2] * self.d + w[3] * self.e
    }
}

/// Reward of `ego` for `action` over the interval that produced `after`.
pub fn driver_reward(
    after: &TrafficWorld,
    ego: usize,
    action: TrafficAction,
    w: &TrafficRewardWeights,
) -> Result<f64> {
    check_index("vehicle", ego, after.vehicles.len())?;
    Ok(RewardTerms::measure(after, ego, action).weighted(w))
}
