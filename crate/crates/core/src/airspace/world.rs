use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_index, Error, Result};

use super::geom::{
    add, distance_to_polyline, dot, heading_of, lookahead_point, norm, scale, sub, unit,
    velocity_components, wrap180, Vec2,
};
use super::saa::{detect_conflict, saa1_command, saa2_command, SaaAlgorithm, SaaConfig};
use super::{approach_code, step_heading, step_uas_velocity, PilotAction, PilotObservation, NMI_KM, NUM_REGIONS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AircraftKind {
    Manned,
    Unmanned,
}

#[derive(Debug, Clone)]
pub struct Aircraft {
    pub id: u64,
    pub kind: AircraftKind,
    pub position: Vec2,
    /// Degrees clockwise from north.
    pub heading: f64,
    pub desired_heading: f64,
    /// Cruise speed, km/h.
    pub speed: f64,
    /// Current velocity, km/h.
    pub velocity: Vec2,
    /// Reference polyline; the last point is the destination.
    pub route: Arc<[Vec2]>,
    /// Next route point the autopilot steers for (unmanned only).
    pub next_waypoint: usize,
    pub previous_action: PilotAction,
    pub active: bool,
    /// Time the aircraft reached its destination.
    pub finish_time: Option<f64>,
}

impl Aircraft {
    pub fn manned(id: u64, position: Vec2, heading: f64, speed: f64, route: Vec<Vec2>) -> Self {
        Self {
            id,
            kind: AircraftKind::Manned,
            position,
            heading,
            desired_heading: heading,
            speed,
            velocity: velocity_components(heading, speed),
            route: route.into(),
            next_waypoint: 0,
            previous_action: PilotAction::Straight,
            active: true,
            finish_time: None,
        }
    }

    /// Unmanned aircraft starting at `route[0]`, headed for `route[1]`.
    pub fn unmanned(id: u64, speed: f64, route: Vec<Vec2>) -> Self {
        let start = route[0];
        let next = if route.len() > 1 { 1 } else { 0 };
        let dir = unit(sub(route[next], start)).unwrap_or([0.0, 1.0]);
        let heading = heading_of(dir);
        Self {
            id,
            kind: AircraftKind::Unmanned,
            position: start,
            heading,
            desired_heading: heading,
            speed,
            velocity: scale(dir, speed),
            route: route.into(),
            next_waypoint: next,
            previous_action: PilotAction::Straight,
            active: true,
            finish_time: None,
        }
    }

    pub fn destination(&self) -> Vec2 {
        *self.route.last().expect("route has at least one point")
    }

    pub fn is_manned(&self) -> bool {
        self.kind == AircraftKind::Manned
    }
}

/// Weights `ω1..ω6` of collision, separation, approach, destination
/// progress, trajectory progress and effort.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AirspaceRewardWeights(pub [f64; 6]);

impl Default for AirspaceRewardWeights {
    fn default() -> Self {
        AirspaceRewardWeights([10.0, 1.0, 0.5, 1.0, 1.0, 0.2])
    }
}

impl AirspaceRewardWeights {
    pub fn validate(&self) -> Result<()> {
        if self.0.iter().any(|w| *w < 0.0 || !w.is_finite()) || self.0.iter().all(|w| *w == 0.0) {
            return Err(Error::Config(format!("invalid airspace weights {:?}", self.0)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AirspaceConfig {
    pub dt: f64,
    pub decision_interval: f64,
    pub inner_radius: f64,
    pub outer_radius: f64,
    pub collision_radius: f64,
    pub separation_radius: f64,
    /// Intruders farther than this are not observed.
    pub sensing_range: f64,
    /// Pure-pursuit distance along the route for the trajectory term.
    pub lookahead: f64,
    /// Manned aircraft closer than this to their destination land.
    pub capture_radius: f64,
    pub max_seconds: f64,
    /// `[xmin, ymin, xmax, ymax]`; aircraft farther than `exit_margin`
    /// outside it leave the simulation.
    pub sector: Option<[f64; 4]>,
    pub exit_margin: f64,
    pub weights: AirspaceRewardWeights,
    pub saa: SaaConfig,
}

impl Default for AirspaceConfig {
    fn default() -> Self {
        Self {
            dt: 1.0,
            decision_interval: 6.0,
            inner_radius: NMI_KM,
            outer_radius: 5.0 * NMI_KM,
            collision_radius: 0.5 * NMI_KM,
            separation_radius: 5.0 * NMI_KM,
            sensing_range: 10.0 * NMI_KM,
            lookahead: 5.0,
            capture_radius: 2.0,
            max_seconds: 1800.0,
            sector: None,
            exit_margin: 20.0,
            weights: AirspaceRewardWeights::default(),
            saa: SaaConfig::default(),
        }
    }
}

impl AirspaceConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dt", self.dt),
            ("decision_interval", self.decision_interval),
            ("inner_radius", self.inner_radius),
            ("outer_radius", self.outer_radius),
            ("collision_radius", self.collision_radius),
            ("separation_radius", self.separation_radius),
            ("sensing_range", self.sensing_range),
            ("lookahead", self.lookahead),
            ("capture_radius", self.capture_radius),
            ("max_seconds", self.max_seconds),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.inner_radius >= self.outer_radius {
            return Err(Error::Config("inner radius must be below outer radius".into()));
        }
        if self.collision_radius >= self.separation_radius {
            return Err(Error::Config("collision radius must be below separation radius".into()));
        }
        if self.decision_steps() == 0 {
            return Err(Error::Config("decision interval shorter than dt".into()));
        }
        self.weights.validate()?;
        self.saa.validate()
    }

    pub fn decision_steps(&self) -> usize {
        (self.decision_interval / self.dt).round() as usize
    }
}

/// Event tallies and running sums accumulated while stepping.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WorldMetrics {
    /// Pairs involving an unmanned aircraft that lost separation at least
    /// once.
    pub separation_violations: u64,
    /// Manned-only pairs that lost separation at least once.
    pub manned_violations: u64,
    /// Pairs that came within the collision radius at least once.
    pub collisions: u64,
    /// Per aircraft: sum of distances to the route over active steps.
    pub deviation_sum: Vec<f64>,
    pub deviation_steps: Vec<u64>,
}

impl WorldMetrics {
    /// Time-mean distance to the route of aircraft `i`.
    pub fn mean_deviation(&self, i: usize) -> Option<f64> {
        (self.deviation_steps[i] > 0).then(|| self.deviation_sum[i] / self.deviation_steps[i] as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlightLogRow {
    pub t: f64,
    pub aircraft_id: u64,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub action: Option<PilotAction>,
}

#[derive(Debug, Clone)]
pub struct AirspaceWorld {
    pub config: AirspaceConfig,
    pub aircraft: Vec<Aircraft>,
    pub time: f64,
    pub metrics: WorldMetrics,
    lost_separation: Vec<bool>,
    collided: Vec<bool>,
}

impl AirspaceWorld {
    pub fn new(config: AirspaceConfig, aircraft: Vec<Aircraft>) -> Result<Self> {
        config.validate()?;
        for a in &aircraft {
            if !(a.speed > 0.0) || a.route.is_empty() {
                return Err(Error::Config(format!(
                    "aircraft {} needs a positive speed and a route",
                    a.id
                )));
            }
        }
        let n = aircraft.len();
        let mut w = Self {
            config,
            aircraft,
            time: 0.0,
            metrics: WorldMetrics {
                deviation_sum: vec![0.0; n],
                deviation_steps: vec![0; n],
                ..Default::default()
            },
            lost_separation: vec![false; n * n],
            collided: vec![false; n * n],
        };
        w.record_pairs();
        Ok(w)
    }

    pub fn len(&self) -> usize {
        self.aircraft.len()
    }

    pub fn is_empty(&self) -> bool {
        self.aircraft.is_empty()
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        norm(sub(self.aircraft[j].position, self.aircraft[i].position))
    }

    pub fn any_active(&self) -> bool {
        self.aircraft.iter().any(|a| a.active)
    }

    pub fn finished(&self) -> bool {
        !self.any_active() || self.time >= self.config.max_seconds - 1e-9
    }

    /// Nearest active intruder within sensing range: `(index, distance)`.
    pub fn nearest_intruder(&self, i: usize) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (j, o) in self.aircraft.iter().enumerate() {
            if j == i || !o.active {
                continue;
            }
            let d = self.distance(i, j);
            if d <= self.config.sensing_range && best.is_none_or(|(_, bd)| d < bd) {
                best = Some((j, d));
            }
        }
        best
    }

    fn closing(&self, i: usize, j: usize) -> bool {
        let r = sub(self.aircraft[j].position, self.aircraft[i].position);
        let v = sub(self.aircraft[j].velocity, self.aircraft[i].velocity);
        dot(r, v) < 0.0
    }

    /// Region codes, best trajectory/destination actions and previous
    /// action of manned aircraft `i`.
    pub fn observe(&self, i: usize) -> PilotObservation {
        let ego = &self.aircraft[i];
        let mut regions = [0u8; NUM_REGIONS];
        let mut nearest = [f64::INFINITY; NUM_REGIONS];
        for (j, o) in self.aircraft.iter().enumerate() {
            if j == i || !o.active {
                continue;
            }
            let r = sub(o.position, ego.position);
            let d = norm(r);
            if d > self.config.sensing_range || !self.closing(i, j) {
                continue;
            }
            let ring = usize::from(d >= self.config.inner_radius);
            let bearing = wrap180(heading_of(r) - ego.heading);
            let slice = if (-60.0..60.0).contains(&bearing) {
                0
            } else if bearing >= 60.0 {
                1
            } else {
                2
            };
            let k = ring * 3 + slice;
            if d < nearest[k] {
                nearest[k] = d;
                let other_heading = heading_of(o.velocity);
                regions[k] = approach_code(wrap180(other_heading - ego.heading).abs());
            }
        }
        let (bta, bda) = self.best_actions(i);
        PilotObservation {
            regions,
            bta: bta.index() as u8,
            bda: bda.index() as u8,
            pa: ego.previous_action.index() as u8,
        }
    }

    /// Position of aircraft `i` one decision interval ahead under `action`,
    /// ignoring everyone else.
    fn predict(&self, i: usize, action: PilotAction) -> Vec2 {
        let a = &self.aircraft[i];
        let target = a.desired_heading + action.heading_change();
        let mut psi = a.heading;
        let mut p = a.position;
        let dt = self.config.dt;
        for _ in 0..self.config.decision_steps() {
            p = add(p, scale(velocity_components(psi, a.speed), dt / 3600.0));
            psi = step_heading(psi, target, dt);
        }
        p
    }

    /// One-step lookahead: the actions bringing the aircraft closest to its
    /// route and to its destination; ties go to straight.
    pub fn best_actions(&self, i: usize) -> (PilotAction, PilotAction) {
        let a = &self.aircraft[i];
        let dest = a.destination();
        let order = [PilotAction::Straight, PilotAction::Left45, PilotAction::Right45];
        let mut bta = (PilotAction::Straight, f64::INFINITY);
        let mut bda = (PilotAction::Straight, f64::INFINITY);
        for act in order {
            let p = self.predict(i, act);
            let dt = distance_to_polyline(p, &a.route);
            let dd = norm(sub(dest, p));
            if dt < bta.1 - 1e-9 {
                bta = (act, dt);
            }
            if dd < bda.1 - 1e-9 {
                bda = (act, dd);
            }
        }
        (bta.0, bda.0)
    }

    /// Pilot input for manned aircraft `i`: shift the desired heading.
    pub fn apply_pilot_action(&mut self, i: usize, action: PilotAction) -> Result<()> {
        check_index("aircraft", i, self.aircraft.len())?;
        let a = &mut self.aircraft[i];
        if !a.is_manned() {
            return Err(Error::Argument(format!("aircraft {} is unmanned", a.id)));
        }
        a.desired_heading = super::geom::wrap360(a.desired_heading + action.heading_change());
        a.previous_action = action;
        Ok(())
    }

    /// Desired velocity of unmanned aircraft `i`: the avoidance command for
    /// the most imminent predicted conflict, otherwise straight at the next
    /// waypoint at cruise speed.
    fn uas_command(&self, i: usize) -> Vec2 {
        let a = &self.aircraft[i];
        let saa = &self.config.saa;
        let mut worst: Option<(usize, f64, f64)> = None;
        if saa.enabled() {
            for (j, o) in self.aircraft.iter().enumerate() {
                if j == i || !o.active {
                    continue;
                }
                if let Some(c) = detect_conflict(a.position, a.velocity, o.position, o.velocity, saa) {
                    let key = (c.time, self.distance(i, j));
                    if worst.is_none_or(|(_, t, d)| (key.0, key.1) < (t, d)) {
                        worst = Some((j, key.0, key.1));
                    }
                }
            }
        }
        match worst {
            Some((j, _, _)) => {
                let o = &self.aircraft[j];
                match saa.algorithm {
                    SaaAlgorithm::Saa1 => saa1_command(
                        a.position,
                        a.velocity,
                        o.position,
                        o.velocity,
                        saa.threshold,
                        a.speed,
                    ),
                    SaaAlgorithm::Saa2 => saa2_command(
                        a.position,
                        a.velocity,
                        o.position,
                        o.velocity,
                        saa.threshold,
                        a.speed,
                    ),
                }
            }
            None => {
                let wp = a.route[a.next_waypoint.min(a.route.len() - 1)];
                scale(unit(sub(wp, a.position)).unwrap_or([0.0, 0.0]), a.speed)
            }
        }
    }

    /// Advance every active aircraft by one `dt`.
    pub fn substep(&mut self, mut log: Option<&mut Vec<FlightLogRow>>) {
        let dt = self.config.dt;
        let commands: Vec<Option<Vec2>> = (0..self.aircraft.len())
            .map(|i| {
                let a = &self.aircraft[i];
                (a.active && !a.is_manned()).then(|| self.uas_command(i))
            })
            .collect();
        let end_time = self.time + dt;
        for (i, a) in self.aircraft.iter_mut().enumerate() {
            if !a.active {
                continue;
            }
            if let Some(log) = log.as_deref_mut() {
                log.push(FlightLogRow {
                    t: self.time,
                    aircraft_id: a.id,
                    x: a.position[0],
                    y: a.position[1],
                    heading: a.heading,
                    action: a.is_manned().then_some(a.previous_action),
                });
            }
            let step = a.speed * dt / 3600.0;
            match a.kind {
                AircraftKind::Manned => {
                    a.position = add(a.position, scale(a.velocity, dt / 3600.0));
                    a.heading = step_heading(a.heading, a.desired_heading, dt);
                    a.velocity = velocity_components(a.heading, a.speed);
                    if norm(sub(a.destination(), a.position)) < self.config.capture_radius {
                        a.active = false;
                        a.finish_time = Some(end_time);
                    }
                }
                AircraftKind::Unmanned => {
                    let wp = a.route[a.next_waypoint];
                    if norm(sub(wp, a.position)) <= step {
                        a.position = wp;
                        if a.next_waypoint + 1 >= a.route.len() {
                            a.active = false;
                            a.finish_time = Some(end_time);
                        } else {
                            a.next_waypoint += 1;
                        }
                    } else {
                        a.position = add(a.position, scale(a.velocity, dt / 3600.0));
                    }
                    if let Some(vd) = commands[i] {
                        a.velocity = step_uas_velocity(a.velocity, vd, dt);
                        if norm(a.velocity) > 0.0 {
                            a.heading = heading_of(a.velocity);
                        }
                    }
                }
            }
            if let Some([x0, y0, x1, y1]) = self.config.sector {
                let m = self.config.exit_margin;
                let [x, y] = a.position;
                if x < x0 - m || x > x1 + m || y < y0 - m || y > y1 + m {
                    a.active = false;
                }
            }
        }
        self.time = end_time;
        self.record_events();
    }

    fn record_events(&mut self) {
        let n = self.aircraft.len();
        for i in 0..n {
            let a = &self.aircraft[i];
            if a.active || a.finish_time == Some(self.time) {
                self.metrics.deviation_sum[i] += distance_to_polyline(a.position, &a.route);
                self.metrics.deviation_steps[i] += 1;
            }
        }
        self.record_pairs();
    }

    fn record_pairs(&mut self) {
        let n = self.aircraft.len();
        for i in 0..n {
            for j in i + 1..n {
                let k = i * n + j;
                if !(self.aircraft[i].active && self.aircraft[j].active) {
                    continue;
                }
                let d = self.distance(i, j);
                if d < self.config.separation_radius && !self.lost_separation[k] {
                    self.lost_separation[k] = true;
                    if self.aircraft[i].is_manned() && self.aircraft[j].is_manned() {
                        self.metrics.manned_violations += 1;
                    } else {
                        self.metrics.separation_violations += 1;
                    }
                }
                if d < self.config.collision_radius && !self.collided[k] {
                    self.collided[k] = true;
                    self.metrics.collisions += 1;
                }
            }
        }
    }

    /// Run one decision interval of substeps (fewer if everyone lands).
    pub fn advance_interval(&mut self, mut log: Option<&mut Vec<FlightLogRow>>) {
        for _ in 0..self.config.decision_steps() {
            if self.finished() {
                break;
            }
            self.substep(log.as_deref_mut());
        }
    }

    /// Active intruders of aircraft `i` within the collision radius and
    /// within the separation annulus.
    pub fn occupancy(&self, i: usize) -> (usize, usize) {
        let mut c = 0;
        let mut s = 0;
        for (j, o) in self.aircraft.iter().enumerate() {
            if j == i || !o.active {
                continue;
            }
            let d = self.distance(i, j);
            if d < self.config.collision_radius {
                c += 1;
            } else if d < self.config.separation_radius {
                s += 1;
            }
        }
        (c, s)
    }

    /// Whether aircraft `i` shares the collision radius with anyone.
    pub fn in_collision(&self, i: usize) -> bool {
        self.occupancy(i).0 > 0
    }
}

/// Unweighted reward components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardTerms {
    pub c: f64,
    pub s: f64,
    pub i: f64,
    pub d: f64,
    pub p: f64,
    pub e: f64,
}

impl RewardTerms {
    /// Terms for `ego` having chosen `action` at `before`, observed at
    /// `after`. Progress terms project the displacement onto the bearing of
    /// the destination and of the pure-pursuit point on the route, divided
    /// by the distance flown at cruise speed.
    pub fn measure(before: &AirspaceWorld, after: &AirspaceWorld, ego: usize, action: PilotAction) -> Self {
        let b = &before.aircraft[ego];
        let a = &after.aircraft[ego];
        let (c, s) = after.occupancy(ego);
        let i = match after.nearest_intruder(ego) {
            Some((j, _)) if after.closing(ego, j) => 1.0,
            _ => 0.0,
        };
        let elapsed = after.time - before.time;
        let flown = b.speed * elapsed / 3600.0;
        let disp = sub(a.position, b.position);
        let to_dest = unit(sub(b.destination(), b.position));
        let progress = |u: Option<Vec2>| {
            if flown > 0.0 {
                u.map_or(0.0, |u| (dot(disp, u) / flown).clamp(-1.0, 1.0))
            } else {
                0.0
            }
        };
        let la = lookahead_point(b.position, &b.route, before.config.lookahead);
        let to_route = unit(sub(la, b.position)).or(to_dest);
        Self {
            c: c as f64,
            s: s as f64,
            i,
            d: progress(to_dest),
            p: progress(to_route),
            e: if action != b.previous_action { 1.0 } else { 0.0 },
        }
    }

    pub fn weighted(&self, w: &AirspaceRewardWeights) -> f64 {
        let w = w.0;
        -w[0] * self.c - w[1] * self.s - w[2] * self.i + w[3] * self.d + w[4] * self.p - w[5] * self.e
    }
}

/// `r = −ω1 C − ω2 S − ω3 I + ω4 D + ω5 P − ω6 E`.
pub fn pilot_reward(
    before: &AirspaceWorld,
    after: &AirspaceWorld,
    ego: usize,
    action: PilotAction,
    w: &AirspaceRewardWeights,
) -> Result<f64> {
    check_index("aircraft", ego, before.aircraft.len())?;
    if after.aircraft.len() != before.aircraft.len() {
        return Err(Error::Argument("snapshots hold different aircraft".into()));
    }
    Ok(RewardTerms::measure(before, after, ego, action).weighted(w))
}
