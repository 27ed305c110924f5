use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{mix_seed, seeded_rng};

use super::geom::{add, heading_of, lookahead_point, norm, scale, sub, unit, Vec2};
use super::world::{Aircraft, AircraftKind, AirspaceConfig, AirspaceWorld};

/// One aircraft of an explicit roster. Manned aircraft fly from `position`
/// toward the last waypoint; unmanned aircraft follow `waypoints` in order
/// starting from `position`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AircraftSpec {
    pub kind: AircraftKind,
    pub position: Vec2,
    /// km/h.
    pub speed: f64,
    /// Initial heading; defaults to the bearing of the first waypoint.
    #[serde(default)]
    pub heading: Option<f64>,
    pub waypoints: Vec<Vec2>,
    /// Pilot level for manned aircraft; falls back to the scenario level.
    #[serde(default)]
    pub level: Option<usize>,
}

/// Random traffic over a rectangular sector: manned aircraft on straight
/// crossing routes, unmanned aircraft on a three-point west-to-east route.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RandomLayout {
    pub manned: usize,
    pub unmanned: usize,
    pub width: f64,
    pub height: f64,
    pub manned_speed: (f64, f64),
    pub uas_speed: f64,
    /// Manned aircraft start at a random fraction of their route in
    /// `[0, start_progress)`.
    pub start_progress: f64,
}

impl Default for RandomLayout {
    fn default() -> Self {
        Self {
            manned: 10,
            unmanned: 1,
            width: 100.0,
            height: 50.0,
            manned_speed: (400.0, 500.0),
            uas_speed: 300.0,
            start_progress: 0.6,
        }
    }
}

impl RandomLayout {
    /// The 600 km × 300 km, 180-aircraft configuration.
    pub fn large() -> Self {
        Self {
            manned: 170,
            unmanned: 10,
            width: 600.0,
            height: 300.0,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Layout {
    Random(RandomLayout),
    Explicit { aircraft: Vec<AircraftSpec> },
}

impl Default for Layout {
    fn default() -> Self {
        Layout::Random(RandomLayout::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct AirspaceScenario {
    pub config: AirspaceConfig,
    pub layout: Layout,
    /// Level of every manned pilot without an explicit level.
    pub pilot_level: usize,
}

fn edge_point<R: Rng>(rng: &mut R, side: usize, w: f64, h: f64) -> Vec2 {
    match side {
        0 => [0.0, rng.random_range(0.0..h)],
        1 => [w, rng.random_range(0.0..h)],
        2 => [rng.random_range(0.0..w), 0.0],
        _ => [rng.random_range(0.0..w), h],
    }
}

impl AirspaceScenario {
    /// Build the initial world for `seed`, with the pilot level of every
    /// aircraft (`None` for unmanned ones).
    pub fn build(&self, seed: u64) -> Result<(AirspaceWorld, Vec<Option<usize>>)> {
        let mut config = self.config.clone();
        let mut aircraft = Vec::new();
        let mut levels = Vec::new();
        match &self.layout {
            Layout::Random(r) => {
                if !(r.width > 0.0 && r.height > 0.0)
                    || !(r.manned_speed.0 > 0.0 && r.manned_speed.0 <= r.manned_speed.1)
                    || !(r.uas_speed > 0.0)
                    || !(0.0..1.0).contains(&r.start_progress)
                {
                    return Err(Error::Config(format!("invalid random layout {r:?}")));
                }
                if config.sector.is_none() {
                    config.sector = Some([0.0, 0.0, r.width, r.height]);
                }
                let mut rng = seeded_rng(mix_seed(seed, 0xA1));
                for k in 0..r.manned {
                    let side = rng.random_range(0..4usize);
                    let start = edge_point(&mut rng, side, r.width, r.height);
                    let dest = edge_point(&mut rng, side ^ 1, r.width, r.height);
                    let speed = if r.manned_speed.1 > r.manned_speed.0 {
                        rng.random_range(r.manned_speed.0..r.manned_speed.1)
                    } else {
                        r.manned_speed.0
                    };
                    let u = rng.random_range(0.0..r.start_progress.max(f64::MIN_POSITIVE));
                    let leg = sub(dest, start);
                    let pos = add(start, scale(leg, u));
                    let heading = heading_of(leg);
                    aircraft.push(Aircraft::manned(k as u64, pos, heading, speed, vec![start, dest]));
                    levels.push(Some(self.pilot_level));
                }
                for k in 0..r.unmanned {
                    let mid_y = r.height / 2.0;
                    let y0 = mid_y + rng.random_range(-0.2..0.2) * r.height;
                    let y1 = mid_y + rng.random_range(-0.2..0.2) * r.height;
                    let bend = mid_y + rng.random_range(-0.2..0.2) * r.height;
                    let route = vec![[0.0, y0], [r.width / 2.0, bend], [r.width, y1]];
                    aircraft.push(Aircraft::unmanned((r.manned + k) as u64, r.uas_speed, route));
                    levels.push(None);
                }
            }
            Layout::Explicit { aircraft: specs } => {
                for (k, s) in specs.iter().enumerate() {
                    if s.waypoints.is_empty() || !(s.speed > 0.0) {
                        return Err(Error::Config(format!(
                            "aircraft {k} needs a positive speed and at least one waypoint"
                        )));
                    }
                    match s.kind {
                        AircraftKind::Manned => {
                            let mut route = vec![s.position];
                            route.extend(s.waypoints.iter().copied());
                            let heading = s.heading.unwrap_or_else(|| {
                                let target = lookahead_point(s.position, &route, 1.0);
                                unit(sub(target, s.position)).map_or(0.0, heading_of)
                            });
                            aircraft.push(Aircraft::manned(k as u64, s.position, heading, s.speed, route));
                            levels.push(Some(s.level.unwrap_or(self.pilot_level)));
                        }
                        AircraftKind::Unmanned => {
                            let mut route = vec![s.position];
                            route.extend(s.waypoints.iter().copied());
                            if norm(sub(route[1], route[0])) == 0.0 {
                                route.remove(0);
                            }
                            let mut a = Aircraft::unmanned(k as u64, s.speed, route);
                            a.position = s.position;
                            if let Some(h) = s.heading {
                                a.heading = h;
                                a.desired_heading = h;
                                a.velocity = super::geom::velocity_components(h, s.speed);
                            }
                            aircraft.push(a);
                            levels.push(None);
                        }
                    }
                }
            }
        }
        Ok((AirspaceWorld::new(config, aircraft)?, levels))
    }

    pub fn num_manned(&self) -> usize {
        match &self.layout {
            Layout::Random(r) => r.manned,
            Layout::Explicit { aircraft } => aircraft.iter().filter(|a| a.kind == AircraftKind::Manned).count(),
        }
    }
}
