//! Seeded Monte Carlo studies: airspace episodes, SAA horizon sweeps,
//! traffic runs, aggregation and correlation.

mod report;

pub use report::{format_report, parse_report, read_report, write_plot_data, write_report, REPORT_HEADER};

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::airspace::{AirspaceScenario, AirspaceWorld, FlightLogRow, PilotAction, SaaAlgorithm};
use crate::error::{Error, Result};
use crate::io::{TrajectoryRecord, TrajectorySet};
use crate::levelk::{Domain, PolicyRegistry};
use crate::rl::StochasticPolicy;
use crate::traffic::{TrafficAction, TrafficConfig, TrafficWorld};
use crate::{mix_seed, seeded_rng, SimRng};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct EpisodeMetrics {
    /// Separation-radius entries by pairs involving an unmanned aircraft.
    pub separation_violations: f64,
    /// Separation-radius entries between manned aircraft.
    pub manned_violations: f64,
    pub collisions: f64,
    /// Mean over manned aircraft of the time-mean distance to their route.
    pub manned_trajectory_deviation: f64,
    pub uas_trajectory_deviation: f64,
    /// Mean time for unmanned aircraft to reach their last waypoint; the
    /// episode duration for any that never arrive.
    pub uas_flight_time: f64,
}

impl EpisodeMetrics {
    pub const FIELDS: [&'static str; 6] = [
        "violations",
        "manned_violations",
        "collisions",
        "manned_dev",
        "uas_dev",
        "flight_time",
    ];

    pub fn values(&self) -> [f64; 6] {
        [
            self.separation_violations,
            self.manned_violations,
            self.collisions,
            self.manned_trajectory_deviation,
            self.uas_trajectory_deviation,
            self.uas_flight_time,
        ]
    }

    fn from_values(v: [f64; 6]) -> Self {
        Self {
            separation_violations: v[0],
            manned_violations: v[1],
            collisions: v[2],
            manned_trajectory_deviation: v[3],
            uas_trajectory_deviation: v[4],
            uas_flight_time: v[5],
        }
    }

    fn from_world(w: &AirspaceWorld) -> Self {
        let mut manned = (0.0, 0usize);
        let mut uas = (0.0, 0usize);
        let mut flight = (0.0, 0usize);
        for (i, a) in w.aircraft.iter().enumerate() {
            let dev = w.metrics.mean_deviation(i).unwrap_or(0.0);
            if a.is_manned() {
                manned.0 += dev;
                manned.1 += 1;
            } else {
                uas.0 += dev;
                uas.1 += 1;
                flight.0 += a.finish_time.unwrap_or(w.time);
                flight.1 += 1;
            }
        }
        let mean = |(s, n): (f64, usize)| if n > 0 { s / n as f64 } else { 0.0 };
        Self {
            separation_violations: w.metrics.separation_violations as f64,
            manned_violations: w.metrics.manned_violations as f64,
            collisions: w.metrics.collisions as f64,
            manned_trajectory_deviation: mean(manned),
            uas_trajectory_deviation: mean(uas),
            uas_flight_time: mean(flight),
        }
    }
}

fn resolve(registry: &PolicyRegistry, domain: Domain, level: usize) -> Result<Arc<StochasticPolicy>> {
    registry
        .get(domain, level)
        .map_err(|_| Error::Config(format!("scenario references missing level-{level} {domain} policy")))
}

/// Fly one airspace episode. Manned pilots sample their level's policy
/// every decision interval from their own random stream.
pub fn run_episode(
    scenario: &AirspaceScenario,
    registry: &PolicyRegistry,
    seed: u64,
    log: Option<&mut Vec<FlightLogRow>>,
) -> Result<EpisodeMetrics> {
    let (mut world, levels) = scenario.build(seed)?;
    let policies: Vec<Option<Arc<StochasticPolicy>>> = levels
        .iter()
        .map(|l| l.map(|l| resolve(registry, Domain::Airspace, l)).transpose())
        .collect::<Result<_>>()?;
    let mut rngs: Vec<SimRng> = (0..world.len())
        .map(|i| seeded_rng(mix_seed(seed, i as u64 + 1)))
        .collect();
    let mut log = log;
    while !world.finished() {
        let mut actions = Vec::new();
        for (i, p) in policies.iter().enumerate() {
            if let Some(p) = p {
                if world.aircraft[i].active {
                    let s = world.observe(i).index()?;
                    actions.push((i, p.sample(s, &mut rngs[i])));
                }
            }
        }
        for (i, a) in actions {
            world.apply_pilot_action(i, PilotAction::from_index(a)?)?;
        }
        world.advance_interval(log.as_deref_mut());
    }
    Ok(EpisodeMetrics::from_world(&world))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub distance_horizons: Vec<f64>,
    pub time_horizons: Vec<f64>,
    pub runs_per_cell: usize,
    pub base_seed: u64,
}

impl SweepGrid {
    pub fn validate(&self) -> Result<()> {
        if self.distance_horizons.is_empty() || self.time_horizons.is_empty() || self.runs_per_cell == 0 {
            return Err(Error::Config("sweep grid needs both axes and at least one run".into()));
        }
        if self
            .distance_horizons
            .iter()
            .chain(&self.time_horizons)
            .any(|h| !(*h >= 0.0 && h.is_finite()))
        {
            return Err(Error::Config("horizons must be nonnegative".into()));
        }
        Ok(())
    }

    /// Seed of run `run`. Every cell shares the same seeds so cells are
    /// compared on identical traffic.
    pub fn run_seed(&self, run: usize) -> u64 {
        mix_seed(self.base_seed, run as u64)
    }

    pub fn cells(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for &dh in &self.distance_horizons {
            for &th in &self.time_horizons {
                out.push((dh, th));
            }
        }
        out
    }
}

/// Mean and standard error of every metric over one cell's runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub distance_horizon: f64,
    pub time_horizon: f64,
    pub runs: usize,
    pub mean: EpisodeMetrics,
    pub se: EpisodeMetrics,
    /// Per-run metrics in run order.
    pub episodes: Vec<EpisodeMetrics>,
}

impl CellSummary {
    pub fn from_runs(distance_horizon: f64, time_horizon: f64, episodes: Vec<EpisodeMetrics>) -> Self {
        let n = episodes.len();
        let mut mean = [0.0; 6];
        let mut se = [0.0; 6];
        for k in 0..6 {
            let xs: Vec<f64> = episodes.iter().map(|e| e.values()[k]).collect();
            let (m, s) = mean_se(&xs);
            mean[k] = m;
            se[k] = s;
        }
        Self {
            distance_horizon,
            time_horizon,
            runs: n,
            mean: EpisodeMetrics::from_values(mean),
            se: EpisodeMetrics::from_values(se),
            episodes,
        }
    }

    pub fn total_violations(&self) -> f64 {
        self.episodes.iter().map(|e| e.separation_violations).sum()
    }
}

/// Arithmetic mean and standard error (sample std / √n; 0 for one run).
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let m = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (m, 0.0);
    }
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64;
    (m, (var / n as f64).sqrt())
}

/// Run every (cell, run) pair in parallel and aggregate per cell, in grid
/// order.
pub fn sweep(
    grid: &SweepGrid,
    scenario: &AirspaceScenario,
    algorithm: SaaAlgorithm,
    registry: &PolicyRegistry,
) -> Result<Vec<CellSummary>> {
    grid.validate()?;
    let cells = grid.cells();
    let runs = grid.runs_per_cell;
    let items: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..runs).map(move |r| (c, r)))
        .collect();
    let results: Vec<EpisodeMetrics> = items
        .par_iter()
        .map(|&(c, r)| {
            let (dh, th) = cells[c];
            let mut sc = scenario.clone();
            sc.config.saa.algorithm = algorithm;
            sc.config.saa.distance_horizon = dh;
            sc.config.saa.time_horizon = th;
            run_episode(&sc, registry, grid.run_seed(r), None)
        })
        .collect::<Result<_>>()?;
    Ok(cells
        .iter()
        .enumerate()
        .map(|(c, &(dh, th))| CellSummary::from_runs(dh, th, results[c * runs..(c + 1) * runs].to_vec()))
        .collect())
}

/// Product-moment correlation.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::Argument(format!(
            "pearson needs two equal-length samples of at least 2, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("zero variance".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Bytes for a dense table of `num_states × num_columns` values.
pub fn memory_estimate(num_states: u64, num_columns: u64, bytes_per_value: u64) -> u64 {
    num_states * num_columns * bytes_per_value
}

/// Pilot observation count of the 3D extension: twelve regions
/// (`5^12 · 3^3`).
pub const AIRSPACE_3D_STATES: u64 = 6_591_796_875;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct TrafficMetrics {
    /// Vehicles in collision summed over decision intervals.
    pub collision_intervals: u64,
    pub mean_speed: f64,
    pub rejected_lane_changes: u64,
}

/// Simulate a traffic episode where vehicle `i` follows level
/// `levels[i]`, logging every vehicle's state each frame.
pub fn run_traffic_episode(
    config: &TrafficConfig,
    registry: &PolicyRegistry,
    levels: &[usize],
    seed: u64,
    log: Option<&mut Vec<TrajectoryRecord>>,
) -> Result<TrafficMetrics> {
    let mut world = TrafficWorld::generate(config.clone(), &mut seeded_rng(mix_seed(seed, 0x5EED_0001)))?;
    let n = world.vehicles.len();
    if levels.len() != n {
        return Err(Error::Config(format!("{} levels for {n} vehicles", levels.len())));
    }
    let policies: Vec<Arc<StochasticPolicy>> = levels
        .iter()
        .map(|l| resolve(registry, Domain::Traffic, *l))
        .collect::<Result<_>>()?;
    let mut rngs: Vec<SimRng> = (0..n).map(|i| seeded_rng(mix_seed(seed, i as u64 + 1))).collect();
    let mut log = log;
    let mut metrics = TrafficMetrics::default();
    for _ in 0..world.config.decisions_per_episode() {
        let states: Vec<Option<usize>> = (0..n)
            .map(|i| (!world.is_locked(i)).then(|| world.observe(i).index()))
            .collect();
        for (i, s) in states.into_iter().enumerate() {
            if let Some(s) = s {
                let a = policies[i].sample(s, &mut rngs[i]);
                world.apply_action(i, TrafficAction::from_index(a)?, &mut rngs[i])?;
            }
        }
        world.advance_interval(log.as_deref_mut());
        metrics.collision_intervals += world.vehicles.iter().filter(|v| v.collided).count() as u64;
    }
    metrics.mean_speed = world.mean_speed();
    metrics.rejected_lane_changes = world.rejected_lane_changes;
    Ok(metrics)
}

/// Trajectories of `drivers` synthetic drivers, all following `level`,
/// from consecutive episodes of `config.num_vehicles` vehicles. Vehicle
/// ids and frames are disjoint across episodes. Vehicles past `drivers`
/// are dropped, so a partial last episode loses part of its traffic.
pub fn synthetic_drivers(
    config: &TrafficConfig,
    registry: &PolicyRegistry,
    level: usize,
    drivers: usize,
    seed: u64,
) -> Result<TrajectorySet> {
    let per = config.num_vehicles;
    let episodes = drivers.div_ceil(per);
    let frames = config.decisions_per_episode() * config.decision_steps();
    let stride = (frames + config.decision_steps()) as u64;
    let logs: Vec<Vec<TrajectoryRecord>> = (0..episodes)
        .into_par_iter()
        .map(|e| {
            let mut log = Vec::new();
            run_traffic_episode(config, registry, &vec![level; per], mix_seed(seed, e as u64), Some(&mut log))?;
            for r in &mut log {
                r.vehicle_id += (e * per) as u64;
                r.frame += e as u64 * stride;
            }
            Ok(log)
        })
        .collect::<Result<_>>()?;
    Ok(TrajectorySet::from_records(
        logs.into_iter().flatten().filter(|r| (r.vehicle_id as usize) < drivers),
    ))
}
