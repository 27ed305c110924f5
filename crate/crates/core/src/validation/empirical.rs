use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::Result;
use crate::io::{TrajectoryRecord, TrajectorySet};
use crate::traffic::{
    classify_acceleration, lane_center, lane_of, TrafficAction, TrafficConfig, TrafficWorld, VehicleState,
    NUM_ACTIONS,
};

/// Lateral distance from the lane centre beyond which a sample counts as
/// mid-manoeuvre.
pub const CENTER_TOLERANCE: f64 = 0.5;

/// Action counts per visited state for one driver.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmpiricalPolicy {
    counts: BTreeMap<usize, [u64; NUM_ACTIONS]>,
}

impl EmpiricalPolicy {
    pub fn record(&mut self, state: usize, action: TrafficAction) {
        self.counts.entry(state).or_insert([0; NUM_ACTIONS])[action.index()] += 1;
    }

    pub fn counts(&self, state: usize) -> Option<&[u64; NUM_ACTIONS]> {
        self.counts.get(&state)
    }

    pub fn visits(&self, state: usize) -> u64 {
        self.counts.get(&state).map_or(0, |c| c.iter().sum())
    }

    /// Visited states in ascending order.
    pub fn states(&self) -> impl Iterator<Item = usize> + '_ {
        self.counts.keys().copied()
    }

    pub fn total_visits(&self) -> u64 {
        self.counts.values().flatten().sum()
    }

    /// Action frequencies in `state`.
    pub fn distribution(&self, state: usize) -> Option<[f64; NUM_ACTIONS]> {
        let c = self.counts.get(&state)?;
        let n: u64 = c.iter().sum();
        let mut p = [0.0; NUM_ACTIONS];
        for (pi, ci) in p.iter_mut().zip(c) {
            *pi = *ci as f64 / n as f64;
        }
        Some(p)
    }
}

fn off_center(y: f64, config: &TrafficConfig) -> bool {
    let lane = lane_of(y, config.lane_width, config.lanes);
    (y - lane_center(lane, config.lane_width)).abs() > CENTER_TOLERANCE
}

fn next_record(recs: &[TrajectoryRecord], frame: u64) -> Option<&TrajectoryRecord> {
    recs.binary_search_by_key(&frame, |r| r.frame).ok().map(|i| &recs[i])
}

/// Label the decision taken at `cur`: a lane change shows up as a
/// different lane, or an off-centre position, one decision later; any
/// other decision is read off the acceleration bins.
fn classify(cur: &TrajectoryRecord, next: Option<&TrajectoryRecord>, config: &TrafficConfig) -> TrafficAction {
    if let Some(nx) = next {
        let w = config.lane_width;
        let moved = lane_of(nx.y, w, config.lanes) != lane_of(cur.y, w, config.lanes) || off_center(nx.y, config);
        if moved && nx.y != cur.y {
            return if nx.y < cur.y {
                TrafficAction::LaneLeft
            } else {
                TrafficAction::LaneRight
            };
        }
    }
    classify_acceleration(cur.a)
}

/// Per-driver empirical policies from recorded trajectories.
///
/// Frames that are multiples of the configured decision interval are
/// sampled. At each sample the driver's observation is rebuilt from all
/// vehicles present in that frame with the geometry of `config`; use a
/// large `ring_length` for open-road data. Samples taken while a vehicle
/// is between lanes are skipped.
pub fn build_empirical(set: &TrajectorySet, config: &TrafficConfig) -> Result<BTreeMap<u64, EmpiricalPolicy>> {
    config.validate()?;
    let step = config.decision_steps() as u64;
    let mut frames: BTreeMap<u64, Vec<&TrajectoryRecord>> = BTreeMap::new();
    for r in set.records().filter(|r| r.frame % step == 0) {
        frames.entry(r.frame).or_default().push(r);
    }
    let frames: Vec<(u64, Vec<&TrajectoryRecord>)> = frames.into_iter().collect();

    let labelled: Vec<Vec<(u64, usize, TrafficAction)>> = frames
        .par_iter()
        .map(|(frame, recs)| {
            let vehicles: Vec<VehicleState> = recs
                .iter()
                .map(|r| {
                    let lane = lane_of(r.y, config.lane_width, config.lanes);
                    VehicleState::new(r.vehicle_id, r.x, r.y, lane, r.v.max(0.0), config.vehicle_length)
                })
                .collect();
            let world = TrafficWorld::new(config.clone(), vehicles)?;
            let mut out = Vec::new();
            for (i, r) in recs.iter().enumerate() {
                if off_center(r.y, config) {
                    continue;
                }
                let next = next_record(&set.vehicles[&r.vehicle_id], frame + step);
                let action = classify(r, next, config);
                out.push((r.vehicle_id, world.observe(i).index(), action));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let mut out: BTreeMap<u64, EmpiricalPolicy> = BTreeMap::new();
    for (id, s, a) in labelled.into_iter().flatten() {
        out.entry(id).or_default().record(s, a);
    }
    Ok(out)
}
