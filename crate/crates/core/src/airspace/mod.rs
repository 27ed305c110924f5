//! 2D hybrid airspace: manned aircraft flown by pilot policies and
//! unmanned aircraft flown by a sense-and-avoid (SAA) autopilot.
//!
//! Positions are in km, speeds in km/h, time in seconds, headings in
//! degrees clockwise from north.

pub mod geom;
mod saa;
mod scenario;
mod world;

pub use geom::{velocity_components, Vec2};
pub use saa::{detect_conflict, saa1_command, saa1_raw, saa2_command, saa2_raw, Conflict, SaaAlgorithm, SaaConfig};
pub use scenario::{AircraftSpec, AirspaceScenario, Layout, RandomLayout};
pub use world::{
    pilot_reward, Aircraft, AircraftKind, AirspaceConfig, AirspaceRewardWeights, AirspaceWorld,
    FlightLogRow, RewardTerms, WorldMetrics,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NMI_KM: f64 = 1.852;
pub const NUM_ACTIONS: usize = 3;
pub const NUM_REGIONS: usize = 6;
/// `5^6 · 3^3` pilot observations.
pub const NUM_OBSERVATIONS: usize = 421_875;
/// First-order heading response, 1/s.
pub const HEADING_GAIN: f64 = 0.1;

const RADICES: [usize; 9] = [5, 5, 5, 5, 5, 5, 3, 3, 3];

/// Radices of the observation digits, least significant first.
pub fn observation_radices() -> Vec<usize> {
    RADICES.to_vec()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PilotAction {
    Left45 = 0,
    Straight = 1,
    Right45 = 2,
}

impl PilotAction {
    pub const ALL: [PilotAction; NUM_ACTIONS] =
        [PilotAction::Left45, PilotAction::Straight, PilotAction::Right45];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Self> {
        Self::ALL
            .get(i)
            .copied()
            .ok_or(Error::bounds("pilot action", i, NUM_ACTIONS))
    }

    /// Change applied to the desired heading.
    pub fn heading_change(self) -> f64 {
        match self {
            PilotAction::Left45 => -45.0,
            PilotAction::Straight => 0.0,
            PilotAction::Right45 => 45.0,
        }
    }
}

/// Six region codes, best trajectory action, best destination action and
/// previous action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PilotObservation {
    /// Index `ring · 3 + slice`; rings inner/outer, slices front/right/left.
    pub regions: [u8; NUM_REGIONS],
    pub bta: u8,
    pub bda: u8,
    pub pa: u8,
}

impl PilotObservation {
    fn digits(&self) -> [usize; 9] {
        let r = self.regions.map(usize::from);
        [
            r[0],
            r[1],
            r[2],
            r[3],
            r[4],
            r[5],
            self.bta as usize,
            self.bda as usize,
            self.pa as usize,
        ]
    }

    pub fn index(&self) -> Result<usize> {
        let mut idx = 0;
        let mut place = 1;
        for (k, (d, r)) in self.digits().into_iter().zip(RADICES).enumerate() {
            if d >= r {
                return Err(Error::Encoding(format!(
                    "observation component {k} = {d} outside [0, {r})"
                )));
            }
            idx += d * place;
            place *= r;
        }
        Ok(idx)
    }

    pub fn decode(index: usize) -> Result<Self> {
        if index >= NUM_OBSERVATIONS {
            return Err(Error::Encoding(format!(
                "pilot observation index {index} outside [0, {NUM_OBSERVATIONS})"
            )));
        }
        let mut rest = index;
        let mut d = [0u8; 9];
        for (k, r) in RADICES.iter().enumerate() {
            d[k] = (rest % r) as u8;
            rest /= r;
        }
        Ok(Self {
            regions: [d[0], d[1], d[2], d[3], d[4], d[5]],
            bta: d[6],
            bda: d[7],
            pa: d[8],
        })
    }
}

/// Mixed-radix index of an observation.
pub fn observation_index(obs: &PilotObservation) -> Result<usize> {
    obs.index()
}

/// Approach code for the angle between two headings: `[0,45)` → 4,
/// `[45,90)` → 3, `[90,135)` → 2, `[135,180]` → 1.
pub fn approach_code(angle_deg: f64) -> u8 {
    let a = angle_deg.abs().min(179.999);
    4 - (a / 45.0).floor() as u8
}

/// Explicit Euler step of `Ψ̇ = −0.1 (Ψ − Ψ_d)` on the shortest angular
/// difference.
pub fn step_heading(psi: f64, psi_d: f64, dt: f64) -> f64 {
    let err = geom::wrap180(psi - psi_d);
    geom::wrap360(psi - HEADING_GAIN * err * dt)
}

/// Euler step of `v̇ = −(v − v_d)`.
pub fn step_uas_velocity(v: Vec2, v_d: Vec2, dt: f64) -> Vec2 {
    [v[0] - (v[0] - v_d[0]) * dt, v[1] - (v[1] - v_d[1]) * dt]
}
