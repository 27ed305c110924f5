//! Conflict detection and the two velocity-vectoring resolution laws.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::geom::{add, angle_between, dot, norm, scale, sub, unit, Vec2};
use super::NMI_KM;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SaaAlgorithm {
    Saa1,
    Saa2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SaaConfig {
    pub algorithm: SaaAlgorithm,
    /// Scan radius (km); 0 disables the autopilot's avoidance.
    pub distance_horizon: f64,
    /// Projection time (s); 0 disables the autopilot's avoidance.
    pub time_horizon: f64,
    /// Predicted miss distance below which a conflict is declared (km).
    pub threshold: f64,
}

impl Default for SaaConfig {
    fn default() -> Self {
        Self {
            algorithm: SaaAlgorithm::Saa2,
            distance_horizon: 30.0,
            time_horizon: 120.0,
            threshold: 5.0 * NMI_KM,
        }
    }
}

impl SaaConfig {
    pub fn enabled(&self) -> bool {
        self.distance_horizon > 0.0 && self.time_horizon > 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.distance_horizon >= 0.0 && self.time_horizon >= 0.0) {
            return Err(Error::Config("SAA horizons must be nonnegative".into()));
        }
        if !(self.threshold > 0.0) {
            return Err(Error::Config("SAA threshold must be positive".into()));
        }
        Ok(())
    }
}

/// Predicted closest approach within the time horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conflict {
    /// Seconds from now.
    pub time: f64,
    /// Km.
    pub distance: f64,
}

/// Project both aircraft along straight lines for `time_horizon` seconds
/// and report the closest approach if it falls below the threshold.
/// Intruders beyond the distance horizon are not scanned.
pub fn detect_conflict(
    p_e: Vec2,
    v_e: Vec2,
    p_i: Vec2,
    v_i: Vec2,
    saa: &SaaConfig,
) -> Option<Conflict> {
    if !saa.enabled() {
        return None;
    }
    let r0 = sub(p_i, p_e);
    if norm(r0) > saa.distance_horizon {
        return None;
    }
    let v_rel = scale(sub(v_i, v_e), 1.0 / 3600.0);
    let vv = dot(v_rel, v_rel);
    let t = if vv > 0.0 {
        (-dot(r0, v_rel) / vv).clamp(0.0, saa.time_horizon)
    } else {
        0.0
    };
    let d = norm(add(r0, scale(v_rel, t)));
    (d < saa.threshold).then_some(Conflict {
        time: t,
        distance: d,
    })
}

/// Resolution law of the first autopilot:
///
/// ```text
/// v_d = (|v_ei| cos(η−ξ) / sin ξ) (sin η v̂_ei − sin(η−ξ) r̂) + v_i
/// ```
///
/// with `r = p_e − p_i` and `v_ei = v_e − v_i` (ego relative to
/// intruder), `η` the angle between them and `ξ = asin(R/|r|)`. Returns
/// `None` inside the protected zone `|r| ≤ R`, where `ξ` is undefined.
pub fn saa1_raw(p_e: Vec2, v_e: Vec2, p_i: Vec2, v_i: Vec2, r_threshold: f64) -> Option<Vec2> {
    let r = sub(p_e, p_i);
    let dist = norm(r);
    if dist <= r_threshold {
        return None;
    }
    let v_ei = sub(v_e, v_i);
    let speed = norm(v_ei);
    if speed == 0.0 {
        return Some(v_i);
    }
    let eta = angle_between(r, v_ei);
    let xi = (r_threshold / dist).asin();
    let k = speed * (eta - xi).cos() / xi.sin();
    let dir = sub(
        scale(v_ei, eta.sin() / speed),
        scale(r, (eta - xi).sin() / dist),
    );
    Some(add(scale(dir, k), v_i))
}

/// First autopilot with its fallback: inside the protected zone the
/// aircraft flies straight away from the intruder at `cruise` speed.
pub fn saa1_command(
    p_e: Vec2,
    v_e: Vec2,
    p_i: Vec2,
    v_i: Vec2,
    r_threshold: f64,
    cruise: f64,
) -> Vec2 {
    saa1_raw(p_e, v_e, p_i, v_i, r_threshold).unwrap_or_else(|| {
        let away = unit(sub(p_e, p_i))
            .or_else(|| unit(v_e))
            .unwrap_or([0.0, 1.0]);
        scale(away, cruise)
    })
}

/// Direction commanded by the second autopilot:
///
/// ```text
/// v_d ∝ −v_e (r0·v_ei / |v_ei|) − (R − |r_m|) r_m/|r_m|
/// ```
///
/// with `r0 = p_i − p_e`, `v_ei = v_i − v_e` (intruder relative to ego),
/// velocities in km/s and lengths in km, and `r_m = r0 + v_ei t_m` the
/// relative position at closest approach (`t_m ≥ 0`). Returns the unit
/// vector, or `None` when `r_m = 0` or there is no relative motion.
pub fn saa2_raw(p_e: Vec2, v_e: Vec2, p_i: Vec2, v_i: Vec2, r_threshold: f64) -> Option<Vec2> {
    let r0 = sub(p_i, p_e);
    let v_e_s = scale(v_e, 1.0 / 3600.0);
    let v_ei = scale(sub(v_i, v_e), 1.0 / 3600.0);
    let speed = norm(v_ei);
    if speed == 0.0 {
        return None;
    }
    let t_m = (-dot(r0, v_ei) / (speed * speed)).max(0.0);
    let r_m = add(r0, scale(v_ei, t_m));
    let miss = norm(r_m);
    if miss == 0.0 {
        return None;
    }
    let along = dot(r0, v_ei) / speed;
    let cmd = sub(
        scale(v_e_s, -along),
        scale(r_m, (r_threshold - miss) / miss),
    );
    unit(cmd)
}

/// Second autopilot at `cruise` speed. On an exact predicted collision the
/// aircraft escapes perpendicular to the relative velocity.
pub fn saa2_command(
    p_e: Vec2,
    v_e: Vec2,
    p_i: Vec2,
    v_i: Vec2,
    r_threshold: f64,
    cruise: f64,
) -> Vec2 {
    let dir = saa2_raw(p_e, v_e, p_i, v_i, r_threshold).unwrap_or_else(|| {
        let v_ei = sub(v_i, v_e);
        unit([v_ei[1], -v_ei[0]])
            .or_else(|| unit(v_e))
            .unwrap_or([0.0, 1.0])
    });
    scale(dir, cruise)
}
