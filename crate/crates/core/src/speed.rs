//! Relative-speed and Leader-speed observations from consecutive relative
//! positions.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::lqg::RelativeState;

/// How the Leader is expected to move during the next slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpeedStrategy {
    /// The Leader stays where it is.
    Optimistic,
    /// The Leader keeps its observed speed.
    Pragmatic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedObservation {
    /// Observed relative speed along the local X axis, m/s.
    pub v_rel_m: f64,
    /// Predicted Leader speed along X for the next slot, m/s.
    pub v_leader_next: f64,
}

fn check_dt(dt: f64) -> Result<()> {
    ensure_finite(dt, "dt")?;
    if dt <= 0.0 {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    Ok(())
}

/// Observation assuming a static Leader.
pub fn optimistic_observe(d_m: f64, theta_m: f64, prev: &RelativeState, dt: f64) -> Result<SpeedObservation> {
    check_dt(dt)?;
    let v_rel_m = prev.v_rel_e - (d_m - prev.d_e * theta_m.cos()) / dt;
    Ok(SpeedObservation {
        v_rel_m: ensure_finite(v_rel_m, "v_rel_m")?,
        v_leader_next: 0.0,
    })
}

/// Intermediate quantities of the pragmatic observer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeaderMotion {
    pub v1: f64,
    pub v2: f64,
    /// Leader speed magnitude, m/s.
    pub v_l: f64,
    pub theta_v: f64,
    /// Leader speed along X, m/s.
    pub v_l_m: f64,
}

/// Apparent Leader displacement between the previous estimate (on the X
/// axis at `d_e`) and the new observation.
pub fn leader_motion(d_m: f64, theta_m: f64, d_e: f64, dt: f64) -> Result<LeaderMotion> {
    check_dt(dt)?;
    let v1 = d_m * theta_m.cos() - d_e;
    let v2 = d_m * theta_m.sin();
    let v_l = v1.hypot(v2) / dt;
    let theta_v = v2.atan2(v1) - theta_m;
    Ok(LeaderMotion {
        v1,
        v2,
        v_l,
        theta_v,
        v_l_m: v_l * theta_v.cos(),
    })
}

/// Observation assuming the Leader keeps the speed it showed in the last slot.
pub fn pragmatic_observe(
    d_m: f64,
    theta_m: f64,
    prev: &RelativeState,
    v_f_now: f64,
    dt: f64,
) -> Result<SpeedObservation> {
    let m = leader_motion(d_m, theta_m, prev.d_e, dt)?;
    let v_l_m = ensure_finite(m.v_l_m, "v_leader")?;
    Ok(SpeedObservation {
        v_rel_m: v_f_now - v_l_m,
        v_leader_next: v_l_m,
    })
}

/// Dispatch on the strategy.
pub fn observe(
    strategy: SpeedStrategy,
    d_m: f64,
    theta_m: f64,
    prev: &RelativeState,
    v_f_now: f64,
    dt: f64,
) -> Result<SpeedObservation> {
    match strategy {
        SpeedStrategy::Optimistic => optimistic_observe(d_m, theta_m, prev, dt),
        SpeedStrategy::Pragmatic => pragmatic_observe(d_m, theta_m, prev, v_f_now, dt),
    }
}
